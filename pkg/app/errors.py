from __future__ import annotations

from typing import Any


class SolverError(RuntimeError):
    pass


class SingularMatrixError(SolverError):
    def __init__(self, label: str, **diagnostics: Any) -> None:
        self.label = label
        self.diagnostics = diagnostics
        details = ", ".join(f"{key}={value}" for key, value in diagnostics.items())
        message = f"{label} is singular to working precision"
        super().__init__(f"{message} ({details})" if details else message)


class ConvergenceError(SolverError):
    pass


class KktEvaluationError(ValueError):
    pass
