from __future__ import annotations

import asyncio
import logging
import math
from collections.abc import Iterable

import numpy as np
from scipy.stats import linregress

from app.config import SolverConfig
from app.errors import SolverError
from app.models import ConvergenceRow, ExactSolution, OcpProblem, SlopeFit, SolveReport
from app.services.collocation_matrices import build_matrices
from app.services.kkt_system import residual
from app.services.ocp_model import map_to_reference, sample_exact, time_map_for
from app.services.radau_basis import compute_lgr_scheme
from app.services.solver import solve

logger = logging.getLogger(__name__)

ERROR_FLOOR = 1e2 * np.finfo(float).eps
FIT_TARGETS = ("state", "control", "costate")


def _max_gap(a: np.ndarray, b: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(np.atleast_2d(a - b), axis=1).max())


def convergence_row(problem: OcpProblem, exact: ExactSolution, report: SolveReport) -> ConvergenceRow:
    reference = sample_exact(exact, report.scheme, time_map_for(problem))
    s = report.solution
    err_costate = max(
        _max_gap(s.costate, reference.costate),
        float(np.linalg.norm(s.costate0 - reference.costate0)),
    )
    return ConvergenceRow(
        N=report.scheme.n_colloc,
        err_state=_max_gap(s.state, reference.state),
        err_control=_max_gap(s.control, reference.control),
        err_costate=err_costate,
        residual=report.final_residual,
        iterations=report.iterations,
        converged=report.converged,
    )


def _failed_row(n_colloc: int) -> ConvergenceRow:
    nan = math.nan
    return ConvergenceRow(
        N=n_colloc,
        err_state=nan,
        err_control=nan,
        err_costate=nan,
        residual=nan,
        iterations=0,
        converged=False,
    )


def _solve_row(
    problem: OcpProblem,
    exact: ExactSolution,
    n_colloc: int,
    cfg: SolverConfig,
) -> tuple[ConvergenceRow, SolveReport | None]:
    try:
        report = solve(problem, n_colloc, cfg)
    except SolverError:
        logger.exception("Solve failed", extra={"problem": problem.name, "n_colloc": n_colloc})
        return _failed_row(n_colloc), None
    row = convergence_row(problem, exact, report)
    if not row.converged:
        logger.warning(
            "Solve did not converge",
            extra={"problem": problem.name, "n_colloc": n_colloc, "residual": row.residual},
        )
    return row, report


def run_sweep(
    problem: OcpProblem,
    exact: ExactSolution,
    n_values: Iterable[int],
    cfg: SolverConfig | None = None,
) -> list[ConvergenceRow]:
    """Solve each N in turn, warm-starting from the last converged solution."""
    cfg = cfg or SolverConfig()
    rows: list[ConvergenceRow] = []
    warm = cfg.warm_start
    for n_colloc in n_values:
        row, report = _solve_row(problem, exact, n_colloc, cfg.model_copy(update={"warm_start": warm}))
        rows.append(row)
        if report is not None and report.converged:
            warm = report.solution
    return rows


async def run_sweep_parallel(
    problem: OcpProblem,
    exact: ExactSolution,
    n_values: Iterable[int],
    cfg: SolverConfig | None = None,
) -> list[ConvergenceRow]:
    cfg = (cfg or SolverConfig()).model_copy(update={"warm_start": None})
    results = await asyncio.gather(
        *(asyncio.to_thread(_solve_row, problem, exact, n_colloc, cfg) for n_colloc in n_values)
    )
    return [row for row, _ in results]


def fit_slope(rows: list[ConvergenceRow], which: str) -> SlopeFit:
    """Least-squares fit of log10(error) = c - alpha * N."""
    if which not in FIT_TARGETS:
        raise ValueError(f"which must be one of {FIT_TARGETS}, got {which!r}")
    points = [
        (row.N, getattr(row, f"err_{which}"))
        for row in rows
        if row.converged and getattr(row, f"err_{which}") > ERROR_FLOOR
    ]
    if len({n for n, _ in points}) < 2:
        logger.warning("Not enough rows to fit a slope", extra={"which": which, "points": len(points)})
        return SlopeFit(which=which, alpha=math.nan, c=math.nan, r_squared=math.nan, points=len(points))

    ns = np.array([n for n, _ in points], dtype=float)
    logs = np.log10([err for _, err in points])
    fit = linregress(ns, logs)
    return SlopeFit(
        which=which,
        alpha=float(-fit.slope),
        c=float(fit.intercept),
        r_squared=float(fit.rvalue**2),
        points=len(points),
    )


def fit_all(rows: list[ConvergenceRow]) -> list[SlopeFit]:
    return [fit_slope(rows, which) for which in FIT_TARGETS]


def exact_residual_sweep(
    problem: OcpProblem,
    exact: ExactSolution,
    n_values: Iterable[int],
) -> list[tuple[int, float]]:
    """KKT residual sup-norm of the exact solution sampled at the nodes, per N."""
    p_ref = map_to_reference(problem)
    time_map = time_map_for(problem)
    result: list[tuple[int, float]] = []
    for n_colloc in n_values:
        scheme = compute_lgr_scheme(n_colloc)
        samples = sample_exact(exact, scheme, time_map)
        result.append((n_colloc, residual(p_ref, build_matrices(scheme), samples).sup_norm))
    return result
