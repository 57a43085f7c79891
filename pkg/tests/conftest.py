from __future__ import annotations

from collections.abc import Callable
from functools import lru_cache

import numpy as np
import pytest

from app.config import get_settings
from app.models import DiscreteSolution, ExactSolution, OcpProblem, SolveReport
from app.services.ocp_model import example_problem, lq_problem, map_to_reference
from app.services.solver import solve


@lru_cache(maxsize=None)
def _solve_example(n_colloc: int) -> SolveReport:
    problem, _ = example_problem()
    return solve(problem, n_colloc)


@pytest.fixture(autouse=True)
def _fresh_settings() -> None:
    get_settings.cache_clear()


@pytest.fixture(scope="session")
def example() -> tuple[OcpProblem, ExactSolution]:
    return example_problem()


@pytest.fixture(scope="session")
def example_ref(example: tuple[OcpProblem, ExactSolution]) -> OcpProblem:
    return map_to_reference(example[0])


@pytest.fixture(scope="session")
def lq() -> tuple[OcpProblem, ExactSolution]:
    return lq_problem()


@pytest.fixture(scope="session")
def solve_example() -> Callable[[int], SolveReport]:
    return _solve_example


def scalar_problem(
    *,
    name: str = "scalar",
    control_dim: int = 1,
    cost_curvature: float = 0.0,
) -> OcpProblem:
    """n = 1 problem with f = 0 and C = cost_curvature * x^2 / 2 on [-1, 1]."""
    m = control_dim
    return OcpProblem(
        name=name,
        state_dim=1,
        control_dim=m,
        horizon=(-1.0, 1.0),
        x0=np.array([1.0]),
        dynamics=lambda x, u: np.zeros(1),
        dynamics_jac_x=lambda x, u: np.zeros((1, 1)),
        dynamics_jac_u=lambda x, u: np.zeros((1, m)),
        hamiltonian_xx=lambda x, u, lam: np.zeros((1, 1)),
        hamiltonian_xu=lambda x, u, lam: np.zeros((1, m)),
        hamiltonian_uu=lambda x, u, lam: np.zeros((m, m)),
        cost=lambda x: float(0.5 * cost_curvature * x[0] ** 2),
        cost_grad=lambda x: np.array([cost_curvature * x[0]]),
        cost_hess=lambda x: np.array([[cost_curvature]]),
    )


def zero_solution(n_colloc: int, *, state_dim: int = 1, control_dim: int = 1) -> DiscreteSolution:
    return DiscreteSolution(
        state=np.zeros((n_colloc + 1, state_dim)),
        control=np.zeros((n_colloc, control_dim)),
        costate=np.zeros((n_colloc, state_dim)),
        costate0=np.zeros(state_dim),
    )


@pytest.fixture
def make_scalar_problem() -> Callable[..., OcpProblem]:
    return scalar_problem


@pytest.fixture
def make_zero_solution() -> Callable[..., DiscreteSolution]:
    return zero_solution
