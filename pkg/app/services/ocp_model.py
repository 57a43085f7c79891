from __future__ import annotations

import dataclasses
import logging
import math
from collections.abc import Callable

import numpy as np

from app.models import (
    CollocationScheme,
    DerivativeReport,
    DiscreteSolution,
    ExactSolution,
    OcpProblem,
    TimeMap,
)

logger = logging.getLogger(__name__)

REFERENCE_HORIZON = (-1.0, 1.0)
DERIVATIVE_TOL = 1e-5

_EXAMPLE_RATE = 2.5
_EXAMPLE_COSTATE_DEN = math.exp(-5.0) + 9.0 * math.exp(5.0) + 6.0


def _column(values: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(-1, 1)


def example_problem() -> tuple[OcpProblem, ExactSolution]:
    """min -x(2) s.t. x' = 2.5 (-x + x u - u^2), x(0) = 1."""
    k = _EXAMPLE_RATE

    def dynamics(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return k * (-x + x * u - u**2)

    def jac_x(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.array([[k * (-1.0 + u[0])]])

    def jac_u(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.array([[k * (x[0] - 2.0 * u[0])]])

    def h_xx(x: np.ndarray, u: np.ndarray, lam: np.ndarray) -> np.ndarray:
        return np.zeros((1, 1))

    def h_xu(x: np.ndarray, u: np.ndarray, lam: np.ndarray) -> np.ndarray:
        return np.array([[k * lam[0]]])

    def h_uu(x: np.ndarray, u: np.ndarray, lam: np.ndarray) -> np.ndarray:
        return np.array([[-2.0 * k * lam[0]]])

    problem = OcpProblem(
        name="example1",
        state_dim=1,
        control_dim=1,
        horizon=(0.0, 2.0),
        x0=np.array([1.0]),
        dynamics=dynamics,
        dynamics_jac_x=jac_x,
        dynamics_jac_u=jac_u,
        hamiltonian_xx=h_xx,
        hamiltonian_xu=h_xu,
        hamiltonian_uu=h_uu,
        cost=lambda x: float(-x[0]),
        cost_grad=lambda x: np.array([-1.0]),
        cost_hess=lambda x: np.zeros((1, 1)),
    )

    def a(t: np.ndarray) -> np.ndarray:
        return 1.0 + 3.0 * np.exp(k * np.asarray(t, dtype=float))

    def state(t: np.ndarray) -> np.ndarray:
        return _column(4.0 / a(t))

    def control(t: np.ndarray) -> np.ndarray:
        return _column(2.0 / a(t))

    def costate(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return _column(-(a(t) ** 2) * np.exp(-k * t) / _EXAMPLE_COSTATE_DEN)

    def state_rate(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return _column(-4.0 * 3.0 * k * np.exp(k * t) / a(t) ** 2)

    def costate_rate(t: np.ndarray) -> np.ndarray:
        return costate(t) * _column(k - 2.0 * k / a(t))

    exact = ExactSolution(
        state=state,
        control=control,
        costate=costate,
        state_rate=state_rate,
        costate_rate=costate_rate,
    )
    return problem, exact


def lq_problem() -> tuple[OcpProblem, ExactSolution]:
    """min x2(1) + x1(1)^2 / 2 s.t. x1' = u, x2' = u^2 / 2, x(0) = (1, 0)."""

    def dynamics(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.array([u[0], 0.5 * u[0] ** 2])

    def jac_u(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.array([[1.0], [u[0]]])

    problem = OcpProblem(
        name="lq1",
        state_dim=2,
        control_dim=1,
        horizon=(0.0, 1.0),
        x0=np.array([1.0, 0.0]),
        dynamics=dynamics,
        dynamics_jac_x=lambda x, u: np.zeros((2, 2)),
        dynamics_jac_u=jac_u,
        hamiltonian_xx=lambda x, u, lam: np.zeros((2, 2)),
        hamiltonian_xu=lambda x, u, lam: np.zeros((2, 1)),
        hamiltonian_uu=lambda x, u, lam: np.array([[lam[1]]]),
        cost=lambda x: float(x[1] + 0.5 * x[0] ** 2),
        cost_grad=lambda x: np.array([x[0], 1.0]),
        cost_hess=lambda x: np.diag([1.0, 0.0]),
    )

    def state(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.column_stack([1.0 - t / 2.0, t / 8.0])

    def constant(values: list[float]) -> Callable[[np.ndarray], np.ndarray]:
        def trajectory(t: np.ndarray) -> np.ndarray:
            return np.tile(values, (np.asarray(t).size, 1)).astype(float)

        return trajectory

    exact = ExactSolution(
        state=state,
        control=constant([-0.5]),
        costate=constant([0.5, 1.0]),
        state_rate=constant([-0.5, 0.125]),
        costate_rate=constant([0.0, 0.0]),
    )
    return problem, exact


PROBLEMS: dict[str, Callable[[], tuple[OcpProblem, ExactSolution]]] = {
    "example1": example_problem,
    "lq1": lq_problem,
}


def get_problem(name: str) -> tuple[OcpProblem, ExactSolution]:
    factory = PROBLEMS.get(name)
    if factory is None:
        raise ValueError(f"unknown problem {name!r}, expected one of {sorted(PROBLEMS)}")
    return factory()


def check_problem(p: OcpProblem) -> None:
    t0, tf = p.horizon
    if not tf > t0:
        raise ValueError(f"horizon must satisfy tf > t0, got {p.horizon}")
    n, m = p.state_dim, p.control_dim
    if n < 1 or m < 0:
        raise ValueError(f"invalid dimensions n={n}, m={m}")
    x = np.asarray(p.x0, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({n},)")
    u = np.zeros(m)
    lam = np.ones(n)

    expected = {
        "dynamics": ((n,), p.dynamics(x, u)),
        "dynamics_jac_x": ((n, n), p.dynamics_jac_x(x, u)),
        "dynamics_jac_u": ((n, m), p.dynamics_jac_u(x, u)),
        "hamiltonian_xx": ((n, n), p.hamiltonian_xx(x, u, lam)),
        "hamiltonian_xu": ((n, m), p.hamiltonian_xu(x, u, lam)),
        "hamiltonian_uu": ((m, m), p.hamiltonian_uu(x, u, lam)),
        "cost_grad": ((n,), p.cost_grad(x)),
        "cost_hess": ((n, n), p.cost_hess(x)),
    }
    for name, (shape, value) in expected.items():
        actual = np.shape(value)
        if actual != shape:
            raise ValueError(f"{name} returned shape {actual}, expected {shape}")
    if not np.isfinite(p.cost(x)):
        raise ValueError("cost is not finite at x0")


def time_map_for(p: OcpProblem) -> TimeMap:
    return TimeMap(t0=float(p.horizon[0]), tf=float(p.horizon[1]))


def is_reference(p: OcpProblem) -> bool:
    return tuple(map(float, p.horizon)) == REFERENCE_HORIZON


def map_to_reference(p: OcpProblem) -> OcpProblem:
    if is_reference(p):
        return p
    scale = time_map_for(p).scale
    if scale == 1.0:
        return dataclasses.replace(p, horizon=REFERENCE_HORIZON)

    def scaled_state(fn: Callable[..., np.ndarray]) -> Callable[..., np.ndarray]:
        def wrapped(*args: np.ndarray) -> np.ndarray:
            return scale * np.asarray(fn(*args), dtype=float)

        return wrapped

    return dataclasses.replace(
        p,
        horizon=REFERENCE_HORIZON,
        dynamics=scaled_state(p.dynamics),
        dynamics_jac_x=scaled_state(p.dynamics_jac_x),
        dynamics_jac_u=scaled_state(p.dynamics_jac_u),
        hamiltonian_xx=scaled_state(p.hamiltonian_xx),
        hamiltonian_xu=scaled_state(p.hamiltonian_xu),
        hamiltonian_uu=scaled_state(p.hamiltonian_uu),
    )


def _central_difference(fn: Callable[[np.ndarray], np.ndarray], z: np.ndarray) -> np.ndarray:
    """Columns are d fn / d z_j."""
    z = np.asarray(z, dtype=float)
    base = np.atleast_1d(np.asarray(fn(z), dtype=float))
    columns = np.empty(base.shape + (z.size,))
    eps_cbrt = np.finfo(float).eps ** (1.0 / 3.0)
    for j in range(z.size):
        h = eps_cbrt * max(1.0, abs(z[j]))
        step = np.zeros_like(z)
        step[j] = h
        plus = np.atleast_1d(np.asarray(fn(z + step), dtype=float))
        minus = np.atleast_1d(np.asarray(fn(z - step), dtype=float))
        columns[..., j] = (plus - minus) / (2.0 * h)
    return columns


def _relative_gap(analytic: np.ndarray, numeric: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=float).reshape(numeric.shape)
    if numeric.size == 0:
        return 0.0
    scale = max(1.0, float(np.abs(numeric).max()))
    return float(np.abs(analytic - numeric).max() / scale)


def validate_derivatives(
    p: OcpProblem,
    probes: int,
    *,
    seed: int = 0,
    radius: float = 0.1,
    tolerance: float = DERIVATIVE_TOL,
) -> DerivativeReport:
    if probes < 1:
        raise ValueError("probes must be >= 1")
    rng = np.random.default_rng(seed)
    n, m = p.state_dim, p.control_dim
    x0 = np.asarray(p.x0, dtype=float)
    lam0 = np.asarray(p.cost_grad(x0), dtype=float)
    worst: dict[str, float] = {
        name: 0.0
        for name in (
            "dynamics_jac_x",
            "dynamics_jac_u",
            "hamiltonian_xx",
            "hamiltonian_xu",
            "hamiltonian_uu",
            "cost_grad",
            "cost_hess",
        )
    }

    for _ in range(probes):
        x = x0 + radius * rng.standard_normal(n)
        u = radius * rng.standard_normal(m)
        lam = lam0 + radius * rng.standard_normal(n)

        def grad_x_h(xx: np.ndarray, uu: np.ndarray) -> np.ndarray:
            return np.asarray(p.dynamics_jac_x(xx, uu), dtype=float).T @ lam

        def grad_u_h(xx: np.ndarray, uu: np.ndarray) -> np.ndarray:
            return np.asarray(p.dynamics_jac_u(xx, uu), dtype=float).T @ lam

        gaps = {
            "dynamics_jac_x": _relative_gap(p.dynamics_jac_x(x, u), _central_difference(lambda z: p.dynamics(z, u), x)),
            "dynamics_jac_u": _relative_gap(p.dynamics_jac_u(x, u), _central_difference(lambda z: p.dynamics(x, z), u)),
            "hamiltonian_xx": _relative_gap(p.hamiltonian_xx(x, u, lam), _central_difference(lambda z: grad_x_h(z, u), x)),
            "hamiltonian_xu": _relative_gap(p.hamiltonian_xu(x, u, lam), _central_difference(lambda z: grad_x_h(x, z), u)),
            "hamiltonian_uu": _relative_gap(p.hamiltonian_uu(x, u, lam), _central_difference(lambda z: grad_u_h(x, z), u)),
            "cost_grad": _relative_gap(p.cost_grad(x), _central_difference(lambda z: np.array([p.cost(z)]), x)),
            "cost_hess": _relative_gap(p.cost_hess(x), _central_difference(p.cost_grad, x)),
        }
        for name, gap in gaps.items():
            worst[name] = max(worst[name], gap)

    report = DerivativeReport(probes=probes, discrepancies=worst, tolerance=tolerance)
    for name in report.flagged:
        logger.warning(
            "Derivative callback disagrees with finite differences",
            extra={"problem": p.name, "callback": name, "discrepancy": worst[name]},
        )
    return report


def sample_exact(exact: ExactSolution, scheme: CollocationScheme, time_map: TimeMap) -> DiscreteSolution:
    t = np.asarray(time_map.to_physical(scheme.nodes), dtype=float)
    return DiscreteSolution(
        state=exact.state(t),
        control=exact.control(t[1:]),
        costate=exact.costate(t[1:]),
        costate0=exact.costate(t[:1])[0],
    )


def _sample_times(p: OcpProblem, samples: int) -> np.ndarray:
    return np.linspace(p.horizon[0], p.horizon[1], samples)


def dynamics_jacobian_bound(p: OcpProblem, exact: ExactSolution, *, samples: int = 200) -> float:
    """max over the horizon of ||grad_x f||_inf in reference time along the exact solution."""
    scale = time_map_for(p).scale
    t = _sample_times(p, samples)
    xs, us = exact.state(t), exact.control(t)
    return float(
        max(scale * np.abs(np.asarray(p.dynamics_jac_x(x, u))).sum(axis=1).max() for x, u in zip(xs, us))
    )


def coercivity_margin(p: OcpProblem, exact: ExactSolution, *, samples: int = 200) -> tuple[float, float]:
    """Smallest eigenvalue of the (x, u) Hamiltonian Hessian along the exact path and of the cost Hessian."""
    t = _sample_times(p, samples)
    xs, us, lams = exact.state(t), exact.control(t), exact.costate(t)
    hamiltonian_min = math.inf
    for x, u, lam in zip(xs, us, lams):
        h_xu = np.asarray(p.hamiltonian_xu(x, u, lam), dtype=float)
        hessian = np.block(
            [
                [np.asarray(p.hamiltonian_xx(x, u, lam), dtype=float), h_xu],
                [h_xu.T, np.asarray(p.hamiltonian_uu(x, u, lam), dtype=float)],
            ]
        )
        hamiltonian_min = min(hamiltonian_min, float(np.linalg.eigvalsh(hessian).min()))
    cost_min = float(np.linalg.eigvalsh(np.asarray(p.cost_hess(xs[-1]), dtype=float)).min())
    return hamiltonian_min, cost_min
