from __future__ import annotations

from collections.abc import Callable

import numpy as np
from scipy.linalg import lu_solve

from app.errors import ConvergenceError, KktEvaluationError
from app.models import (
    CollocationMatrices,
    CollocationScheme,
    DiscreteSolution,
    KktJacobian,
    KktResidual,
    OcpProblem,
    PointwiseBlocks,
)
from app.services.ocp_model import is_reference
from app.services.radau_basis import interpolate, lagrange_basis
from app.utils.linalg import checked_lu


def require_reference(p: OcpProblem) -> None:
    if not is_reference(p):
        raise ValueError(f"problem {p.name!r} is on {p.horizon}, map it to [-1, 1] first")


def _evaluate(name: str, fn: Callable[..., np.ndarray], *args: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    value = np.asarray(fn(*args), dtype=float)
    if value.shape != shape:
        raise KktEvaluationError(f"{name} returned shape {value.shape}, expected {shape}")
    if not np.all(np.isfinite(value)):
        raise KktEvaluationError(f"{name} returned non-finite values")
    return value


def _check_dims(p: OcpProblem, m: CollocationMatrices, s: DiscreteSolution) -> tuple[int, int, int]:
    n, k, N = p.state_dim, p.control_dim, m.n_colloc
    expected = {
        "state": ((N + 1, n), s.state.shape),
        "control": ((N, k), s.control.shape),
        "costate": ((N, n), s.costate.shape),
        "costate0": ((n,), s.costate0.shape),
    }
    for name, (want, got) in expected.items():
        if want != got:
            raise KktEvaluationError(f"{name} has shape {got}, expected {want}")
    arrays = (s.state, s.control, s.costate, s.costate0)
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise KktEvaluationError("solution contains non-finite values")
    return n, k, N


def unknown_count(n: int, m: int, N: int) -> int:
    return 2 * n * N + 2 * n + m * N


def pack_solution(s: DiscreteSolution) -> np.ndarray:
    return np.concatenate([s.state.ravel(), s.control.ravel(), s.costate0, s.costate.ravel()])


def unpack_solution(z: np.ndarray, *, n: int, m: int, N: int) -> DiscreteSolution:
    z = np.asarray(z, dtype=float)
    if z.shape != (unknown_count(n, m, N),):
        raise ValueError(f"expected a vector of length {unknown_count(n, m, N)}, got shape {z.shape}")
    iu = (N + 1) * n
    il0 = iu + N * m
    il = il0 + n
    return DiscreteSolution(
        state=z[:iu].reshape(N + 1, n).copy(),
        control=z[iu:il0].reshape(N, m).copy(),
        costate0=z[il0:il].copy(),
        costate=z[il:].reshape(N, n).copy(),
    )


def pointwise_blocks(p: OcpProblem, s: DiscreteSolution, n: int, k: int, N: int) -> PointwiseBlocks:
    A = np.empty((N, n, n))
    B = np.empty((N, n, k))
    Q = np.empty((N, n, n))
    S = np.empty((N, n, k))
    R = np.empty((N, k, k))
    for i in range(N):
        x, u, lam = s.state[i + 1], s.control[i], s.costate[i]
        A[i] = _evaluate("dynamics_jac_x", p.dynamics_jac_x, x, u, shape=(n, n))
        B[i] = _evaluate("dynamics_jac_u", p.dynamics_jac_u, x, u, shape=(n, k))
        Q[i] = _evaluate("hamiltonian_xx", p.hamiltonian_xx, x, u, lam, shape=(n, n))
        S[i] = _evaluate("hamiltonian_xu", p.hamiltonian_xu, x, u, lam, shape=(n, k))
        R[i] = _evaluate("hamiltonian_uu", p.hamiltonian_uu, x, u, lam, shape=(k, k))
    T = _evaluate("cost_hess", p.cost_hess, s.state[-1], shape=(n, n))
    return PointwiseBlocks(A=A, B=B, Q=Q, S=S, R=R, T=T)


def residual(p: OcpProblem, m: CollocationMatrices, s: DiscreteSolution) -> KktResidual:
    require_reference(p)
    n, k, N = _check_dims(p, m, s)
    weights = m.scheme.weights

    f = np.empty((N, n))
    grad_x_h = np.empty((N, n))
    grad_u_h = np.empty((N, k))
    for i in range(N):
        x, u, lam = s.state[i + 1], s.control[i], s.costate[i]
        f[i] = _evaluate("dynamics", p.dynamics, x, u, shape=(n,))
        grad_x_h[i] = _evaluate("dynamics_jac_x", p.dynamics_jac_x, x, u, shape=(n, n)).T @ lam
        grad_u_h[i] = _evaluate("dynamics_jac_u", p.dynamics_jac_u, x, u, shape=(n, k)).T @ lam
    cost_grad = _evaluate("cost_grad", p.cost_grad, s.state[-1], shape=(n,))

    adjoint = m.D_ddagger @ s.costate + grad_x_h
    return KktResidual(
        t1=m.D @ s.state - f,
        t2=s.state[0] - np.asarray(p.x0, dtype=float),
        t3=s.costate0 - cost_grad - weights @ grad_x_h,
        t4=adjoint[:-1],
        t5=adjoint[-1] + cost_grad / weights[-1],
        t6=grad_u_h,
    )


def jacobian(p: OcpProblem, m: CollocationMatrices, s: DiscreteSolution) -> KktJacobian:
    require_reference(p)
    n, k, N = _check_dims(p, m, s)
    blocks = pointwise_blocks(p, s, n, k, N)
    A, B, Q, S, R, T = blocks.A, blocks.B, blocks.Q, blocks.S, blocks.R, blocks.T
    weights = m.scheme.weights
    eye = np.eye(n)

    size = unknown_count(n, k, N)
    iu = (N + 1) * n
    il0 = iu + N * k
    il = il0 + n
    r2 = N * n
    r3 = r2 + n
    r4 = r3 + n
    r6 = r4 + N * n

    def x_cols(i: int) -> slice:
        return slice(i * n, (i + 1) * n)

    def u_cols(i: int) -> slice:
        return slice(iu + i * k, iu + (i + 1) * k)

    def lam_cols(i: int) -> slice:
        return slice(il + i * n, il + (i + 1) * n)

    J = np.zeros((size, size))
    J[:r2, :iu] = np.kron(m.D, eye)
    J[r2:r3, x_cols(0)] = eye
    J[r3:r4, il0:il] = eye
    J[r3:r4, x_cols(N)] -= T
    J[r4:r6, il:] = np.kron(m.D_ddagger, eye)

    for i in range(N):
        w = weights[i]
        dyn_rows = slice(i * n, (i + 1) * n)
        adj_rows = slice(r4 + i * n, r4 + (i + 1) * n)
        ctl_rows = slice(r6 + i * k, r6 + (i + 1) * k)

        J[dyn_rows, x_cols(i + 1)] -= A[i]
        J[dyn_rows, u_cols(i)] -= B[i]

        J[r3:r4, x_cols(i + 1)] -= w * Q[i]
        J[r3:r4, u_cols(i)] -= w * S[i]
        J[r3:r4, lam_cols(i)] -= w * A[i].T

        J[adj_rows, x_cols(i + 1)] += Q[i]
        J[adj_rows, u_cols(i)] += S[i]
        J[adj_rows, lam_cols(i)] += A[i].T

        J[ctl_rows, x_cols(i + 1)] = S[i].T
        J[ctl_rows, u_cols(i)] = R[i]
        J[ctl_rows, lam_cols(i)] = B[i].T

    J[r4 + (N - 1) * n : r6, x_cols(N)] += T / weights[-1]
    return KktJacobian(matrix=J, blocks=blocks, D=m.D, D_ddagger=m.D_ddagger)


def transform_multipliers(raw: np.ndarray, scheme: CollocationScheme) -> np.ndarray:
    """KKT multipliers lambda_i to costate estimates Lambda_i = lambda_i / omega_i."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape[0] != scheme.n_colloc:
        raise ValueError(f"expected {scheme.n_colloc} multipliers, got {raw.shape[0]}")
    return raw / scheme.weights.reshape((-1,) + (1,) * (raw.ndim - 1))


def untransform_multipliers(costate: np.ndarray, scheme: CollocationScheme) -> np.ndarray:
    costate = np.asarray(costate, dtype=float)
    if costate.shape[0] != scheme.n_colloc:
        raise ValueError(f"expected {scheme.n_colloc} costate values, got {costate.shape[0]}")
    return costate * scheme.weights.reshape((-1,) + (1,) * (costate.ndim - 1))


def costate_at_initial_time(s: DiscreteSolution, scheme: CollocationScheme) -> np.ndarray:
    basis = lagrange_basis(scheme.collocation_nodes)
    return np.atleast_1d(interpolate(basis, s.costate, -1.0))


def extrapolate_control(s: DiscreteSolution, scheme: CollocationScheme) -> np.ndarray:
    if s.control_dim == 0:
        return np.zeros(0)
    basis = lagrange_basis(scheme.collocation_nodes)
    return np.atleast_1d(interpolate(basis, s.control, -1.0))


def control_at_initial_time(
    s: DiscreteSolution,
    p: OcpProblem,
    scheme: CollocationScheme,
    *,
    max_iters: int = 20,
    tol: float = 1e-12,
) -> np.ndarray:
    """Solve grad_u H(X_0, u, lambda(-1)) = 0 by Newton's method from U_1."""
    require_reference(p)
    n, k = p.state_dim, p.control_dim
    if k == 0:
        return np.zeros(0)
    x = s.state[0]
    lam = costate_at_initial_time(s, scheme)
    u = np.array(s.control[0], dtype=float)
    threshold = tol * max(1.0, float(np.linalg.norm(lam)))

    def gradient(uu: np.ndarray) -> np.ndarray:
        return _evaluate("dynamics_jac_u", p.dynamics_jac_u, x, uu, shape=(n, k)).T @ lam

    g = gradient(u)
    for _ in range(max_iters):
        if np.linalg.norm(g) <= threshold:
            return u
        hessian = _evaluate("hamiltonian_uu", p.hamiltonian_uu, x, u, lam, shape=(k, k))
        u = u - lu_solve(checked_lu(hessian, label="hamiltonian_uu at tau=-1"), g)
        g = gradient(u)
    if np.linalg.norm(g) <= threshold:
        return u
    raise ConvergenceError(
        f"minimum-principle control at tau=-1 did not converge in {max_iters} iterations "
        f"(|grad_u H|={float(np.linalg.norm(g)):.3e})"
    )


def omega_norms(s: DiscreteSolution, scheme: CollocationScheme) -> tuple[float, float]:
    weights = scheme.weights
    x_sq = float(np.sum(s.state[-1] ** 2) + weights @ np.sum(s.state[1:] ** 2, axis=1))
    u_sq = float(weights @ np.sum(s.control**2, axis=1)) if s.control.size else 0.0
    return float(np.sqrt(x_sq)), float(np.sqrt(u_sq))
