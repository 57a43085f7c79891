from __future__ import annotations

import logging

import numpy as np

from app.models import CollocationScheme, LagrangeBasis

logger = logging.getLogger(__name__)

_NEWTON_MAX_ITERS = 100
_NEWTON_TOL = 1e-14


def frozen_array(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return values


def _legendre_pair(x: np.ndarray, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (P_{degree-1}(x), P_degree(x)) by the three-term recurrence."""
    p_prev = np.ones_like(x)
    p_curr = x.copy()
    for k in range(1, degree):
        p_prev, p_curr = p_curr, ((2 * k + 1) * x * p_curr - k * p_prev) / (k + 1)
    return p_prev, p_curr


def standard_lgr(n_colloc: int) -> tuple[np.ndarray, np.ndarray]:
    """Left Radau rule on [-1, 1): roots of P_{N-1} + P_N, including -1."""
    if n_colloc == 1:
        return np.array([-1.0]), np.array([2.0])

    n = n_colloc
    # Chebyshev-Gauss-Radau starting points
    x = -np.cos(2.0 * np.pi * np.arange(n) / (2.0 * n - 1.0))
    x[0] = -1.0
    interior = x[1:]
    for _ in range(_NEWTON_MAX_ITERS):
        p_prev, p_n = _legendre_pair(interior, n)
        step = ((1.0 - interior) / n) * (p_prev + p_n) / (p_prev - p_n)
        interior = interior - step
        if np.max(np.abs(step)) <= _NEWTON_TOL:
            break
    else:
        logger.warning("Radau node iteration hit the iteration cap", extra={"n_colloc": n})
    x[1:] = interior

    p_prev, _ = _legendre_pair(interior, n)
    weights = np.empty(n)
    weights[0] = 2.0 / n**2
    weights[1:] = (1.0 - interior) / (n * p_prev) ** 2
    return x, weights


def compute_lgr_scheme(n_colloc: int) -> CollocationScheme:
    if isinstance(n_colloc, bool) or int(n_colloc) != n_colloc or n_colloc < 1:
        raise ValueError(f"number of collocation points must be a positive integer, got {n_colloc!r}")
    n_colloc = int(n_colloc)

    left_nodes, left_weights = standard_lgr(n_colloc)
    colloc = -left_nodes[::-1]
    colloc[-1] = 1.0
    weights = left_weights[::-1]
    nodes = np.concatenate(([-1.0], colloc))
    return CollocationScheme(n_colloc=n_colloc, nodes=frozen_array(nodes), weights=frozen_array(weights))


def lagrange_basis(nodes: np.ndarray) -> LagrangeBasis:
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size == 0:
        raise ValueError("support nodes must be a non-empty vector")
    span = nodes.max() - nodes.min()
    # rescale differences so the products stay O(n) for nodes spread over [-1, 1]
    factor = 4.0 / span if span > 0 else 1.0
    diff = factor * (nodes[:, None] - nodes[None, :])
    np.fill_diagonal(diff, 1.0)
    weights = 1.0 / np.prod(diff, axis=1)
    return LagrangeBasis(support_nodes=frozen_array(nodes), barycentric_weights=frozen_array(weights))


def basis_matrix(basis: LagrangeBasis, points: np.ndarray) -> np.ndarray:
    """Values L_j(points[k]) as a (len(points), n) matrix, barycentric second form."""
    points = np.atleast_1d(np.asarray(points, dtype=float))
    nodes = basis.support_nodes
    diff = points[:, None] - nodes[None, :]
    exact = diff == 0.0
    hit_rows = exact.any(axis=1)
    values = exact.astype(float)
    free = ~hit_rows
    terms = basis.barycentric_weights[None, :] / diff[free]
    values[free] = terms / terms.sum(axis=1, keepdims=True)
    return values


def interpolate(basis: LagrangeBasis, values: np.ndarray, t: float | np.ndarray) -> float | np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[0] != basis.size:
        raise ValueError(f"expected {basis.size} values, got {values.shape[0]}")
    scalar_point = np.ndim(t) == 0
    result = basis_matrix(basis, np.atleast_1d(t)) @ values
    if scalar_point:
        result = result[0]
        return float(result) if np.ndim(result) == 0 else result
    return result


def differentiation_matrix(basis: LagrangeBasis) -> np.ndarray:
    """D[i, j] = L_j'(x_i) for the basis nodes x_i."""
    nodes = basis.support_nodes
    weights = basis.barycentric_weights
    n = basis.size
    if n == 1:
        return np.zeros((1, 1))
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    matrix = (weights[None, :] / weights[:, None]) / diff
    np.fill_diagonal(matrix, 0.0)
    np.fill_diagonal(matrix, -matrix.sum(axis=1))
    return matrix


def quadrature(scheme: CollocationScheme, samples: np.ndarray) -> float | np.ndarray:
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != scheme.n_colloc:
        raise ValueError(f"expected {scheme.n_colloc} samples, got {samples.shape[0]}")
    result = scheme.weights @ samples
    return float(result) if np.ndim(result) == 0 else result


def gauss_rule(points: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(points)
