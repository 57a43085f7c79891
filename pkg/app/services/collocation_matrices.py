from __future__ import annotations

import logging
import math
from collections.abc import Iterable

import numpy as np

from app.models import CollocationMatrices, CollocationScheme, PropertyReport
from app.services.radau_basis import (
    basis_matrix,
    compute_lgr_scheme,
    differentiation_matrix,
    frozen_array,
    gauss_rule,
    lagrange_basis,
)
from app.utils.linalg import lu_inverse, row_euclidean_norm, row_sum_norm

logger = logging.getLogger(__name__)

_MIN_GAUSS_POINTS = 64
_BOUND_SLACK = 1e-9


def build_matrices(scheme: CollocationScheme) -> CollocationMatrices:
    full = differentiation_matrix(lagrange_basis(scheme.nodes))
    d = full[1:, :]
    d_tail = d[:, 1:]
    d_dagger = differentiation_matrix(lagrange_basis(scheme.collocation_nodes))
    # equals -(w_j / w_i) D_ji; rows of D† sum to zero, so D‡ 1 = -e_N / w_N
    d_ddagger = np.array(d_dagger)
    d_ddagger[-1, -1] -= 1.0 / scheme.weights[-1]
    return CollocationMatrices(
        D=frozen_array(d),
        D_tail=frozen_array(d_tail),
        D_dagger=frozen_array(d_dagger),
        D_ddagger=frozen_array(d_ddagger),
        scheme=scheme,
    )


def invert_tail(m: CollocationMatrices) -> np.ndarray:
    return lu_inverse(np.array(m.D_tail), label=f"D_tail (N={m.n_colloc})")


def invert_ddagger(m: CollocationMatrices) -> np.ndarray:
    return lu_inverse(np.array(m.D_ddagger), label=f"D_ddagger (N={m.n_colloc})")


def ddagger_inverse_analytic(scheme: CollocationScheme) -> np.ndarray:
    n = scheme.n_colloc
    w_last = scheme.weights[-1]
    tau = scheme.collocation_nodes
    inverse = np.empty((n, n))
    inverse[:, n - 1] = -w_last
    if n == 1:
        return inverse

    m_basis = lagrange_basis(tau[:-1])
    at_one = basis_matrix(m_basis, np.array([1.0]))[0]
    inverse[n - 1, : n - 1] = w_last * at_one

    # M_j has degree N-2; k Gauss points are exact up to degree 2k-1
    points = max(_MIN_GAUSS_POINTS, n // 2 + 1)
    x_gauss, w_gauss = gauss_rule(points)
    upper = tau[:-1]
    half = (upper - 1.0) / 2.0
    mid = (upper + 1.0) / 2.0
    samples = mid[:, None] + half[:, None] * x_gauss[None, :]
    values = basis_matrix(m_basis, samples.ravel()).reshape(n - 1, points, n - 1)
    integrals = half[:, None] * np.einsum("k,ikj->ij", w_gauss, values)
    inverse[: n - 1, : n - 1] = w_last * at_one[None, :] + integrals
    return inverse


def property_report(m: CollocationMatrices) -> PropertyReport:
    inv_sqrt_w = 1.0 / np.sqrt(m.scheme.weights)
    tail_inv = invert_tail(m)
    ddagger_inv = invert_ddagger(m)

    p3_rows = row_sum_norm(ddagger_inv)
    p4_rows = row_euclidean_norm(ddagger_inv * inv_sqrt_w[None, :])
    return PropertyReport(
        N=m.n_colloc,
        p1_norm=float(row_sum_norm(tail_inv).max()),
        p2_row_norm_max=float(row_euclidean_norm(tail_inv * inv_sqrt_w[None, :]).max()),
        p3_norm=float(p3_rows.max()),
        p4_row_norm_max=float(p4_rows.max()),
        p3_row=int(p3_rows.argmax()),
        p4_row=int(p4_rows.argmax()),
    )


def tail_inverse_identity(m: CollocationMatrices) -> np.ndarray:
    """D_{1:N}^{-1} D_0, which equals -1 because D annihilates constants."""
    return invert_tail(m) @ np.asarray(m.D[:, 0])


def scan_properties(n_values: Iterable[int]) -> list[PropertyReport]:
    return [property_report(build_matrices(compute_lgr_scheme(n))) for n in n_values]


def property_violations(reports: list[PropertyReport]) -> list[str]:
    sqrt2 = math.sqrt(2.0)
    violations: list[str] = []
    for report in reports:
        if abs(report.p1_norm - 2.0) > _BOUND_SLACK:
            violations.append(f"N={report.N}: p1_norm={report.p1_norm!r} differs from 2")
        if report.p2_row_norm_max > sqrt2 + _BOUND_SLACK:
            violations.append(f"N={report.N}: p2_row_norm_max={report.p2_row_norm_max!r} exceeds sqrt(2)")
        if report.p3_norm > 2.0 + _BOUND_SLACK:
            violations.append(f"N={report.N}: p3_norm={report.p3_norm!r} exceeds 2")
        if report.p4_row_norm_max > sqrt2 + _BOUND_SLACK:
            violations.append(f"N={report.N}: p4_row_norm_max={report.p4_row_norm_max!r} exceeds sqrt(2)")

    # N = 1 attains both bounds exactly, so the trend starts at N = 2
    ordered = sorted((report for report in reports if report.N >= 2), key=lambda item: item.N)
    for prev, curr in zip(ordered, ordered[1:]):
        if curr.p3_norm < prev.p3_norm - _BOUND_SLACK:
            violations.append(f"p3_norm decreases from N={prev.N} to N={curr.N}")
        if curr.p4_row_norm_max < prev.p4_row_norm_max - _BOUND_SLACK:
            violations.append(f"p4_row_norm_max decreases from N={prev.N} to N={curr.N}")

    for message in violations:
        logger.warning("Collocation property violation", extra={"detail": message})
    return violations
