from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import legendre
from scipy.special import roots_jacobi

from app.services.radau_basis import (
    basis_matrix,
    compute_lgr_scheme,
    differentiation_matrix,
    interpolate,
    lagrange_basis,
    quadrature,
    standard_lgr,
)


def test_single_point_scheme() -> None:
    scheme = compute_lgr_scheme(1)

    assert scheme.nodes.tolist() == [-1.0, 1.0]
    assert scheme.weights.tolist() == [2.0]


def test_two_point_scheme() -> None:
    scheme = compute_lgr_scheme(2)

    assert np.allclose(scheme.nodes, [-1.0, -1.0 / 3.0, 1.0], atol=1e-15)
    assert np.allclose(scheme.weights, [1.5, 0.5], atol=1e-15)


@pytest.mark.parametrize("n_colloc", [2, 3, 7, 20, 41])
def test_left_rule_interior_matches_jacobi_roots(n_colloc: int) -> None:
    nodes, _ = standard_lgr(n_colloc)
    expected, _ = roots_jacobi(n_colloc - 1, 0.0, 1.0)

    assert nodes[0] == -1.0
    assert np.allclose(nodes[1:], np.sort(expected), atol=1e-13)


@pytest.mark.parametrize("n_colloc", [1, 2, 5, 16, 63])
def test_scheme_is_flipped_left_rule(n_colloc: int) -> None:
    left_nodes, left_weights = standard_lgr(n_colloc)
    scheme = compute_lgr_scheme(n_colloc)

    assert scheme.nodes[0] == -1.0
    assert scheme.collocation_nodes[-1] == 1.0
    assert np.allclose(scheme.collocation_nodes, -left_nodes[::-1], atol=1e-15)
    assert np.array_equal(scheme.weights, left_weights[::-1])
    assert np.all(np.diff(scheme.nodes) > 0)


def test_weights_positive_and_sum_to_two() -> None:
    for n_colloc in range(1, 151):
        weights = compute_lgr_scheme(n_colloc).weights
        assert np.all(weights > 0)
        assert abs(weights.sum() - 2.0) < 1e-13


def test_quadrature_degree_is_sharp() -> None:
    for n_colloc in range(1, 51):
        scheme = compute_lgr_scheme(n_colloc)
        tau = scheme.collocation_nodes
        for k in range(2 * n_colloc - 1):
            exact = (1.0 - (-1.0) ** (k + 1)) / (k + 1)
            assert abs(quadrature(scheme, tau**k) - exact) < 1e-12

    misses = []
    for n_colloc in range(1, 6):
        scheme = compute_lgr_scheme(n_colloc)
        k = 2 * n_colloc - 1
        exact = (1.0 - (-1.0) ** (k + 1)) / (k + 1)
        misses.append(abs(quadrature(scheme, scheme.collocation_nodes**k) - exact))
    assert max(misses) > 1e-4


@pytest.mark.parametrize("n_colloc", [2, 8, 32, 128])
def test_differentiation_is_exact_for_degree_n(n_colloc: int) -> None:
    scheme = compute_lgr_scheme(n_colloc)
    d = differentiation_matrix(lagrange_basis(scheme.nodes))[1:, :]
    rng = np.random.default_rng(n_colloc)

    for _ in range(50):
        coefs = rng.standard_normal(n_colloc + 1)
        values = legendre.legval(scheme.nodes, coefs)
        expected = legendre.legval(scheme.collocation_nodes, legendre.legder(coefs))
        scale = max(1.0, float(np.abs(expected).max()))
        assert np.abs(d @ values - expected).max() / scale < 1e-9


def test_differentiation_annihilates_constants() -> None:
    matrix = differentiation_matrix(lagrange_basis(compute_lgr_scheme(30).nodes))

    assert np.abs(matrix @ np.ones(31)).max() < 1e-10


def test_single_node_differentiation() -> None:
    assert differentiation_matrix(lagrange_basis(np.array([0.3]))).tolist() == [[0.0]]


@settings(max_examples=50, deadline=None)
@given(
    n_colloc=st.integers(min_value=1, max_value=60),
    point=st.floats(min_value=-1.0, max_value=1.0, allow_nan=False),
)
def test_basis_is_partition_of_unity(n_colloc: int, point: float) -> None:
    basis = lagrange_basis(compute_lgr_scheme(n_colloc).nodes)

    assert abs(basis_matrix(basis, np.array([point])).sum() - 1.0) < 1e-12


def test_basis_is_exact_at_nodes() -> None:
    nodes = compute_lgr_scheme(6).nodes
    values = basis_matrix(lagrange_basis(nodes), nodes)

    assert np.array_equal(values, np.eye(7))


@settings(max_examples=30, deadline=None)
@given(
    coefs=st.lists(st.floats(min_value=-5, max_value=5, allow_nan=False), min_size=1, max_size=12),
    point=st.floats(min_value=-1.0, max_value=1.0, allow_nan=False),
)
def test_interpolation_reproduces_polynomials(coefs: list[float], point: float) -> None:
    n_colloc = len(coefs)
    basis = lagrange_basis(compute_lgr_scheme(n_colloc).nodes)
    samples = np.polynomial.polynomial.polyval(basis.support_nodes, coefs)

    value = interpolate(basis, samples, point)

    assert isinstance(value, float)
    assert abs(value - np.polynomial.polynomial.polyval(point, coefs)) < 1e-9 * max(1.0, sum(map(abs, coefs)))


def test_interpolate_vector_values() -> None:
    basis = lagrange_basis(compute_lgr_scheme(3).nodes)
    samples = np.column_stack([np.ones(4), basis.support_nodes])

    result = interpolate(basis, samples, 0.25)

    assert result.shape == (2,)
    assert np.allclose(result, [1.0, 0.25], atol=1e-14)


def test_interpolate_rejects_wrong_length() -> None:
    basis = lagrange_basis(compute_lgr_scheme(3).nodes)

    with pytest.raises(ValueError):
        interpolate(basis, np.ones(3), 0.0)


@pytest.mark.parametrize("bad", [0, -2, 2.5, True])
def test_invalid_collocation_count(bad: object) -> None:
    with pytest.raises(ValueError):
        compute_lgr_scheme(bad)  # type: ignore[arg-type]


def test_scheme_arrays_are_read_only() -> None:
    scheme = compute_lgr_scheme(4)

    with pytest.raises(ValueError):
        scheme.nodes[0] = 0.0


@pytest.mark.filterwarnings("error")
def test_basis_matrix_at_nodes_is_warning_free() -> None:
    nodes = compute_lgr_scheme(9).nodes
    points = np.concatenate((nodes[::2], [0.123]))

    values = basis_matrix(lagrange_basis(nodes), points)

    assert np.array_equal(values[:-1], np.eye(10)[::2])
    assert abs(values[-1].sum() - 1.0) < 1e-13
