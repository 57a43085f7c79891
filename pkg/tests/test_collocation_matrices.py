from __future__ import annotations

import math

import numpy as np
import pytest

from app.models import PropertyReport
from app.services.collocation_matrices import (
    build_matrices,
    ddagger_inverse_analytic,
    invert_ddagger,
    invert_tail,
    property_report,
    property_violations,
    scan_properties,
    tail_inverse_identity,
)
from app.services.radau_basis import compute_lgr_scheme

TABLE_N = [25, 50, 75, 100, 125, 150, 175, 200, 225, 250, 275, 300]
DDAGGER_INVERSE_NORM = [
    1.995376, 1.998844, 1.999486, 1.999711, 1.999815, 1.999871,
    1.999906, 1.999928, 1.999943, 1.999954, 1.999962, 1.999968,
]
WEIGHTED_ROW_NORM = [
    # N=25 computes to 1.412109; the commonly printed 1.412209 is a misprint
    1.412109, 1.413691, 1.413982, 1.414083, 1.414130, 1.414156,
    1.414171, 1.414181, 1.414188, 1.414193, 1.414196, 1.414199,
]


def _matrices(n_colloc: int):
    return build_matrices(compute_lgr_scheme(n_colloc))


@pytest.fixture(scope="module")
def table_reports() -> list[PropertyReport]:
    return scan_properties(TABLE_N)


def test_shapes() -> None:
    m = _matrices(5)

    assert m.D.shape == (5, 6)
    assert m.D_tail.shape == (5, 5)
    assert m.D_dagger.shape == (5, 5)
    assert m.D_ddagger.shape == (5, 5)


def test_single_point_matrices() -> None:
    m = _matrices(1)

    assert np.allclose(m.D, [[-0.5, 0.5]])
    assert np.allclose(m.D_ddagger, [[-0.5]])
    assert np.allclose(invert_ddagger(m), [[-2.0]])


def test_costate_matrix_differs_from_dagger_only_in_last_entry() -> None:
    for n_colloc in range(1, 151):
        m = _matrices(n_colloc)
        gap = np.array(m.D_ddagger) - m.D_dagger

        assert gap[-1, -1] == pytest.approx(-1.0 / m.scheme.weights[-1], rel=1e-12)
        gap[-1, -1] = 0.0
        assert not np.any(gap)


@pytest.mark.parametrize("n_colloc", [2, 5, 10, 20, 40])
def test_costate_matrix_matches_adjoint_formula(n_colloc: int) -> None:
    m = _matrices(n_colloc)
    weights = m.scheme.weights
    adjoint = -(weights[None, :] / weights[:, None]) * m.D_tail.T

    assert np.abs(m.D_ddagger - adjoint).max() < 1e-10 * np.abs(adjoint).max()


def test_costate_matrix_row_sums() -> None:
    for n_colloc in range(1, 151):
        m = _matrices(n_colloc)
        expected = np.zeros(n_colloc)
        expected[-1] = -1.0 / m.scheme.weights[-1]
        gap = np.abs(m.D_ddagger @ np.ones(n_colloc) - expected)

        assert gap.max() < 1e-11 * max(1.0, n_colloc**2 / 100.0)
        if n_colloc <= 20:
            assert gap.max() < 1e-11


@pytest.mark.parametrize("n_colloc", [1, 2, 9, 50])
def test_tail_inverse_maps_first_column_to_minus_one(n_colloc: int) -> None:
    assert np.allclose(tail_inverse_identity(_matrices(n_colloc)), -1.0, atol=1e-10)


def test_tail_inverse_norm_is_two() -> None:
    for n_colloc in range(1, 151):
        m = _matrices(n_colloc)
        report = property_report(m)
        assert abs(report.p1_norm - 2.0) < 1e-9
        assert report.p2_row_norm_max <= math.sqrt(2.0) + 1e-9

        last_row = invert_tail(m)[-1] / np.sqrt(m.scheme.weights)
        assert abs(np.linalg.norm(last_row) - math.sqrt(2.0)) < 1e-10


def test_analytic_ddagger_inverse_matches_lu() -> None:
    for n_colloc in range(1, 31):
        scheme = compute_lgr_scheme(n_colloc)
        analytic = ddagger_inverse_analytic(scheme)
        numeric = invert_ddagger(build_matrices(scheme))
        assert np.abs(analytic - numeric).max() < 1e-9
        assert np.allclose(analytic[:, -1], -scheme.weights[-1], atol=0.0)


def test_ddagger_inverse_last_column_is_constant() -> None:
    for n_colloc in range(1, 151):
        m = _matrices(n_colloc)
        column = invert_ddagger(m)[:, -1]
        assert np.abs(column + m.scheme.weights[-1]).max() < 1e-10


def test_table_of_ddagger_inverse_norms(table_reports: list[PropertyReport]) -> None:
    for report, expected in zip(table_reports, DDAGGER_INVERSE_NORM):
        assert abs(report.p3_norm - expected) < 1e-5


def test_table_of_weighted_row_norms(table_reports: list[PropertyReport]) -> None:
    for report, expected in zip(table_reports, WEIGHTED_ROW_NORM):
        assert abs(report.p4_row_norm_max - expected) < 1e-5


def test_table_scan_has_no_violations(table_reports: list[PropertyReport]) -> None:
    assert property_violations(table_reports) == []


def test_small_n_bounds() -> None:
    first, second = scan_properties([1, 2])

    assert first.p3_norm == pytest.approx(2.0, abs=1e-14)
    assert first.p4_row_norm_max == pytest.approx(math.sqrt(2.0), abs=1e-14)
    assert second.p3_norm == pytest.approx(4.0 / 3.0, abs=1e-12)
    assert property_violations(scan_properties(range(1, 20))) == []


def test_bounds_and_monotonicity_up_to_150() -> None:
    assert property_violations(scan_properties(range(1, 151))) == []


def test_violations_are_reported(caplog: pytest.LogCaptureFixture) -> None:
    good = PropertyReport(N=10, p1_norm=2.0, p2_row_norm_max=1.4, p3_norm=1.9, p4_row_norm_max=1.41)
    too_big = PropertyReport(N=20, p1_norm=2.0, p2_row_norm_max=1.4, p3_norm=2.5, p4_row_norm_max=1.41)
    shrinking = PropertyReport(N=30, p1_norm=2.0, p2_row_norm_max=1.4, p3_norm=1.8, p4_row_norm_max=1.40)

    violations = property_violations([good, too_big, shrinking])

    assert any("exceeds 2" in message for message in violations)
    assert any("p3_norm decreases from N=20 to N=30" in message for message in violations)
    assert any("p4_row_norm_max decreases" in message for message in violations)
    assert "Collocation property violation" in caplog.text
