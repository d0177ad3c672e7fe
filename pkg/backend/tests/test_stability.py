# Linear stability: mode matrices, eigenvalue routines, verdicts and the full-Jacobian oracle
import math

import numpy as np
import pytest

from app.core.errors import BranchNotRealizableError
from app.models.kernel import attractive_zero
from app.models.rings import (STATIONARY, ReducedParams, RingSolution, approx_radius, rotating_ring_near,
                              stationary_radius, traveling_ring)
from app.models.stability import (OBSERVATION_HORIZON, STABLE, UNSTABLE, eig_charpoly, eig_small,
                                  expected_jacobian_neutral, expected_neutral, growth_time, jacobian_matrix,
                                  jacobian_spectrum, jacobian_verdict, match_spectra, matrix_stationary,
                                  mode_matrix, nearest_neighbor_eigenvalues, observable_verdict, reduced_modes,
                                  union_spectrum, verdict)


def _scale(eigs):
    return max(1.0e-300, float(np.max(np.abs(eigs))))


def test_eig_small_agrees_with_characteristic_polynomial():
    rng = np.random.default_rng(7)
    for n in (2, 3, 4):
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        reference = np.linalg.eigvals(A)
        assert match_spectra(eig_small(A), reference) < 1e-10
        assert match_spectra(eig_charpoly(A), reference) < 1e-8


def test_eig_small_rejects_large_matrices():
    with pytest.raises(ValueError):
        eig_small(np.eye(5))


def test_expected_neutral_counts():
    assert expected_neutral(0, 5) == 1
    assert expected_neutral(1, 5) == 1
    assert expected_neutral(4, 5) == 1
    assert expected_neutral(2, 5) == 0
    # N = 2: mode 1 carries both translations
    assert expected_neutral(1, 2) == 2


def test_reduced_modes():
    assert reduced_modes(2) == [0, 1]
    assert reduced_modes(3) == [0, 1, 2]
    assert reduced_modes(8) == [0, 1, 2, 3, 4, 5]


@pytest.mark.parametrize("N", [3, 4, 5, 7, 8])
@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_nearest_neighbor_truncation_is_exact_at_the_binding_distance(N, m, kernel):
    d_c = attractive_zero(kernel, 1)
    ring = RingSolution(N=N, r0=approx_radius(N, d_c), kind=STATIONARY, branch=1)
    eigs = eig_small(matrix_stationary(m, ring, kernel, truncated=True).entries)
    expected = nearest_neighbor_eigenvalues(m, N, d_c, kernel)
    assert match_spectra(eigs, expected) < 1e-12 * _scale(expected) + 1e-18


@pytest.mark.parametrize("N", range(6, 13))
def test_nearest_neighbor_formula_approximates_the_full_sum(N, kernel):
    """Longer-range pairs shift the nonzero eigenvalue by 13-30% on this kernel; the sign never changes"""
    d_c = attractive_zero(kernel, 1)
    ring = RingSolution(N=N, r0=approx_radius(N, d_c), kind=STATIONARY, branch=1)
    for m in reduced_modes(N):
        eigs = eig_small(matrix_stationary(m, ring, kernel).entries)
        full = eigs[np.argmax(np.abs(eigs))].real
        nearest = nearest_neighbor_eigenvalues(m, N, d_c, kernel)[1]
        assert np.sign(full) == np.sign(nearest)
        assert abs(full - nearest) < 0.35 * abs(nearest)


@pytest.mark.parametrize("N,branch", [(3, 1), (4, 1), (5, 2), (7, 1)])
def test_stationary_modes_match_full_jacobian(N, branch, kernel, below):
    ring = stationary_radius(N, branch, kernel)
    modes = union_spectrum(ring, below, kernel)
    full = jacobian_spectrum(ring, below, kernel)
    assert match_spectra(modes, full) < 1e-8 * _scale(full)


@pytest.mark.parametrize("N,branch", [(3, 2), (4, 1), (5, 2)])
def test_rotating_modes_match_full_jacobian(N, branch, kernel, above):
    ring = rotating_ring_near(N, branch, above, kernel)
    modes = union_spectrum(ring, above, kernel)
    full = jacobian_spectrum(ring, above, kernel)
    assert match_spectra(modes, full) < 1e-6 * _scale(full)


def test_traveling_modes_match_full_jacobian_at_onset(kernel):
    params = ReducedParams.from_tau(1.0 / 0.3)
    ring = traveling_ring(5, 2, params, kernel)
    assert ring.v0 == 0
    modes = union_spectrum(ring, params, kernel)
    full = jacobian_spectrum(ring, params, kernel)
    # translations pair with their amplitudes in Jordan blocks at onset
    assert match_spectra(modes, full) < 1e-6 * _scale(full)


@pytest.mark.parametrize("kind", ["stationary", "traveling", "rotating"])
def test_analytic_jacobian_matches_finite_differences(kind, kernel, below, above):
    if kind == "stationary":
        ring, params = stationary_radius(4, 1, kernel), below
    elif kind == "traveling":
        ring, params = traveling_ring(4, 1, above, kernel, angle=0.3), above
    else:
        ring, params = rotating_ring_near(3, 2, above, kernel), above
    analytic = jacobian_matrix(ring, params, kernel, method="analytic")
    fd = jacobian_matrix(ring, params, kernel, method="fd")
    assert np.max(np.abs(analytic - fd)) < 1e-6 * np.max(np.abs(analytic))


def test_stationary_table_pattern(kernel, below):
    """First binding radius: unstable exactly at N = 4 and 7; second radius: only N = 5, 6, and too slowly to see"""
    first = {N: verdict(stationary_radius(N, 1, kernel), below, kernel) for N in range(2, 9)}
    second = {N: verdict(stationary_radius(N, 2, kernel), below, kernel) for N in range(2, 9)}
    assert {N for N, r in first.items() if r.verdict == UNSTABLE} == {4, 7}
    assert {N for N, r in second.items() if r.verdict == UNSTABLE} == {5, 6}
    for N in (5, 6):
        rate = second[N].prefactor * second[N].margin
        assert 0 < rate < 1e-4
        assert growth_time(rate) > OBSERVATION_HORIZON
        assert observable_verdict(rate) == STABLE
    for N in (4, 7):
        assert observable_verdict(first[N].prefactor * first[N].margin) == UNSTABLE


def test_growth_time_and_observable_verdict():
    assert growth_time(1e-3) == pytest.approx(math.log(10.0) * 1e3)
    assert math.isnan(growth_time(0.0))
    assert math.isnan(growth_time(-1e-3))
    assert observable_verdict(-1e-3) == STABLE
    assert observable_verdict(0.0) == STABLE
    assert observable_verdict(1e-3) == UNSTABLE
    # tenfold growth takes about 7e4 here
    assert observable_verdict(3.1e-5) == STABLE
    assert observable_verdict(3.1e-5, horizon=1e5) == UNSTABLE


@pytest.mark.parametrize("N", range(2, 9))
def test_reduced_and_full_mode_ranges_agree(N, kernel, below):
    ring = stationary_radius(N, 1, kernel)
    assert verdict(ring, below, kernel).verdict == verdict(ring, below, kernel, full_range=True).verdict


def test_symmetry_modes_are_neutral(kernel, below):
    ring = stationary_radius(5, 2, kernel)
    report = verdict(ring, below, kernel)
    required = sum(expected_neutral(s.m, ring.N) for s in report.per_mode)
    assert report.neutral_count >= required
    assert not report.warnings
    for s in report.per_mode:
        assert len(s.eigenvalues) == 2


def test_traveling_report_carries_full_jacobian(kernel, above):
    ring = traveling_ring(6, 2, above, kernel)
    report = verdict(ring, above, kernel)
    assert report.full_jacobian is not None
    assert report.full_jacobian.neutral_count >= expected_jacobian_neutral(ring)
    data = report.to_dict()
    assert data["full_jacobian"]["verdict"] in (STABLE, UNSTABLE)
    assert all(len(s["eigenvalues"]) == 4 for s in data["per_mode"])


@pytest.mark.parametrize("N", range(2, 9))
@pytest.mark.parametrize("branch", [1, 2])
def test_traveling_mode_and_jacobian_verdicts_agree(N, branch, kernel, above):
    try:
        ring = traveling_ring(N, branch, above, kernel)
    except BranchNotRealizableError:
        pytest.skip(f"no branch {branch} ring for N={N}")
    report = verdict(ring, above, kernel)
    assert report.full_jacobian.verdict == report.verdict


def test_traveling_spectrum_does_not_depend_on_heading(kernel, above):
    east = traveling_ring(5, 2, above, kernel, angle=0.0)
    north = traveling_ring(5, 2, above, kernel, angle=np.pi / 2)
    for m in reduced_modes(5):
        a = eig_small(mode_matrix(m, east, above, kernel).entries)
        b = eig_small(mode_matrix(m, north, above, kernel).entries)
        assert match_spectra(a, b) < 1e-12 * _scale(a)
    assert jacobian_verdict(east, above, kernel).verdict == jacobian_verdict(north, above, kernel).verdict


def test_moving_rings_need_reduced_parameters(kernel, above):
    ring = traveling_ring(3, 1, above, kernel)
    with pytest.raises(ValueError):
        mode_matrix(1, ring, None, kernel)


def test_match_spectra_requires_equal_sizes():
    with pytest.raises(ValueError):
        match_spectra([0j, 1j], [0j])
    assert match_spectra([1.0, 2.0], [2.0, 1.0]) == 0.0
