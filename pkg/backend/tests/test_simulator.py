# Reduced-model integration: ring states, perturbations, measurements and empirical verdicts
import math

import numpy as np
import pytest

from app.core.errors import CoreViolationError, InsufficientSamplesError, ModeRangeError
from app.core.outputs import read_csv
from app.models.rings import rotating_ring_near, stationary_radius, traveling_ring
from app.models.stability import mode_matrix, verdict
from app.models.simulator import (COMPLETED, CORE_VIOLATION, FIRST, SECOND, STABLE, UNSTABLE, SpotEnsemble,
                                  SpotSimulator, Trajectory, decay_rate, default_model, load_trajectory,
                                  measure_ring, pair_sum, perturb, rhs_first, rhs_second, save_trajectory,
                                  shape_deviation)


def test_default_model(kernel, below, above):
    assert default_model(stationary_radius(3, 1, kernel), below) == FIRST
    assert default_model(traveling_ring(3, 1, above, kernel), above) == SECOND


def test_pair_sum_core_violation(kernel):
    p = np.array([0.0, 0.05, 0.5j])
    with pytest.raises(CoreViolationError) as info:
        pair_sum(p, kernel)
    assert {info.value.i, info.value.j} == {0, 1}
    clipped = pair_sum(p, kernel, clip=True)
    assert np.all(np.isfinite(clipped))


def test_pair_sum_is_antisymmetric_for_two_spots(kernel):
    S = pair_sum(np.array([0.0, 0.2 + 0.1j]), kernel)
    assert S[0] == pytest.approx(-S[1])


def test_first_order_model_refuses_above_bifurcation(kernel, above):
    ring = stationary_radius(3, 1, kernel)
    ensemble = SpotEnsemble.from_ring(ring, None, kernel, model=FIRST)
    with pytest.raises(ValueError):
        rhs_first(ensemble, above, kernel)


def test_ring_states_are_at_rest(kernel, below, above):
    ring = stationary_radius(4, 1, kernel)
    assert np.max(np.abs(rhs_first(SpotEnsemble.from_ring(ring, below, kernel), below, kernel))) < 1e-10

    moving = traveling_ring(4, 1, above, kernel)
    dp, dq = rhs_second(SpotEnsemble.from_ring(moving, above, kernel), above, kernel)
    assert np.max(np.abs(dp - moving.v0)) < 1e-12
    assert np.max(np.abs(dq)) < 1e-12


def test_stationary_ring_stays_put(kernel, below):
    ring = stationary_radius(3, 2, kernel)
    simulator = SpotSimulator(below, kernel)
    traj = simulator.integrate(SpotEnsemble.from_ring(ring, below, kernel), 500.0, n_samples=51)
    assert traj.termination == COMPLETED
    assert len(traj.t) == 51
    assert max(shape_deviation(p, ring) for p in traj.p) < 1e-9


def test_traveling_ring_translates_rigidly(kernel, above):
    ring = traveling_ring(3, 2, above, kernel, angle=0.4)
    simulator = SpotSimulator(above, kernel)
    traj = simulator.integrate(SpotEnsemble.from_ring(ring, above, kernel), 200.0, n_samples=201)
    measured = measure_ring(traj)
    assert abs(measured.v_est - ring.v0) < 1e-6 * abs(ring.v0)
    assert measured.r_mean == pytest.approx(ring.r0, rel=1e-8)
    assert abs(measured.omega_est) < 1e-9


def test_rotating_ring_rotates_at_omega0(kernel, above):
    ring = rotating_ring_near(3, 2, above, kernel)
    period = 2 * math.pi / ring.omega0
    simulator = SpotSimulator(above, kernel)
    traj = simulator.integrate(SpotEnsemble.from_ring(ring, above, kernel), period, n_samples=401)
    measured = measure_ring(traj)
    assert measured.omega_est == pytest.approx(ring.omega0, rel=1e-4)
    assert measured.r_mean == pytest.approx(ring.r0, rel=1e-6)
    assert measured.shape_error < 1e-6


def test_perturb_mode_range(kernel, below):
    ensemble = SpotEnsemble.from_ring(stationary_radius(4, 1, kernel), below, kernel)
    with pytest.raises(ModeRangeError):
        perturb(ensemble, 5, 1e-3)
    with pytest.raises(ModeRangeError):
        perturb(ensemble, -1, 1e-3)
    with pytest.raises(ValueError):
        perturb(ensemble, 2, 1e-3, which="amplitude")


def test_perturbation_size(kernel, below):
    ring = stationary_radius(5, 1, kernel)
    ensemble = SpotEnsemble.from_ring(ring, below, kernel)
    kicked = perturb(ensemble, 2, 1e-3)
    assert np.max(np.abs(kicked.p - ensemble.p)) == pytest.approx(1e-3 * ring.r0, rel=1e-9)
    # mode 0 with a real coefficient is a pure dilation
    dilated = perturb(ensemble, 0, 1e-3)
    assert np.allclose(np.abs(dilated.p), ring.r0 * (1 + 1e-3))


def test_core_violation_stops_integration(kernel, above):
    # head-on collision driven by the amplitudes
    ensemble = SpotEnsemble(SECOND, np.array([0.0, 0.125 + 0j]), np.array([1.0 + 0j, -1.0 + 0j]))
    traj = SpotSimulator(above, kernel).integrate(ensemble, 10.0, n_samples=11)
    assert traj.termination == CORE_VIOLATION
    assert traj.event["distance"] == pytest.approx(kernel.d_b, rel=1e-6)
    with pytest.raises(CoreViolationError):
        SpotSimulator(above, kernel).integrate(ensemble, 10.0, n_samples=11, strict=True)


def test_measure_ring_needs_samples():
    traj = Trajectory(FIRST, np.linspace(0, 1, 10), np.ones((10, 3), dtype=complex))
    with pytest.raises(InsufficientSamplesError):
        measure_ring(traj)


def test_trajectory_csv(tmp_path, kernel, above):
    ring = traveling_ring(3, 1, above, kernel)
    traj = SpotSimulator(above, kernel).integrate(SpotEnsemble.from_ring(ring, above, kernel), 10.0, n_samples=11)
    path = save_trajectory(traj, tmp_path / "traj.csv", {"N": 3}, "abc")
    frame, meta = read_csv(path)
    assert list(frame.columns[:3]) == ["t", "x_1", "y_1"]
    assert "xi_3" in frame.columns and "eta_3" in frame.columns
    assert meta["config"] == {"N": 3}
    assert meta["kernel_sha1"] == "abc"
    loaded = load_trajectory(path)
    assert loaded.model == SECOND
    assert np.array_equal(loaded.p, traj.p)
    assert np.array_equal(loaded.q, traj.q)


@pytest.mark.slow
def test_unstable_square_breaks_up(kernel, below):
    ring = stationary_radius(4, 1, kernel)
    result = SpotSimulator(below, kernel).empirical_verdict(ring, amplitude=1e-4, t_end=4e4)
    assert result.verdict == UNSTABLE


@pytest.mark.slow
def test_stable_triangle_relaxes(kernel, below):
    ring = stationary_radius(3, 1, kernel)
    simulator = SpotSimulator(below, kernel)
    result = simulator.empirical_verdict(ring, amplitude=1e-4, t_end=4e4)
    assert result.verdict == STABLE

    # for N = 3 the m = 1 deformation e^{2i theta} is the only shape mode that is not a translation
    ensemble = perturb(SpotEnsemble.from_ring(ring, below, kernel), 1, 1e-4)
    assert shape_deviation(ensemble.p, ring) > 1e-6 * ring.r0
    traj = simulator.integrate(ensemble, 4e3, n_samples=801)
    assert decay_rate(traj, ring) < 0


def _slowest_mode(ring, params, kernel, m):
    """Least negative non-neutral growth rate of mode m and its eigenvector (xi_+, xi_-)"""
    M = mode_matrix(m, ring, params, kernel)
    eigs, vecs = np.linalg.eigh(M.entries.real)
    active = [i for i in range(len(eigs)) if abs(eigs[i]) > 1e-6 * np.max(np.abs(eigs))]
    i = max(active, key=lambda k: eigs[k])
    return M.prefactor * eigs[i], vecs[:, i]


@pytest.mark.slow
@pytest.mark.parametrize("N,m", [(3, 1), (5, 2)])
def test_mode_decay_rate_matches_eigenvalue(N, m, kernel, below):
    ring = stationary_radius(N, 1, kernel)
    rate, vec = _slowest_mode(ring, below, kernel, m)
    assert rate < 0
    ensemble = perturb(SpotEnsemble.from_ring(ring, below, kernel), m, 1e-4, xi_plus=vec[0], xi_minus=vec[1])
    traj = SpotSimulator(below, kernel).integrate(ensemble, 10.0 / abs(rate), n_samples=1001)
    assert decay_rate(traj, ring) == pytest.approx(rate, rel=0.05)


@pytest.mark.slow
def test_rotating_triangle_settles_back_onto_the_ring(kernel, above):
    ring = rotating_ring_near(3, 2, above, kernel)
    report = verdict(ring, above, kernel)
    assert report.verdict == STABLE
    period = 2 * math.pi / abs(ring.omega0)
    simulator = SpotSimulator(above, kernel)

    # start 2% wide of the ring
    ensemble = perturb(SpotEnsemble.from_ring(ring, above, kernel), 0, 0.02)
    assert np.allclose(np.abs(ensemble.p), 1.02 * ring.r0)

    settle = max(5 * period, 4.0 / abs(report.margin))
    settled = simulator.integrate(ensemble, settle, n_samples=101).final()
    tail = measure_ring(simulator.integrate(settled, settle + 2 * period, n_samples=401))
    assert tail.r_mean == pytest.approx(ring.r0, rel=0.01)
    assert tail.omega_est == pytest.approx(ring.omega0, rel=0.01)
