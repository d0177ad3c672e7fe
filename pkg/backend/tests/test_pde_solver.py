# Pseudo-spectral solver: grid, spectral operators, ring initialization, spot detection, runs
import math

import numpy as np
import pytest

from app.core.errors import ClearanceError
from app.models.pde_solver import (BLOW_UP, STEADY, Field2D, Grid, PdeRunConfig, PseudoSpectralSolver,
                                   SpotTrack, apply_G, apply_Ginv, center_superposition, detect_spots,
                                   homogeneous_field, init_ring, kick_spot, read_snapshot, ring_centers, run,
                                   spectral_derivative, spot_speed, track_radius, tracks_to_frame,
                                   write_snapshot)
from app.models.profile import SpotProfile, solve_homogeneous
from app.services.pde_service import PdeService, homogeneous_decays

U_C = -0.27


@pytest.fixture
def bump():
    """Gaussian stand-in for a spot profile, supported on r < 0.3"""
    rho = np.linspace(0.0, 0.3, 61)
    u_s = 2.0 * np.exp(-(rho / 0.05) ** 2)
    return SpotProfile(rho=rho, u_s=u_s, w_s=u_s.copy(), u_c=U_C, R=0.3)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(100, 128)
    with pytest.raises(ValueError):
        Grid(4, 4)
    with pytest.raises(ValueError):
        Grid(32, 32, L=0.0)


def test_grid_geometry():
    grid = Grid(32, 64, 1.0)
    assert grid.dx == pytest.approx(2.0 / 32)
    assert grid.x[0] == -1.0 and grid.x[-1] < 1.0
    assert grid.k2().shape == (32, 33)
    assert grid.dealias_mask().shape == (32, 33)
    assert np.allclose(grid.wrap(np.array([1.5, -1.5, 0.25])), [-0.5, 0.5, 0.25])


def test_spectral_derivative():
    grid = Grid(128, 128, 1.0)
    X, Y = grid.mesh()
    f = np.sin(np.pi * X) * np.cos(2 * np.pi * Y)
    assert np.allclose(spectral_derivative(f, grid, axis=0), np.pi * np.cos(np.pi * X) * np.cos(2 * np.pi * Y),
                       atol=1e-10)
    assert np.allclose(spectral_derivative(f, grid, axis=1), -2 * np.pi * np.sin(np.pi * X) * np.sin(2 * np.pi * Y),
                       atol=1e-10)


def test_nonlocal_operator_inverse():
    grid = Grid(32, 32, 1.0)
    rng = np.random.default_rng(1)
    spectrum = np.fft.rfft2(rng.standard_normal((32, 32)))
    k2 = grid.k2()
    assert np.allclose(apply_G(apply_Ginv(spectrum, 9.64e-4, k2), 9.64e-4, k2), spectrum)
    # the zero mode is untouched
    assert apply_Ginv(spectrum, 9.64e-4, k2)[0, 0] == spectrum[0, 0]


def test_homogeneous_state_is_a_fixed_point(pde_params):
    grid = Grid(32, 32, 1.0)
    fld = homogeneous_field(grid, pde_params)
    u_c = solve_homogeneous(pde_params)
    solver = PseudoSpectralSolver(pde_params, grid, dt=0.05)
    out = solver.advance(fld, 20)
    assert out.t == pytest.approx(1.0)
    assert np.allclose(out.u, u_c, atol=1e-13)
    assert np.allclose(out.v, u_c, atol=1e-13)


def test_homogeneous_state_damps_noise(pde_params):
    assert homogeneous_decays(pde_params, Grid(32, 32, 1.0), t_end=10.0)


def test_solver_rejects_bad_step(pde_params):
    with pytest.raises(ValueError):
        PseudoSpectralSolver(pde_params, Grid(16, 16), dt=0.0)


def test_init_ring_and_detection(bump):
    grid = Grid(128, 128, 1.0)
    fld = init_ring(3, 0.3, bump, grid, phase=0.2)
    assert np.array_equal(fld.u, fld.v)
    track = detect_spots(fld, U_C)
    assert track.count == 3
    expected = ring_centers(3, 0.3, phase=0.2)
    for c in expected:
        assert min(math.hypot(x - c.real, y - c.imag) for x, y in track.centers) < 0.01
    assert track_radius(track, grid) == pytest.approx(0.3, abs=0.01)


def test_init_ring_clearance(bump):
    grid = Grid(128, 128, 1.0)
    with pytest.raises(ClearanceError):
        init_ring(3, 0.8, bump, grid)
    with pytest.raises(ValueError):
        init_ring(0, 0.1, bump, grid)


def test_detection_across_the_boundary(bump):
    grid = Grid(128, 128, 1.0)
    u = U_C + 2.0 * np.exp(-(np.hypot(grid.wrap(grid.mesh()[0] - 0.98), grid.mesh()[1]) / 0.05) ** 2)
    track = detect_spots(Field2D(grid, u, u.copy()), U_C)
    assert track.count == 1
    x, y = track.centers[0]
    assert abs(grid.wrap(np.array(x - 0.98))) < 0.01
    assert abs(y) < 0.01


def test_detection_of_a_flat_field():
    grid = Grid(16, 16, 1.0)
    u = np.full((16, 16), U_C)
    assert detect_spots(Field2D(grid, u, u.copy()), U_C).count == 0


def test_kick_moves_the_activator_only(bump):
    grid = Grid(128, 128, 1.0)
    fld = init_ring(1, 0.0, bump, grid)
    kicked = kick_spot(fld, bump, 0j, 0.1 + 0j)
    assert np.array_equal(kicked.v, fld.v)
    (x, y), = detect_spots(kicked, U_C).centers
    assert x == pytest.approx(0.1, abs=0.01)
    assert y == pytest.approx(0.0, abs=0.01)


def test_center_superposition(bump):
    assert center_superposition(4, 0.0, bump) == pytest.approx(U_C + 8.0)
    assert center_superposition(4, 0.35, bump) == pytest.approx(U_C)


def test_tracks_and_speed():
    grid = Grid(16, 16, 1.0)
    tracks = [SpotTrack(float(t), [(-0.95 + 0.01 * t, 0.0)]) for t in range(10)]
    assert spot_speed(tracks, grid) == pytest.approx(0.01)
    frame = tracks_to_frame([SpotTrack(0.0, [(0.1, 0.2), (0.3, 0.4)]), SpotTrack(1.0, [(0.1, 0.2)])])
    assert list(frame.columns) == ["t", "count", "x_1", "y_1", "x_2", "y_2"]
    assert math.isnan(frame.loc[1, "x_2"])
    assert math.isnan(spot_speed([SpotTrack(0.0, [])], grid))


def test_snapshot_file(tmp_path):
    grid = Grid(16, 32, 0.5)
    rng = np.random.default_rng(3)
    fld = Field2D(grid, rng.standard_normal((16, 32)), rng.standard_normal((16, 32)), 2.5)
    path = write_snapshot(fld, tmp_path / "snap.bin")
    assert path.stat().st_size == 32 + 2 * 16 * 32 * 8
    back = read_snapshot(path)
    assert back.grid == grid and back.t == 2.5
    assert np.array_equal(back.u, fld.u) and np.array_equal(back.v, fld.v)

    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError):
        read_snapshot(path)


def test_run_stops_on_steady_state(pde_params):
    config = PdeRunConfig(N=1, r0=0.0, nx=16, ny=16, t_end=10.0, record_every=1.0)
    initial = homogeneous_field(config.grid, pde_params)
    result = run(config, pde_params, None, initial=initial)
    assert result.termination == STEADY
    assert result.t_final == pytest.approx(1.0)
    assert result.summary()["final_count"] == 0


def test_run_reports_blow_up(pde_params):
    config = PdeRunConfig(N=1, r0=0.0, nx=16, ny=16, t_end=1.0)
    initial = homogeneous_field(config.grid, pde_params)
    initial.u[3, 3] = np.nan
    result = run(config, pde_params, None, initial=initial)
    assert result.termination == BLOW_UP
    assert result.events[0]["kind"] == BLOW_UP


@pytest.mark.slow
def test_single_spot_relaxes_in_place(pde_params):
    grid = Grid(128, 128, 1.0)
    fld = PdeService().relax_single_spot(pde_params, grid, t_end=20.0)
    track = detect_spots(fld, solve_homogeneous(pde_params))
    assert track.count == 1
    x, y = track.centers[0]
    assert math.hypot(x, y) < 2 * grid.dx


@pytest.mark.slow
def test_relaxed_spot_matches_radial_profile(pde_params, profile):
    grid = Grid(256, 256, 0.5)
    fld = PdeService().relax_single_spot(pde_params, grid, t_end=100.0)
    # the origin sits at index nx / 2; axis 0 is x
    i0 = grid.nx // 2
    x = grid.x[i0:]
    keep = x <= 0.4
    section = fld.u[i0:, i0][keep] - profile.u_c
    assert np.max(np.abs(section - profile.radial(x[keep]))) < 1e-3


@pytest.mark.slow
def test_drift_sets_in_above_the_bifurcation():
    onset = PdeService().drift_onset(delta=0.3)
    assert onset["speed_above"] > 5 * onset["speed_below"]
