# Ring solutions: stationary radii, traveling and rotating rings, equilibrium residuals
import math

import numpy as np
import pytest

from app.core.errors import BelowBifurcationError, BranchNotRealizableError, KernelDomainError
from app.models.kernel import attractive_zero
from app.models.rings import (ROTATING, STATIONARY, TRAVELING, F, F_complex, F_leading, M1_critical,
                              ReducedParams, RingSolution, approx_radius, equilibrium_residual, large_n_radius,
                              min_radius, rotating_ring, rotating_ring_near, stationary_radius, stationary_radii,
                              traveling_ring)


def test_reduced_params_from_tau():
    params = ReducedParams.from_tau(0.1, k3=0.3, Q=2000.0)
    assert params.M1 == pytest.approx(0.09 * (0.1 - 1 / 0.3))
    assert params.M2 == pytest.approx(2000.0 / 0.3)
    assert params.prefactor == pytest.approx(1.0 / 0.97)
    assert ReducedParams.from_tau(1.0 / 0.3).M1 == 0.0
    with pytest.raises(ValueError):
        ReducedParams.from_tau(0.1, Q=0.0)


def test_three_spot_radii(kernel):
    assert stationary_radius(3, 1, kernel).r0 == pytest.approx(0.09388, abs=5e-4)
    assert stationary_radius(3, 2, kernel).r0 == pytest.approx(0.17800, abs=5e-4)


def test_two_spot_radius_is_half_the_binding_distance(kernel):
    ring = stationary_radius(2, 1, kernel)
    assert ring.r0 == pytest.approx(attractive_zero(kernel, 1) / 2.0, abs=1e-10)
    assert ring.r0 == pytest.approx(0.0813, abs=1e-4)


@pytest.mark.parametrize("N", range(2, 13))
def test_stationary_radius_is_root_near_approximation(N, kernel):
    for ring in stationary_radii(N, kernel, max_branch=2):
        if ring is None:
            continue
        assert abs(F(ring.r0, N, kernel)) < 1e-12
        d_c = attractive_zero(kernel, ring.branch)
        assert abs(ring.r0 - approx_radius(N, d_c)) < math.pi / kernel.beta
        assert ring.r0 > min_radius(N, kernel)


def test_real_and_complex_F_agree(kernel):
    for N in (2, 3, 5, 8):
        r0 = 1.2 * min_radius(N, kernel) + 0.01
        Fc = F_complex(r0, N, kernel)
        assert abs(Fc.imag) < 1e-15
        assert Fc.real == pytest.approx(F(r0, N, kernel), rel=1e-12, abs=1e-18)


def test_F_inside_core_raises(kernel):
    with pytest.raises(KernelDomainError):
        F(0.5 * min_radius(4, kernel), 4, kernel)


def test_large_n_radius_limit(kernel):
    d_c = attractive_zero(kernel, 1)
    assert approx_radius(60, d_c) == pytest.approx(large_n_radius(60, d_c), rel=1e-3)


@pytest.mark.parametrize("N,branch", [(3, 1), (4, 1), (6, 2), (8, 2)])
def test_stationary_ring_is_equilibrium(N, branch, kernel, below):
    ring = stationary_radius(N, branch, kernel)
    assert ring.kind == STATIONARY
    assert equilibrium_residual(ring, below, kernel) < 1e-12


def test_traveling_ring_speed(kernel, above):
    ring = traveling_ring(5, 2, above, kernel, angle=0.7)
    assert ring.kind == TRAVELING
    assert abs(ring.v0) ** 2 == pytest.approx(above.M1 / above.M2, rel=1e-12)
    assert math.atan2(ring.v0.imag, ring.v0.real) == pytest.approx(0.7)
    assert ring.r0 == stationary_radius(5, 2, kernel).r0
    assert equilibrium_residual(ring, above, kernel) < 1e-12


def test_traveling_ring_needs_positive_M1(kernel, below):
    with pytest.raises(BelowBifurcationError):
        traveling_ring(3, 1, below, kernel)
    with pytest.raises(BelowBifurcationError):
        rotating_ring(3, below, kernel)


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_rotating_rings_balance(N, kernel, above):
    rings = rotating_ring(N, above, kernel)
    assert rings
    for ring in rings:
        assert ring.kind == ROTATING
        Fr = F(ring.r0, N, kernel)
        assert 0 <= Fr <= above.k3
        assert ring.omega0 ** 2 == pytest.approx(above.k3 * Fr - Fr ** 2, rel=1e-10)
        assert (1 + above.M2 * above.k3 * ring.r0 ** 2) * Fr == pytest.approx(above.M1, rel=1e-8)
        assert equilibrium_residual(ring, above, kernel) < 1e-10


def test_rotating_ring_continues_stationary_branch(kernel):
    base = stationary_radius(3, 2, kernel)
    params = ReducedParams.from_tau(1.0 / 0.3 + 1e-5)
    ring = rotating_ring_near(3, 2, params, kernel)
    assert ring.branch == 2
    assert ring.r0 >= base.r0
    assert ring.r0 == pytest.approx(base.r0, rel=1e-3)


def test_rotating_rings_vanish_above_critical_M1(kernel, above):
    m1_crit = M1_critical(3, above, kernel)
    assert m1_crit > 0
    too_fast = ReducedParams(M1=1.01 * m1_crit, M2=above.M2, k3=above.k3, tau=above.tau)
    assert rotating_ring(3, too_fast, kernel) == []
    with pytest.raises(BranchNotRealizableError):
        rotating_ring_near(3, 1, too_fast, kernel)


def test_ring_solution_round_trip():
    ring = RingSolution(N=4, r0=0.11, kind=TRAVELING, branch=1, v0=0.01 - 0.02j, residuals={"F": 1e-16})
    assert RingSolution.from_dict(ring.to_dict()) == ring
    with pytest.raises(ValueError):
        RingSolution(N=1, r0=0.1, kind=STATIONARY, branch=1)
    with pytest.raises(ValueError):
        RingSolution(N=3, r0=0.1, kind="spiral", branch=1)


def test_ring_angles():
    ring = RingSolution(N=4, r0=1.0, kind=STATIONARY, branch=1)
    assert np.allclose(ring.angles, [0, np.pi / 2, np.pi, 3 * np.pi / 2])


@pytest.mark.parametrize("N", [3, 5, 8])
def test_nearest_neighbour_term_vanishes_at_the_approximate_radius(N, kernel):
    d_c = attractive_zero(kernel, 1)
    assert abs(F_leading(approx_radius(N, d_c), N, kernel)) < 1e-12
