# Single-spot profile pipeline: BVP solve, profile-derived interaction function and reduced coefficients
from functools import lru_cache
from typing import Dict, List, Optional, Sequence
import logging

import numpy as np
from scipy.optimize import brentq

from ..models.kernel import KernelFit, KernelParams, ZeroClassification, find_zeros, find_zeros_tabulated, fit
from ..models.profile import (InteractionQuadrature, PdeParams, SpotProfile, compute_Q, homogeneous_growth_rates,
                              interaction_samples, solve_radial_profile, tail_exponent)
from ..models.rings import ReducedParams

logger = logging.getLogger(__name__)

# separations sampled for the profile-derived kernel (outside the core, inside 2R)
DEFAULT_DISTANCES = np.linspace(0.125, 0.45, 66)


@lru_cache(maxsize=4)
def _cached_profile(params: PdeParams, R: float, n: int) -> SpotProfile:
    return solve_radial_profile(params, R=R, n=n)


class ProfileService:
    """Service for the radial spot profile and everything derived from it"""

    def __init__(self, R: float = 0.6, n: int = 2048):
        self.R = R
        self.n = n

    def profile(self, params: Optional[PdeParams] = None) -> SpotProfile:
        return _cached_profile(params or PdeParams.fig1(), self.R, self.n)

    def homogeneous_stable(self, params: PdeParams, u_c: float, k_max: float = 500.0) -> bool:
        k = np.linspace(0.0, k_max, 2001)
        return bool(np.max(homogeneous_growth_rates(params, u_c, k).real) < 0)

    def interaction_table(self, profile: SpotProfile, distances: Sequence[float] = DEFAULT_DISTANCES,
                          spacing: Optional[float] = None) -> np.ndarray:
        return np.asarray(interaction_samples(profile, distances, spacing))

    def interaction_zeros(self, profile: SpotProfile, distances: Sequence[float] = DEFAULT_DISTANCES,
                          spacing: Optional[float] = None) -> List[ZeroClassification]:
        """Zeros of the profile-derived f(d): bracketed by the samples, polished on the quadrature itself"""
        quad = InteractionQuadrature(profile, spacing)
        d = np.sort(np.asarray(distances, dtype=float))
        f = np.array([quad(float(x)) for x in d])
        zeros = []
        for z in find_zeros_tabulated(d, f):
            i = min(int(np.searchsorted(d, z.d_c)), len(d) - 1)
            lo, hi = d[max(i - 1, 0)], d[i]
            if f[max(i - 1, 0)] * f[i] < 0:
                root = brentq(quad, lo, hi, xtol=1e-12)
            else:
                root = z.d_c
            zeros.append(ZeroClassification(float(root), z.kind, z.index))
        return zeros

    def derived_kernel(self, params: Optional[PdeParams] = None, d_b: float = 0.12,
                       distances: Sequence[float] = DEFAULT_DISTANCES,
                       spacing: Optional[float] = None) -> KernelFit:
        """Fit the closed-form kernel to the profile's own interaction function"""
        profile = self.profile(params)
        samples = self.interaction_table(profile, distances, spacing)
        result = fit(samples, d_b=d_b)
        logger.info(f"Profile-derived kernel: {result.params} (rms {result.rms:.3e})")
        return result

    def reduced_params(self, tau: float, params: Optional[PdeParams] = None) -> ReducedParams:
        """M1, M2 with Q computed from the profile"""
        params = params or PdeParams.fig1()
        Q = compute_Q(self.profile(params))
        logger.info(f"Q from profile: {Q:.6g}")
        return ReducedParams.from_tau(tau, k3=params.k3, Q=Q)

    def summary(self, params: Optional[PdeParams] = None, with_interaction: bool = False) -> Dict:
        params = params or PdeParams.fig1()
        profile = self.profile(params)
        alpha, beta = tail_exponent(params, profile.u_c)
        out = {
            "u_c": profile.u_c,
            "core_height": float(profile.u_s[0]),
            "sign_changes": profile.sign_changes,
            "residual": profile.residual,
            "iterations": profile.iterations,
            "tail_alpha": alpha,
            "tail_beta": beta,
            "homogeneous_stable": self.homogeneous_stable(params, profile.u_c),
            "Q": compute_Q(profile),
        }
        if with_interaction:
            zeros = self.interaction_zeros(profile)
            out["interaction_zeros"] = [{"d_c": z.d_c, "kind": z.kind, "index": z.index} for z in zeros]
            out["zero_gap_vs_fig1"] = compare_zeros(zeros, KernelParams.builtin("fig1"))
        return out


def compare_zeros(tabulated, fitted_params, d_lo: float = 0.12, d_hi: float = 0.35) -> float:
    """Largest distance between profile-derived zeros and the closed-form kernel's zeros on (d_lo, d_hi)"""
    analytic = [z.d_c for z in find_zeros(fitted_params, d_lo, d_hi)]
    numeric = [z.d_c for z in tabulated if d_lo < z.d_c < d_hi]
    if len(analytic) != len(numeric):
        return float("inf")
    return float(max((abs(a - b) for a, b in zip(analytic, numeric)), default=0.0))
