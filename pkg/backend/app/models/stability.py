# Linear stability of ring solutions: per-Fourier-mode matrices, spectra and verdicts
import cmath
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..core.errors import KernelDomainError
from .kernel import KernelParams
from .rings import (ROTATING, STATIONARY, TRAVELING, F, ReducedParams, RingSolution, interaction_sum,
                    ring_state)

logger = logging.getLogger(__name__)

STABLE = "stable"
UNSTABLE = "unstable"

# length and growth threshold of the long reduced-model runs a verdict is read from
OBSERVATION_HORIZON = 4e4
OBSERVED_GROWTH = 10.0


def G2(theta: float, r0: float, kernel: KernelParams) -> float:
    s = abs(math.sin(theta))
    d = 2.0 * r0 * s
    if d <= kernel.d_b:
        raise KernelDomainError(d, kernel.d_b)
    return r0 * kernel.eval_deriv(d) * s


def G1(theta: float, r0: float, kernel: KernelParams) -> float:
    d = 2.0 * r0 * abs(math.sin(theta))
    if d <= kernel.d_b:
        raise KernelDomainError(d, kernel.d_b)
    return kernel.eval(d) + G2(theta, r0, kernel)


def _neighbours(N: int, truncated: bool) -> np.ndarray:
    if truncated:
        return np.array([1, N - 1]) if N > 2 else np.array([1])
    return np.arange(1, N)


def I1_complex(m: int, N: int, r0: float, kernel: KernelParams, truncated: bool = False) -> complex:
    """sum_l G1(theta_l/2) (1 - exp(i (m+1) theta_l))"""
    total = 0j
    for l in _neighbours(N, truncated):
        theta = 2.0 * math.pi * l / N
        total += G1(theta / 2.0, r0, kernel) * (1.0 - cmath.exp(1j * (m + 1) * theta))
    return total


def I2_complex(m: int, N: int, r0: float, kernel: KernelParams, truncated: bool = False) -> complex:
    """sum_l G2(theta_l/2) (exp(i m theta_l) - exp(i theta_l))"""
    total = 0j
    for l in _neighbours(N, truncated):
        theta = 2.0 * math.pi * l / N
        total += G2(theta / 2.0, r0, kernel) * (cmath.exp(1j * m * theta) - cmath.exp(1j * theta))
    return total


def I1(m: int, N: int, r0: float, kernel: KernelParams, truncated: bool = False) -> float:
    """2 sum_l G1(pi l/N) sin^2((m+1) pi l/N)"""
    return float(sum(2.0 * G1(math.pi * l / N, r0, kernel) * math.sin((m + 1) * math.pi * l / N) ** 2
                     for l in _neighbours(N, truncated)))


def I2(m: int, N: int, r0: float, kernel: KernelParams, truncated: bool = False) -> float:
    """2 sum_l G2(pi l/N) (sin^2(pi l/N) - sin^2(m pi l/N))"""
    return float(sum(2.0 * G2(math.pi * l / N, r0, kernel)
                     * (math.sin(math.pi * l / N) ** 2 - math.sin(m * math.pi * l / N) ** 2)
                     for l in _neighbours(N, truncated)))


@dataclass
class ModeMatrices:
    m: int
    entries: np.ndarray
    kind: str
    prefactor: float = 1.0


def _G_block(m: int, N: int, r0: float, kernel: KernelParams, truncated: bool = False) -> np.ndarray:
    i1p = I1(m, N, r0, kernel, truncated)
    i1m = I1(-m, N, r0, kernel, truncated)
    i2 = I2(m, N, r0, kernel, truncated)
    return np.array([[-i1p, -i2], [-i2, -i1m]], dtype=float)


def matrix_stationary(m: int, ring: RingSolution, kernel: KernelParams,
                      params: Optional[ReducedParams] = None, truncated: bool = False) -> ModeMatrices:
    prefactor = params.prefactor if params is not None and params.tau * params.k3 < 1 else 1.0
    return ModeMatrices(m=m, entries=_G_block(m, ring.N, ring.r0, kernel, truncated).astype(complex),
                        kind=STATIONARY, prefactor=prefactor)


def matrix_traveling(m: int, ring: RingSolution, params: ReducedParams, kernel: KernelParams,
                     aligned: bool = True) -> ModeMatrices:
    """
    4x4 traveling-ring mode matrix with the saturation block M1 - 2 M2 |v0|^2.

    With aligned=True the velocity enters through |v0| (frame turned onto the
    direction of travel), so the spectrum does not depend on the heading.
    aligned=False keeps the complex v0^2 coupling literally.
    """
    G = _G_block(m, ring.N, ring.r0, kernel)
    v0 = complex(abs(ring.v0)) if aligned else complex(ring.v0)
    diag = params.M1 - 2.0 * params.M2 * abs(v0) ** 2
    M = np.zeros((4, 4), dtype=complex)
    M[:2, :2] = G
    M[:2, 2:] = np.eye(2)
    M[2:, :2] = params.k3 * G
    M[2, 2] = M[3, 3] = diag
    M[2, 3] = -params.M2 * v0 ** 2
    M[3, 2] = -params.M2 * np.conj(v0) ** 2
    return ModeMatrices(m=m, entries=M, kind=TRAVELING)


def rotating_coefficients(ring: RingSolution, params: ReducedParams, kernel: KernelParams):
    """(F, H1, H2) of a rotating ring"""
    Fr = F(ring.r0, ring.N, kernel)
    w, r = ring.omega0, ring.r0
    H1 = params.M1 - 2.0 * params.M2 * (w ** 2 * r ** 2 + r ** 2 * Fr ** 2)
    H2 = params.M2 * (1j * w * r + r * Fr) ** 2
    return Fr, H1, H2


def matrix_rotating(m: int, ring: RingSolution, params: ReducedParams, kernel: KernelParams) -> ModeMatrices:
    _, H1, H2 = rotating_coefficients(ring, params, kernel)
    G = _G_block(m, ring.N, ring.r0, kernel)
    w = ring.omega0
    M = np.zeros((4, 4), dtype=complex)
    M[:2, :2] = G + np.diag([-1j * w, 1j * w])
    M[:2, 2:] = np.eye(2)
    M[2:, :2] = params.k3 * G
    M[2, 2] = H1 - 1j * w
    M[3, 3] = H1 + 1j * w
    M[2, 3] = -H2
    M[3, 2] = -np.conj(H2)
    return ModeMatrices(m=m, entries=M, kind=ROTATING)


def mode_matrix(m: int, ring: RingSolution, params: Optional[ReducedParams], kernel: KernelParams) -> ModeMatrices:
    if ring.kind == STATIONARY:
        return matrix_stationary(m, ring, kernel, params)
    if params is None:
        raise ValueError(f"{ring.kind} rings need reduced-model parameters")
    if ring.kind == TRAVELING:
        return matrix_traveling(m, ring, params, kernel)
    return matrix_rotating(m, ring, params, kernel)


def char_poly(matrix: np.ndarray) -> np.ndarray:
    """Characteristic polynomial coefficients (leading 1) by Faddeev-LeVerrier"""
    A = np.asarray(matrix, dtype=complex)
    n = A.shape[0]
    coeffs = np.zeros(n + 1, dtype=complex)
    coeffs[0] = 1.0
    Mk = np.zeros_like(A)
    eye = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        Mk = A @ Mk + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(A @ Mk) / k
    return coeffs


def eig_charpoly(matrix: np.ndarray) -> np.ndarray:
    return np.roots(char_poly(matrix))


def eig_small(matrix: np.ndarray) -> np.ndarray:
    """All eigenvalues of a 2x2..4x4 complex matrix (closed form for 2x2)"""
    A = np.asarray(matrix, dtype=complex)
    n = A.shape[0]
    if A.shape != (n, n) or n not in (2, 3, 4):
        raise ValueError(f"eig_small handles 2x2 to 4x4 matrices, got {A.shape}")
    if n == 2:
        a, b, c, d = A[0, 0], A[0, 1], A[1, 0], A[1, 1]
        half_tr = 0.5 * (a + d)
        disc = cmath.sqrt(0.25 * (a - d) ** 2 + b * c)
        return np.array([half_tr + disc, half_tr - disc])
    if not np.all(np.isfinite(A)):
        return eig_charpoly(A)
    return np.linalg.eigvals(A)


def expected_neutral(m: int, N: int) -> int:
    """Symmetry zero modes carried by Fourier mode m: rotation at m=0, translation at m=1 and m=N-1"""
    r = m % N
    return int(r == 0) + int(r == 1) + int(r == N - 1)


def reduced_modes(N: int) -> List[int]:
    return list(range(0, min(N // 2 + 1, N - 1) + 1))


@dataclass
class ModeSpectrum:
    m: int
    eigenvalues: np.ndarray
    neutral: np.ndarray

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "neutral": [bool(x) for x in self.neutral],
        }


@dataclass
class JacobianCheck:
    verdict: str
    margin: float
    neutral_count: int
    eigenvalues: np.ndarray


@dataclass
class StabilityReport:
    ring: RingSolution
    per_mode: List[ModeSpectrum]
    verdict: str
    neutral_count: int
    margin: float
    eps_neutral: float
    prefactor: float = 1.0
    full_jacobian: Optional[JacobianCheck] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def stable(self) -> bool:
        return self.verdict == STABLE

    def to_dict(self) -> dict:
        out = {
            "ring": self.ring.to_dict(),
            "verdict": self.verdict,
            "neutral_count": self.neutral_count,
            "margin": self.margin,
            "eps_neutral": self.eps_neutral,
            "prefactor": self.prefactor,
            "per_mode": [s.to_dict() for s in self.per_mode],
            "warnings": list(self.warnings),
        }
        if self.full_jacobian is not None:
            out["full_jacobian"] = {
                "verdict": self.full_jacobian.verdict,
                "margin": self.full_jacobian.margin,
                "neutral_count": self.full_jacobian.neutral_count,
            }
        return out


def _classify(eigs: np.ndarray, expected: int, eps_neutral: float, struct_tol: float,
              warnings: List[str], label: str) -> np.ndarray:
    """Mark symmetry modes first (smallest |Re|), then anything within eps_neutral"""
    neutral = np.zeros(len(eigs), dtype=bool)
    order = np.argsort(np.abs(eigs.real))
    for idx in order[:expected]:
        if abs(eigs[idx].real) <= struct_tol:
            neutral[idx] = True
        else:
            warnings.append(f"{label}: expected neutral eigenvalue, smallest |Re| is {abs(eigs[idx].real):.3e}")
    neutral |= np.abs(eigs.real) <= eps_neutral
    return neutral


def verdict(ring: RingSolution, params: Optional[ReducedParams], kernel: KernelParams,
            eps_neutral: Optional[float] = None, full_range: bool = False,
            with_jacobian: Optional[bool] = None) -> StabilityReport:
    """Stable iff every non-neutral mode eigenvalue has real part <= eps_neutral"""
    modes = list(range(ring.N)) if full_range else reduced_modes(ring.N)
    matrices = [mode_matrix(m, ring, params, kernel) for m in modes]
    scale = max(float(np.max(np.abs(M.entries))) for M in matrices)
    eps = 1e-8 * scale if eps_neutral is None else eps_neutral
    struct_tol = max(eps, 1e-6 * scale)

    warnings: List[str] = []
    spectra = []
    for M in matrices:
        eigs = eig_small(M.entries)
        neutral = _classify(eigs, expected_neutral(M.m, ring.N), eps, struct_tol, warnings, f"m={M.m}")
        spectra.append(ModeSpectrum(m=M.m, eigenvalues=eigs, neutral=neutral))
    for w in warnings:
        logger.warning(w)

    active = [z.real for s in spectra for z, n in zip(s.eigenvalues, s.neutral) if not n]
    margin = max(active) if active else 0.0
    result = STABLE if margin <= eps else UNSTABLE
    report = StabilityReport(
        ring=ring, per_mode=spectra, verdict=result,
        neutral_count=int(sum(int(np.count_nonzero(s.neutral)) for s in spectra)),
        margin=float(margin), eps_neutral=eps, prefactor=matrices[0].prefactor, warnings=warnings)

    if with_jacobian is None:
        with_jacobian = ring.kind == TRAVELING
    if with_jacobian:
        report.full_jacobian = jacobian_verdict(ring, params, kernel)
    logger.info(f"{ring.kind} ring N={ring.N} branch={ring.branch}: {result} (margin {margin:.3e})")
    return report


def growth_time(margin: float, growth: float = OBSERVED_GROWTH) -> float:
    """Time for the leading mode to grow by the given factor; NaN when nothing grows"""
    return math.log(growth) / margin if margin > 0 else math.nan


def observable_verdict(margin: float, horizon: float = OBSERVATION_HORIZON, growth: float = OBSERVED_GROWTH) -> str:
    """
    Verdict a run of the given length would report.

    A ring whose leading mode needs longer than the horizon to grow by the
    given factor looks stable in such a run.
    """
    t = growth_time(margin, growth)
    return UNSTABLE if not math.isnan(t) and t <= horizon else STABLE


def nearest_neighbor_eigenvalues(m: int, N: int, d_c: float, kernel: KernelParams) -> np.ndarray:
    """{0, -2 d_c f'(d_c) (sin^2((m+1)pi/N) + sin^2((1-m)pi/N))}"""
    fp = kernel.eval_deriv(d_c)
    s = math.sin((m + 1) * math.pi / N) ** 2 + math.sin((1 - m) * math.pi / N) ** 2
    return np.array([0.0, -2.0 * d_c * fp * s])


# --- full reduced-model Jacobian in the frame where the ring is at rest ---

def _pack(P: np.ndarray, Q: Optional[np.ndarray]) -> np.ndarray:
    parts = [P.real, P.imag]
    if Q is not None:
        parts += [Q.real, Q.imag]
    return np.concatenate(parts)


def rest_frame_rhs(ring: RingSolution, params: Optional[ReducedParams],
                   kernel: KernelParams) -> Callable[[np.ndarray], np.ndarray]:
    N = ring.N
    if ring.kind == STATIONARY:
        c = params.prefactor if params is not None and params.tau * params.k3 < 1 else 1.0

        def rhs(x):
            P = x[:N] + 1j * x[N:2 * N]
            return _pack(-c * interaction_sum(P, kernel), None)
        return rhs

    spin = 1j * ring.omega0 if ring.kind == ROTATING else 0j
    drift = ring.v0 if ring.kind == TRAVELING else 0j

    def rhs(x):
        P = x[:N] + 1j * x[N:2 * N]
        Q = x[2 * N:3 * N] + 1j * x[3 * N:]
        S = interaction_sum(P, kernel)
        dP = Q - drift - S - spin * P
        dQ = params.M1 * Q - params.M2 * Q * np.abs(Q) ** 2 - params.k3 * S - spin * Q
        return _pack(dP, dQ)
    return rhs


def rest_state(ring: RingSolution, params: Optional[ReducedParams], kernel: KernelParams) -> np.ndarray:
    p, q = ring_state(ring, params, kernel, t=0.0)
    return _pack(p, None if ring.kind == STATIONARY else q)


def _interaction_jacobian(P: np.ndarray, kernel: KernelParams) -> np.ndarray:
    """d S / d (Re P, Im P) as a real 2N x 2N matrix"""
    N = len(P)
    J = np.zeros((2 * N, 2 * N))
    for k in range(N):
        for j in range(N):
            if j == k:
                continue
            z = P[k] - P[j]
            r = abs(z)
            f, fp = kernel.eval(r), kernel.eval_deriv(r)
            zx, zy = z.real, z.imag
            A = f * np.eye(2) + fp / r * np.array([[zx * zx, zx * zy], [zy * zx, zy * zy]])
            for a in range(2):
                for b in range(2):
                    J[a * N + k, b * N + k] += A[a, b]
                    J[a * N + k, b * N + j] -= A[a, b]
    return J


def jacobian_matrix(ring: RingSolution, params: Optional[ReducedParams], kernel: KernelParams,
                    method: str = "analytic", step: float = 1e-6) -> np.ndarray:
    x0 = rest_state(ring, params, kernel)
    if method == "fd":
        rhs = rest_frame_rhs(ring, params, kernel)
        n = len(x0)
        J = np.zeros((n, n))
        for i in range(n):
            h = step * max(1.0, abs(x0[i]))
            e = np.zeros(n)
            e[i] = h
            J[:, i] = (rhs(x0 + e) - rhs(x0 - e)) / (2 * h)
        return J
    if method != "analytic":
        raise ValueError(f"unknown Jacobian method '{method}'")

    N = ring.N
    P = x0[:N] + 1j * x0[N:2 * N]
    JS = _interaction_jacobian(P, kernel)
    if ring.kind == STATIONARY:
        c = params.prefactor if params is not None and params.tau * params.k3 < 1 else 1.0
        return -c * JS

    Q = x0[2 * N:3 * N] + 1j * x0[3 * N:]
    w = ring.omega0 if ring.kind == ROTATING else 0.0
    # -i w z acts on (x, y) as [[0, w], [-w, 0]]
    R = np.zeros((2 * N, 2 * N))
    R[:N, N:] = w * np.eye(N)
    R[N:, :N] = -w * np.eye(N)
    a, b = Q.real, Q.imag
    sat = np.zeros((2 * N, 2 * N))
    sat[:N, :N] = np.diag(3 * a ** 2 + b ** 2)
    sat[:N, N:] = np.diag(2 * a * b)
    sat[N:, :N] = np.diag(2 * a * b)
    sat[N:, N:] = np.diag(a ** 2 + 3 * b ** 2)
    eye = np.eye(2 * N)
    top = np.hstack([-JS + R, eye])
    bottom = np.hstack([-params.k3 * JS, params.M1 * eye - params.M2 * sat + R])
    return np.vstack([top, bottom])


def jacobian_spectrum(ring: RingSolution, params: Optional[ReducedParams], kernel: KernelParams,
                      method: str = "analytic") -> np.ndarray:
    return np.linalg.eigvals(jacobian_matrix(ring, params, kernel, method))


def expected_jacobian_neutral(ring: RingSolution) -> int:
    """Translations (2) and rotation (1); a traveling ring adds its heading"""
    return 4 if ring.kind == TRAVELING else 3


def jacobian_verdict(ring: RingSolution, params: Optional[ReducedParams], kernel: KernelParams,
                     eps_neutral: Optional[float] = None, method: str = "analytic") -> JacobianCheck:
    J = jacobian_matrix(ring, params, kernel, method)
    eigs = np.linalg.eigvals(J)
    scale = float(np.max(np.abs(J)))
    eps = 1e-8 * scale if eps_neutral is None else eps_neutral
    # the heading mode of a traveling ring is a Jordan pair; its split scales like sqrt(eps)
    struct_tol = max(eps, 1e-6 * scale, 1e2 * math.sqrt(np.finfo(float).eps) * scale)
    warnings: List[str] = []
    neutral = _classify(eigs, expected_jacobian_neutral(ring), eps, struct_tol, warnings, "jacobian")
    active = eigs.real[~neutral]
    margin = float(np.max(active)) if active.size else 0.0
    return JacobianCheck(verdict=STABLE if margin <= eps else UNSTABLE, margin=margin,
                         neutral_count=int(np.count_nonzero(neutral)), eigenvalues=eigs)


def union_spectrum(ring: RingSolution, params: Optional[ReducedParams], kernel: KernelParams) -> np.ndarray:
    """Per-mode spectra over the full range m = 0..N-1, scaled by the first-order prefactor"""
    out = []
    for m in range(ring.N):
        M = mode_matrix(m, ring, params, kernel)
        out.append(M.prefactor * eig_small(M.entries))
    return np.concatenate(out)


def match_spectra(a: Sequence[complex], b: Sequence[complex]) -> float:
    """Largest distance between optimally paired eigenvalues of two equal-size spectra"""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"spectra differ in size: {a.shape} vs {b.shape}")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(np.max(cost[rows, cols]))
