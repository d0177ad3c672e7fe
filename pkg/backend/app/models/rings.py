# Equally spaced N-spot ring solutions of the reduced models
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from ..core.errors import BelowBifurcationError, BranchNotRealizableError, KernelDomainError
from .kernel import KernelParams, attractive_zero

logger = logging.getLogger(__name__)

STATIONARY = "stationary"
TRAVELING = "traveling"
ROTATING = "rotating"
RING_KINDS = (STATIONARY, TRAVELING, ROTATING)

# Single-spot coefficient Q at the fig1 parameter set: compute_Q on the default profile gives
# about 2001.2, rounded here. ProfileService.reduced_params uses the computed value instead.
Q_FIG1 = 2.0e3


@dataclass(frozen=True)
class ReducedParams:
    """Coefficients of the reduced spot models near the drift bifurcation"""

    M1: float
    M2: float
    k3: float
    tau: float

    @classmethod
    def from_tau(cls, tau: float, k3: float = 0.3, Q: float = Q_FIG1) -> "ReducedParams":
        if Q <= 0:
            raise ValueError("Q must be positive")
        return cls(M1=k3 ** 2 * (tau - 1.0 / k3), M2=Q / k3, k3=k3, tau=tau)

    @property
    def Q(self) -> float:
        return self.M2 * self.k3

    @property
    def tau_c(self) -> float:
        return 1.0 / self.k3

    @property
    def prefactor(self) -> float:
        """1/(1 - tau k3), positive only below the bifurcation"""
        return 1.0 / (1.0 - self.tau * self.k3)

    def to_dict(self) -> dict:
        return {"M1": self.M1, "M2": self.M2, "k3": self.k3, "tau": self.tau}


@dataclass
class RingSolution:
    N: int
    r0: float
    kind: str
    branch: int
    v0: complex = 0j
    omega0: float = 0.0
    residuals: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("a ring needs at least two spots")
        if self.kind not in RING_KINDS:
            raise ValueError(f"unknown ring kind '{self.kind}'")

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.N) / self.N

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "r0": self.r0,
            "kind": self.kind,
            "branch": self.branch,
            "v0": [self.v0.real, self.v0.imag],
            "omega0": self.omega0,
            "residuals": dict(self.residuals),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RingSolution":
        v0 = data.get("v0", [0.0, 0.0])
        return cls(N=int(data["N"]), r0=float(data["r0"]), kind=data["kind"], branch=int(data.get("branch", 0)),
                   v0=complex(v0[0], v0[1]) if isinstance(v0, (list, tuple)) else complex(v0),
                   omega0=float(data.get("omega0", 0.0)), residuals=dict(data.get("residuals", {})))


def _angles(N: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(1, N) / N


def min_radius(N: int, kernel: KernelParams) -> float:
    """Smallest radius whose nearest-neighbour distance clears the core"""
    return kernel.d_b / (2.0 * math.sin(math.pi / N))


def F_complex(r0: float, N: int, kernel: KernelParams) -> complex:
    if N < 2:
        raise ValueError("F is undefined for a single spot")
    theta = _angles(N)
    dist = 2.0 * r0 * np.abs(np.sin(theta / 2.0))
    if np.min(dist) <= kernel.d_b:
        raise KernelDomainError(float(np.min(dist)), kernel.d_b)
    return complex(np.sum((1.0 - np.exp(1j * theta)) * kernel.eval(dist)))


def F_terms(N: int) -> Tuple[np.ndarray, np.ndarray]:
    """Weights s_j and distance factors c_j with F(r0) = sum_j s_j f(c_j r0)"""
    j = np.arange(1, N // 2 + 1)
    c = 2.0 * np.sin(np.pi * j / N)
    s = 4.0 * np.sin(np.pi * j / N) ** 2
    if N % 2 == 0:
        s[-1] = 2.0
    return s, c


def F(r0: Union[float, np.ndarray], N: int, kernel: KernelParams) -> Union[float, np.ndarray]:
    """Ring equilibrium function F(r0) in its real grouped form (vectorized in r0)"""
    if N < 2:
        raise ValueError("F is undefined for a single spot")
    s, c = F_terms(N)
    r = np.asarray(r0, dtype=float)
    dist = np.multiply.outer(r, c)
    if np.min(dist) <= kernel.d_b:
        raise KernelDomainError(float(np.min(dist)), kernel.d_b)
    out = np.sum(s * kernel.eval(dist), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def F_leading(r0: float, N: int, kernel: KernelParams) -> float:
    """Nearest-neighbour part of F for N > 2"""
    sn = math.sin(math.pi / N)
    return 4.0 * sn ** 2 * kernel.eval(2.0 * r0 * sn)


def approx_radius(N: int, d_c: float) -> float:
    return d_c / (2.0 * abs(math.sin(math.pi / N)))


def large_n_radius(N: int, d_c: float) -> float:
    return N * d_c / (2.0 * math.pi)


def stationary_radius(N: int, branch: int, kernel: KernelParams) -> RingSolution:
    """Attractive root of F nearest the seed d_c / (2 sin(pi/N))"""
    if N < 2:
        raise ValueError("a ring needs at least two spots")
    d_c = attractive_zero(kernel, branch)
    sn = math.sin(math.pi / N)
    seed = d_c / (2.0 * sn)
    half = math.pi / (2.0 * kernel.beta * 2.0 * sn)
    lo = max(seed - half, min_radius(N, kernel) * (1.0 + 1e-9))
    hi = seed + half
    if lo >= hi:
        raise BranchNotRealizableError(N, branch, "bracket collapses onto the core")

    grid = np.linspace(lo, hi, 201)
    values = F(grid, N, kernel)
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if fa < 0 <= fb:
            roots.append(brentq(F, a, b, args=(N, kernel), xtol=1e-12))
    if not roots:
        raise BranchNotRealizableError(N, branch)
    r0 = min(roots, key=lambda r: abs(r - seed))
    ring = RingSolution(N=N, r0=float(r0), kind=STATIONARY, branch=branch)
    ring.residuals["F"] = abs(F(r0, N, kernel))
    logger.debug(f"Stationary ring N={N} branch={branch}: r0={r0:.6f} (seed {seed:.6f})")
    return ring


def stationary_radii(N: int, kernel: KernelParams, max_branch: int = 2) -> List[Optional[RingSolution]]:
    """All realizable stationary rings for branches 1..max_branch (None where not realizable)"""
    out = []
    for branch in range(1, max_branch + 1):
        try:
            out.append(stationary_radius(N, branch, kernel))
        except BranchNotRealizableError as e:
            logger.info(str(e))
            out.append(None)
    return out


def traveling_ring(N: int, branch: int, params: ReducedParams, kernel: KernelParams,
                   angle: float = 0.0) -> RingSolution:
    """Stationary-radius ring translating with |v0|^2 = M1/M2 along `angle`"""
    if params.M1 < 0:
        raise BelowBifurcationError(params.M1)
    if params.M2 <= 0:
        raise ValueError("M2 must be positive")
    base = stationary_radius(N, branch, kernel)
    v0 = math.sqrt(params.M1 / params.M2) * complex(math.cos(angle), math.sin(angle))
    ring = RingSolution(N=N, r0=base.r0, kind=TRAVELING, branch=branch, v0=v0)
    ring.residuals["F"] = base.residuals["F"]
    ring.residuals["speed"] = abs(params.M1 - params.M2 * abs(v0) ** 2)
    return ring


def _rotation_balance(r0, N, params, kernel):
    return (1.0 + params.M2 * params.k3 * r0 ** 2) * F(r0, N, kernel) - params.M1


def _scan_range(N: int, kernel: KernelParams) -> Tuple[float, float]:
    lo = min_radius(N, kernel) * (1.0 + 1e-9)
    try:
        hi = 4.0 * stationary_radius(N, 2, kernel).r0
    except BranchNotRealizableError:
        hi = 4.0 * approx_radius(N, attractive_zero(kernel, 2))
    return lo, hi


def _branch_of(r0: float, stationary: List[Optional[RingSolution]]) -> int:
    """Index of the largest stationary radius not exceeding r0 (0 if below all)"""
    branch = 0
    for ring in stationary:
        if ring is not None and ring.r0 <= r0 * (1 + 1e-12):
            branch = ring.branch
    return branch


def rotating_ring(N: int, params: ReducedParams, kernel: KernelParams,
                  n_scan: int = 10_000) -> List[RingSolution]:
    """Every rotating ring on the searchable range: M1 = (1 + M2 k3 r0^2) F(r0), 0 <= F <= k3"""
    if params.M1 <= 0:
        raise BelowBifurcationError(params.M1)
    lo, hi = _scan_range(N, kernel)
    grid = np.linspace(lo, hi, n_scan)
    g = (1.0 + params.M2 * params.k3 * grid ** 2) * F(grid, N, kernel) - params.M1
    stationary = stationary_radii(N, kernel, max_branch=4)

    rings = []
    for a, b, ga, gb in zip(grid[:-1], grid[1:], g[:-1], g[1:]):
        if ga == 0.0 or ga * gb < 0:
            r0 = a if ga == 0.0 else brentq(_rotation_balance, a, b, args=(N, params, kernel), xtol=1e-14)
            Fr = F(r0, N, kernel)
            if Fr < 0 or Fr > params.k3:
                continue
            omega0 = math.sqrt(max(params.k3 * Fr - Fr ** 2, 0.0))
            ring = RingSolution(N=N, r0=float(r0), kind=ROTATING, branch=_branch_of(r0, stationary), omega0=omega0)
            ring.residuals["balance"] = abs(_rotation_balance(r0, N, params, kernel))
            rings.append(ring)
    if not rings:
        logger.info(f"No rotating {N}-ring for M1={params.M1:.3e} "
                    f"(M1_critical={M1_critical(N, params, kernel):.3e})")
    return rings


def rotating_ring_near(N: int, branch: int, params: ReducedParams, kernel: KernelParams) -> RingSolution:
    """Rotating ring continuing the given stationary branch (smallest root above its radius)"""
    base = stationary_radius(N, branch, kernel)
    candidates = [r for r in rotating_ring(N, params, kernel) if r.r0 >= base.r0 * (1 - 1e-9)]
    candidates = [r for r in candidates if r.branch == branch]
    if not candidates:
        raise BranchNotRealizableError(N, branch, f"no rotating ring at M1={params.M1:.3e}")
    return min(candidates, key=lambda r: r.r0)


def M1_critical(N: int, params: ReducedParams, kernel: KernelParams, n_scan: int = 10_000) -> float:
    """max (1 + M2 k3 r0^2) F(r0) over the searchable range with F <= k3"""
    lo, hi = _scan_range(N, kernel)
    grid = np.linspace(lo, hi, n_scan)
    Fg = F(grid, N, kernel)
    values = np.where(Fg <= params.k3, (1.0 + params.M2 * params.k3 * grid ** 2) * Fg, -np.inf)
    i = int(np.argmax(values))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, n_scan - 1)]

    def negated(r):
        Fr = F(r, N, kernel)
        return np.inf if Fr > params.k3 else -(1.0 + params.M2 * params.k3 * r ** 2) * Fr

    res = minimize_scalar(negated, bounds=(a, b), method="bounded", options={"xatol": 1e-13})
    return float(max(values[i], -res.fun))


def interaction_sum(p: np.ndarray, kernel: KernelParams) -> np.ndarray:
    """S_k = sum_{j != k} (p_k - p_j) f(|p_k - p_j|) for complex positions p"""
    diff = p[:, None] - p[None, :]
    dist = np.abs(diff)
    np.fill_diagonal(dist, np.inf)
    if np.min(dist) <= kernel.d_b:
        raise KernelDomainError(float(np.min(dist)), kernel.d_b)
    np.fill_diagonal(dist, 1.0)
    weights = kernel.eval(dist)
    np.fill_diagonal(weights, 0.0)
    return np.sum(diff * weights, axis=1)


def ring_state(ring: RingSolution, params: Optional[ReducedParams], kernel: KernelParams,
               t: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """Positions p_k and amplitudes q_k of the exact ring solution at time t"""
    theta = ring.angles
    if ring.kind == ROTATING:
        phase = np.exp(1j * (ring.omega0 * t + theta))
        Fr = F(ring.r0, ring.N, kernel)
        return ring.r0 * phase, (1j * ring.omega0 + Fr) * ring.r0 * phase
    p = ring.v0 * t + ring.r0 * np.exp(1j * theta)
    if ring.kind == TRAVELING:
        Fr = F(ring.r0, ring.N, kernel)
        return p, ring.v0 + ring.r0 * Fr * np.exp(1j * theta)
    return p, np.zeros(ring.N, dtype=complex)


def equilibrium_residual(ring: RingSolution, params: Optional[ReducedParams], kernel: KernelParams) -> float:
    """Max-norm defect of the reduced equations in the frame where the ring is at rest"""
    p, q = ring_state(ring, params, kernel)
    S = interaction_sum(p, kernel)
    if ring.kind == STATIONARY:
        scale = params.prefactor if params is not None and params.tau * params.k3 < 1 else 1.0
        return float(np.max(np.abs(scale * S)))
    q_rate = params.M1 * q - params.M2 * q * np.abs(q) ** 2 - params.k3 * S
    p_rate = q - S
    if ring.kind == TRAVELING:
        return float(max(np.max(np.abs(p_rate - ring.v0)), np.max(np.abs(q_rate))))
    spin = 1j * ring.omega0
    return float(max(np.max(np.abs(p_rate - spin * p)), np.max(np.abs(q_rate - spin * q))))
