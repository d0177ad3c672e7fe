# Spot-ensemble simulator for the first- and second-order reduced models
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from ..core.errors import CoreViolationError, InsufficientSamplesError, ModeRangeError, StepSizeUnderflowError
from ..core.outputs import write_csv
from .kernel import KernelParams
from .rings import STATIONARY, ReducedParams, RingSolution, ring_state

logger = logging.getLogger(__name__)

FIRST = "first"
SECOND = "second"

COMPLETED = "completed"
CORE_VIOLATION = "core_violation"

STABLE = "stable"
UNSTABLE = "unstable"
INCONCLUSIVE = "inconclusive"


@dataclass
class SpotEnsemble:
    model: str
    p: np.ndarray
    q: Optional[np.ndarray] = None
    t: float = 0.0

    def __post_init__(self):
        if self.model not in (FIRST, SECOND):
            raise ValueError(f"unknown model '{self.model}'")
        self.p = np.asarray(self.p, dtype=complex)
        if self.model == SECOND:
            self.q = np.zeros_like(self.p) if self.q is None else np.asarray(self.q, dtype=complex)
            if self.q.shape != self.p.shape:
                raise ValueError("p and q must have the same length")
        else:
            self.q = None

    @property
    def N(self) -> int:
        return len(self.p)

    def state(self) -> np.ndarray:
        return self.p.copy() if self.model == FIRST else np.concatenate([self.p, self.q])

    @classmethod
    def from_state(cls, model: str, y: np.ndarray, t: float) -> "SpotEnsemble":
        if model == FIRST:
            return cls(model, y.copy(), None, t)
        n = len(y) // 2
        return cls(model, y[:n].copy(), y[n:].copy(), t)

    @classmethod
    def from_ring(cls, ring: RingSolution, params: Optional[ReducedParams], kernel: KernelParams,
                  model: Optional[str] = None) -> "SpotEnsemble":
        model = model or default_model(ring, params)
        p, q = ring_state(ring, params, kernel)
        return cls(model, p, q if model == SECOND else None, 0.0)


def default_model(ring: RingSolution, params: Optional[ReducedParams]) -> str:
    if ring.kind == STATIONARY and (params is None or params.tau * params.k3 < 1):
        return FIRST
    return SECOND


def pair_sum(p: np.ndarray, kernel: KernelParams, clip: bool = False) -> np.ndarray:
    """S_k = sum_{j != k} (p_k - p_j) f(|p_k - p_j|); clip=True evaluates f at the core edge instead of raising"""
    N = len(p)
    if N < 2:
        return np.zeros(N, dtype=complex)
    diff = p[:, None] - p[None, :]
    dist = np.abs(diff)
    np.fill_diagonal(dist, np.inf)
    if clip:
        dist = np.maximum(dist, kernel.d_b * (1.0 + 1e-9))
    else:
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        if dist[i, j] <= kernel.d_b:
            raise CoreViolationError(int(i), int(j), float(dist[i, j]))
    np.fill_diagonal(dist, 1.0)
    weights = kernel.eval(dist)
    np.fill_diagonal(weights, 0.0)
    return np.sum(diff * weights, axis=1)


def _first_order_scale(params: Optional[ReducedParams]) -> float:
    if params is None:
        return 1.0
    if params.tau * params.k3 >= 1:
        raise ValueError(f"first-order model needs tau < tau_c = {params.tau_c:.6g}, got tau = {params.tau}")
    return params.prefactor


def rhs_first(ensemble: SpotEnsemble, params: Optional[ReducedParams], kernel: KernelParams) -> np.ndarray:
    """dp_k/dt = -1/(1 - tau k3) S_k"""
    return -_first_order_scale(params) * pair_sum(ensemble.p, kernel)


def rhs_second(ensemble: SpotEnsemble, params: ReducedParams, kernel: KernelParams):
    """(dp/dt, dq/dt) with dp = q - S and dq = M1 q - M2 q |q|^2 - k3 S"""
    S = pair_sum(ensemble.p, kernel)
    q = ensemble.q
    return q - S, params.M1 * q - params.M2 * q * np.abs(q) ** 2 - params.k3 * S


def min_pair_distance(p: np.ndarray) -> float:
    if len(p) < 2:
        return math.inf
    dist = np.abs(p[:, None] - p[None, :])
    np.fill_diagonal(dist, np.inf)
    return float(np.min(dist))


@dataclass
class Trajectory:
    model: str
    t: np.ndarray
    p: np.ndarray
    q: Optional[np.ndarray] = None
    termination: str = COMPLETED
    event: Dict[str, float] = field(default_factory=dict)
    nfev: int = 0

    @property
    def N(self) -> int:
        return self.p.shape[1]

    def final(self) -> SpotEnsemble:
        return SpotEnsemble(self.model, self.p[-1], None if self.q is None else self.q[-1], float(self.t[-1]))

    def tail(self, fraction: float = 0.5) -> "Trajectory":
        start = int(len(self.t) * (1.0 - fraction))
        return Trajectory(self.model, self.t[start:], self.p[start:],
                          None if self.q is None else self.q[start:], self.termination, dict(self.event))

    def to_frame(self) -> pd.DataFrame:
        cols = {"t": self.t}
        for k in range(self.N):
            cols[f"x_{k + 1}"] = self.p[:, k].real
            cols[f"y_{k + 1}"] = self.p[:, k].imag
        if self.q is not None:
            for k in range(self.N):
                cols[f"xi_{k + 1}"] = self.q[:, k].real
                cols[f"eta_{k + 1}"] = self.q[:, k].imag
        return pd.DataFrame(cols)


class SpotSimulator:
    """Adaptive RK 5(4) integration of the reduced spot models, halting on core violations"""

    def __init__(self, params: Optional[ReducedParams], kernel: KernelParams,
                 rtol: float = 1e-9, atol: float = 1e-12, max_step: float = np.inf):
        self.params = params
        self.kernel = kernel
        self.rtol = rtol
        self.atol = atol
        self.max_step = max_step

    def _rhs(self, model: str):
        kernel = self.kernel
        if model == FIRST:
            scale = -_first_order_scale(self.params)

            def rhs(t, y):
                return scale * pair_sum(y, kernel, clip=True)
            return rhs

        params = self.params
        if params is None:
            raise ValueError("second-order model needs reduced-model parameters")

        def rhs(t, y):
            n = len(y) // 2
            p, q = y[:n], y[n:]
            S = pair_sum(p, kernel, clip=True)
            return np.concatenate([q - S, params.M1 * q - params.M2 * q * np.abs(q) ** 2 - params.k3 * S])
        return rhs

    def _core_event(self, model: str):
        d_b = self.kernel.d_b

        def event(t, y):
            p = y if model == FIRST else y[:len(y) // 2]
            return min_pair_distance(p) - d_b
        event.terminal = True
        event.direction = -1
        return event

    def integrate(self, ensemble: SpotEnsemble, t_end: float, n_samples: int = 1001,
                  t_eval: Optional[Sequence[float]] = None, strict: bool = False) -> Trajectory:
        """Integrate from ensemble.t to t_end, sampling the dense output at t_eval (or n_samples even times)"""
        try:
            pair_sum(ensemble.p, self.kernel)
        except CoreViolationError as e:
            raise CoreViolationError(e.i, e.j, e.distance, ensemble.t) from e
        t0 = ensemble.t
        if t_eval is None:
            t_eval = np.linspace(t0, t_end, n_samples)
        sol = solve_ivp(self._rhs(ensemble.model), (t0, t_end), ensemble.state(), method="RK45",
                        t_eval=np.asarray(t_eval, dtype=float), events=self._core_event(ensemble.model),
                        rtol=self.rtol, atol=self.atol, max_step=self.max_step)
        if sol.status == -1:
            t_fail = float(sol.t[-1]) if sol.t.size else t0
            raise StepSizeUnderflowError(t_fail, sol.message)

        Y = sol.y.T
        times = sol.t
        termination = COMPLETED
        event: Dict[str, float] = {}
        if sol.status == 1 and sol.t_events[0].size:
            t_hit = float(sol.t_events[0][0])
            y_hit = sol.y_events[0][0]
            times = np.append(times, t_hit)
            Y = np.vstack([Y, y_hit[None, :]]) if Y.size else y_hit[None, :]
            p_hit = y_hit if ensemble.model == FIRST else y_hit[:ensemble.N]
            dist = np.abs(p_hit[:, None] - p_hit[None, :])
            np.fill_diagonal(dist, np.inf)
            i, j = np.unravel_index(np.argmin(dist), dist.shape)
            termination = CORE_VIOLATION
            event = {"t": t_hit, "i": int(i), "j": int(j), "distance": float(dist[i, j])}
            logger.warning(f"Core violation between spots {i} and {j} at t={t_hit:.6g}")
            if strict:
                raise CoreViolationError(int(i), int(j), float(dist[i, j]), t_hit)

        n = ensemble.N
        traj = Trajectory(model=ensemble.model, t=times, p=Y[:, :n],
                          q=None if ensemble.model == FIRST else Y[:, n:],
                          termination=termination, event=event, nfev=int(sol.nfev))
        logger.debug(f"Integrated N={n} {ensemble.model}-order ensemble to t={times[-1]:.6g} ({sol.nfev} rhs calls)")
        return traj

    def empirical_verdict(self, ring: RingSolution, amplitude: float = 1e-4, t_end: float = 4e4,
                          seed: int = 0, n_samples: int = 2001, model: Optional[str] = None) -> "EmpiricalVerdict":
        """Random shape perturbation of size amplitude*r0; 10x growth is unstable, 10x decay is stable"""
        ensemble = SpotEnsemble.from_ring(ring, self.params, self.kernel, model)
        rng = np.random.default_rng(seed)
        kick = rng.standard_normal(ring.N) + 1j * rng.standard_normal(ring.N)
        kick *= amplitude * ring.r0 / np.max(np.abs(kick))
        ensemble.p = ensemble.p + kick
        d0 = shape_deviation(ensemble.p, ring)

        traj = self.integrate(ensemble, t_end, n_samples=n_samples)
        if traj.termination == CORE_VIOLATION:
            return EmpiricalVerdict(UNSTABLE, math.inf, d0, math.nan, traj.termination, float(traj.t[-1]))
        d_peak = max(shape_deviation(p, ring) for p in traj.p)
        d_end = shape_deviation(traj.p[-1], ring)
        growth = d_peak / d0
        if growth >= 10.0:
            result = UNSTABLE
        elif d_end <= d0 / 10.0:
            result = STABLE
        else:
            result = INCONCLUSIVE
        logger.info(f"Empirical verdict N={ring.N} {ring.kind}: {result} (peak growth {growth:.3g}, "
                    f"final {d_end / d0:.3g})")
        return EmpiricalVerdict(result, growth, d0, d_end, traj.termination, float(traj.t[-1]))


@dataclass
class EmpiricalVerdict:
    verdict: str
    growth_factor: float
    initial_deviation: float
    final_deviation: float
    termination: str
    t_final: float

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "growth_factor": self.growth_factor,
            "initial_deviation": self.initial_deviation,
            "final_deviation": self.final_deviation,
            "termination": self.termination,
            "t_final": self.t_final,
        }


def integrate(ensemble: SpotEnsemble, params: Optional[ReducedParams], kernel: KernelParams, t_end: float,
              rtol: float = 1e-9, atol: float = 1e-12, **kwargs) -> Trajectory:
    return SpotSimulator(params, kernel, rtol=rtol, atol=atol).integrate(ensemble, t_end, **kwargs)


@dataclass
class RingMeasurement:
    r_mean: float
    omega_est: float
    v_est: complex
    shape_error: float
    r_spread: float

    def to_dict(self) -> dict:
        return {"r_mean": self.r_mean, "omega_est": self.omega_est, "v_est": [self.v_est.real, self.v_est.imag],
                "shape_error": self.shape_error, "r_spread": self.r_spread}


def measure_ring(trajectory: Trajectory, min_samples: int = 100) -> RingMeasurement:
    """Mean radius, angular velocity, centroid velocity and angular-spacing error of a trajectory tail"""
    t = trajectory.t
    if len(t) < min_samples:
        raise InsufficientSamplesError(f"need at least {min_samples} samples, got {len(t)}")
    centroid = trajectory.p.mean(axis=1)
    rel = trajectory.p - centroid[:, None]
    radii = np.abs(rel)

    phases = np.unwrap(np.angle(rel), axis=0)
    omega = float(np.mean([np.polyfit(t, phases[:, k], 1)[0] for k in range(trajectory.N)]))
    vx = np.polyfit(t, centroid.real, 1)[0]
    vy = np.polyfit(t, centroid.imag, 1)[0]

    N = trajectory.N
    sorted_angles = np.sort(np.mod(np.angle(rel), 2 * np.pi), axis=1)
    wrap = sorted_angles[:, :1] + 2 * np.pi - sorted_angles[:, -1:]
    gaps = np.hstack([np.diff(sorted_angles, axis=1), wrap])
    shape_error = float(np.max(np.abs(gaps - 2 * np.pi / N)))

    return RingMeasurement(r_mean=float(np.mean(radii)), omega_est=omega, v_est=complex(vx, vy),
                           shape_error=shape_error, r_spread=float(np.max(radii) - np.min(radii)))


def perturb(ensemble: SpotEnsemble, m: int, amplitude: float, which: str = "position",
            xi_plus: complex = 1.0, xi_minus: complex = 0.0) -> SpotEnsemble:
    """
    Mode-m perturbation of a ring state: z_k -> z_k + amplitude * (p_k - c) (xi_+ e^{im theta_k} + xi_- e^{-im theta_k})
    applied to the positions (which='position') or the amplitudes q_k (which='amplitude').
    """
    N = ensemble.N
    if not 0 <= m <= N:
        raise ModeRangeError(m, N)
    if which not in ("position", "amplitude"):
        raise ValueError(f"which must be 'position' or 'amplitude', got '{which}'")
    out = SpotEnsemble(ensemble.model, ensemble.p.copy(), None if ensemble.q is None else ensemble.q.copy(), ensemble.t)
    rel = ensemble.p - ensemble.p.mean()
    theta = np.angle(rel)
    phi = amplitude * (xi_plus * np.exp(1j * m * theta) + xi_minus * np.exp(-1j * m * theta))
    if which == "position":
        out.p = out.p + rel * phi
    else:
        if out.q is None:
            raise ValueError("first-order ensembles carry no amplitudes")
        out.q = out.q + rel * phi
    return out


def shape_deviation(p: np.ndarray, ring: RingSolution) -> float:
    """Max deviation of the pair distances from the ring's; blind to translation and rotation"""
    p = np.asarray(p, dtype=complex)
    dist = np.abs(p[:, None] - p[None, :])
    k = np.arange(ring.N)
    ref = 2.0 * ring.r0 * np.abs(np.sin(np.pi * (k[:, None] - k[None, :]) / ring.N))
    return float(np.max(np.abs(dist - ref)))


def decay_rate(trajectory: Trajectory, ring: RingSolution, t_start: Optional[float] = None,
               t_stop: Optional[float] = None, floor: float = 1e-10, decades: float = 3.0,
               skip: float = 0.5) -> float:
    """
    Slope of log(shape deviation) against t over the transient (negative when decaying).

    A decaying run is fitted from `skip` decades below its starting deviation
    until it first comes within `decades` of the integration floor floor*r0.
    A growing run is fitted from `skip` decades above the start up to 1% of r0.
    """
    dev = np.array([shape_deviation(p, ring) for p in trajectory.p])
    t = trajectory.t
    d0 = dev[0]
    if d0 <= 0:
        raise InsufficientSamplesError("the run starts on the ring: no deviation to follow")
    if dev[-1] < d0:
        lower = floor * ring.r0 * 10 ** decades
        hit = np.nonzero(dev < lower)[0]
        end = int(hit[0]) if hit.size else len(t)
        mask = (np.arange(len(t)) < end) & (dev <= d0 * 10 ** -skip)
    else:
        hit = np.nonzero(dev > 1e-2 * ring.r0)[0]
        end = int(hit[0]) if hit.size else len(t)
        mask = (np.arange(len(t)) < end) & (dev >= d0 * 10 ** skip)
    if t_start is not None:
        mask &= t >= t_start
    if t_stop is not None:
        mask &= t <= t_stop
    if np.count_nonzero(mask) < 10:
        raise InsufficientSamplesError("too few samples in the transient for a decay fit")
    return float(np.polyfit(t[mask], np.log(dev[mask]), 1)[0])


def save_trajectory(trajectory: Trajectory, path: Union[str, Path], config: Optional[dict] = None,
                    kernel_sha1: Optional[str] = None) -> Path:
    return write_csv(trajectory.to_frame(), path, config, kernel_sha1)


def load_trajectory(path: Union[str, Path]) -> Trajectory:
    df = pd.read_csv(path, comment="#", float_precision="round_trip")
    n = len([c for c in df.columns if c.startswith("x_")])
    p = np.column_stack([df[f"x_{k}"] + 1j * df[f"y_{k}"] for k in range(1, n + 1)])
    q = None
    if "xi_1" in df.columns:
        q = np.column_stack([df[f"xi_{k}"] + 1j * df[f"eta_{k}"] for k in range(1, n + 1)])
    return Trajectory(model=FIRST if q is None else SECOND, t=df["t"].to_numpy(), p=p, q=q)
