# Oscillatory spot-spot interaction function f(d) and its fitted closed form
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from lmfit import Minimizer, Parameters
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from ..core.errors import KernelDomainError, KernelFitError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

ATTRACTIVE = "attractive"
REPULSIVE = "repulsive"


@dataclass(frozen=True)
class KernelParams:
    """f(d) = M0 * exp(-alpha d) / d^(3/2) * cos(beta (d - d0)), valid for d > d_b"""

    M0: float
    alpha: float
    beta: float
    d0: float
    d_b: float

    def __post_init__(self):
        if not (self.M0 > 0 and self.alpha > 0 and self.beta > 0):
            raise ValueError(f"kernel needs M0, alpha, beta > 0, got {self}")
        if not (self.d0 > self.d_b > 0):
            raise ValueError(f"kernel needs d0 > d_b > 0, got d0={self.d0}, d_b={self.d_b}")

    @classmethod
    def builtin(cls, name: str = "fig1") -> "KernelParams":
        if name not in BUILTIN_KERNELS:
            raise ValueError(f"Unknown builtin kernel '{name}'")
        return cls(**BUILTIN_KERNELS[name])

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.beta

    def _check_domain(self, d: np.ndarray):
        if np.any(d <= self.d_b):
            bad = float(np.min(d))
            raise KernelDomainError(bad, self.d_b)

    def envelope(self, d: ArrayLike) -> ArrayLike:
        d_arr = np.asarray(d, dtype=float)
        out = self.M0 * np.exp(-self.alpha * d_arr) * d_arr ** -1.5
        return float(out) if out.ndim == 0 else out

    def eval(self, d: ArrayLike) -> ArrayLike:
        d_arr = np.asarray(d, dtype=float)
        self._check_domain(d_arr)
        out = self.M0 * np.exp(-self.alpha * d_arr) * d_arr ** -1.5 * np.cos(self.beta * (d_arr - self.d0))
        return float(out) if out.ndim == 0 else out

    def eval_deriv(self, d: ArrayLike) -> ArrayLike:
        d_arr = np.asarray(d, dtype=float)
        self._check_domain(d_arr)
        env = self.M0 * np.exp(-self.alpha * d_arr) * d_arr ** -1.5
        phase = self.beta * (d_arr - self.d0)
        out = env * ((-self.alpha - 1.5 / d_arr) * np.cos(phase) - self.beta * np.sin(phase))
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return asdict(self)


BUILTIN_KERNELS = {
    # constants of the published fit at the fig1 parameter set
    "fig1": {"M0": 6.87e-4, "alpha": 15.7, "beta": 43.15, "d0": 0.199, "d_b": 0.12},
}


@dataclass(frozen=True)
class ZeroClassification:
    d_c: float
    kind: str
    index: int

    @property
    def attractive(self) -> bool:
        return self.kind == ATTRACTIVE


@dataclass
class KernelFit:
    params: KernelParams
    rms: float
    weighted_rms: float
    converged: bool
    nfev: int
    message: str = ""


def find_zeros(params: KernelParams, d_lo: float, d_hi: float) -> List[ZeroClassification]:
    """Analytic zeros d = d0 + (pi/2 + k pi)/beta inside [d_lo, d_hi], classified by the sign of f'"""
    lo = max(d_lo, params.d_b)
    if d_hi <= lo:
        return []

    # k counts cosine zeros from the phase origin; odd k have f' > 0
    k_first_above_core = math.floor((params.beta * (params.d_b - params.d0) - math.pi / 2) / math.pi) + 1
    k_lo = math.ceil((params.beta * (lo - params.d0) - math.pi / 2) / math.pi)
    k_hi = math.floor((params.beta * (d_hi - params.d0) - math.pi / 2) / math.pi)

    zeros = []
    for k in range(max(k_lo, k_first_above_core), k_hi + 1):
        d_c = params.d0 + (math.pi / 2 + k * math.pi) / params.beta
        if d_c <= params.d_b:
            continue
        kind = ATTRACTIVE if k % 2 != 0 else REPULSIVE
        # ordinal among zeros of the same kind, counted outward from the core
        index = len([j for j in range(k_first_above_core, k + 1) if (j % 2 != 0) == (k % 2 != 0)])
        zeros.append(ZeroClassification(d_c=d_c, kind=kind, index=index))
    return zeros


def attractive_zero(params: KernelParams, branch: int) -> float:
    """Location of the branch-th attractive zero outside the core (branch counts from 1)"""
    if branch < 1:
        raise ValueError(f"branch must be >= 1, got {branch}")
    span = params.d_b + (branch + 1) * params.period + params.period
    for zero in find_zeros(params, params.d_b, span):
        if zero.attractive and zero.index == branch:
            return zero.d_c
    raise ValueError(f"attractive zero {branch} not found")


def find_zeros_tabulated(d: Sequence[float], f: Sequence[float]) -> List[ZeroClassification]:
    """Zeros of tabulated interaction data by sign change + bisection on a cubic spline"""
    d = np.asarray(d, dtype=float)
    f = np.asarray(f, dtype=float)
    order = np.argsort(d)
    d, f = d[order], f[order]
    spline = CubicSpline(d, f)
    slope = spline.derivative()

    zeros = []
    n_att = n_rep = 0
    for i in range(len(d) - 1):
        if f[i] == 0.0:
            root = d[i]
        elif f[i] * f[i + 1] < 0:
            root = brentq(spline, d[i], d[i + 1], xtol=1e-14)
        else:
            continue
        if slope(root) > 0:
            n_att += 1
            zeros.append(ZeroClassification(float(root), ATTRACTIVE, n_att))
        else:
            n_rep += 1
            zeros.append(ZeroClassification(float(root), REPULSIVE, n_rep))
    return zeros


def _initial_guess(d: np.ndarray, f: np.ndarray) -> Tuple[float, float, float, float]:
    """M0, alpha, beta, d0 from zero spacing and the log-envelope slope"""
    zeros = find_zeros_tabulated(d, f)
    if len(zeros) < 2:
        raise KernelFitError("samples must span at least two zeros of f")
    spacing = np.diff([z.d_c for z in zeros])
    beta = math.pi / float(np.mean(spacing))

    # envelope from the lobe extrema between consecutive zeros
    edges = [d[0]] + [z.d_c for z in zeros] + [d[-1]]
    peak_d, peak_v = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        mask = (d >= a) & (d <= b)
        if np.count_nonzero(mask) == 0:
            continue
        lobe = np.abs(f[mask]) * d[mask] ** 1.5
        j = int(np.argmax(lobe))
        if lobe[j] > 0:
            peak_d.append(d[mask][j])
            peak_v.append(math.log(lobe[j]))
    if len(peak_d) >= 2:
        slope, intercept = np.polyfit(peak_d, peak_v, 1)
        alpha = max(-slope, 1e-3)
        M0 = math.exp(intercept)
    else:
        alpha = 1.0
        M0 = float(np.max(np.abs(f) * d ** 1.5))

    first_attractive = next((z.d_c for z in zeros if z.attractive), zeros[0].d_c + math.pi / beta)
    d0 = first_attractive + math.pi / (2.0 * beta)
    return M0, alpha, beta, d0


def _weighted_residual(pars, d, f, weight, scale):
    v = pars.valuesdict()
    model = v["M0"] * np.exp(-v["alpha"] * d) * d ** -1.5 * np.cos(v["beta"] * (d - v["d0"]))
    return (model - f) * weight / scale


def fit(samples: Sequence[Tuple[float, float]], d_b: Optional[float] = None,
        max_nfev: int = 2000) -> KernelFit:
    """Envelope-weighted Levenberg-Marquardt fit of the closed form to (d, f) samples"""
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[0] < 30:
        raise KernelFitError(f"need at least 30 samples, got {0 if data.ndim != 2 else data.shape[0]}")
    order = np.argsort(data[:, 0])
    d, f = data[order, 0], data[order, 1]
    if not np.any(f != 0.0):
        raise KernelFitError("all samples are zero; amplitude is unidentifiable")
    if d_b is None:
        d_b = 0.999 * float(d[0])
    if np.any(d <= d_b):
        raise KernelFitError(f"samples must lie outside the core radius {d_b}")

    M0, alpha, beta, d0 = _initial_guess(d, f)
    logger.info(f"Kernel fit initial guess: M0={M0:.3e} alpha={alpha:.3f} beta={beta:.3f} d0={d0:.4f}")

    weight = np.exp(alpha * d) * d ** 1.5
    params = Parameters()
    params.add("M0", value=M0, min=0)
    params.add("alpha", value=alpha, min=0)
    params.add("beta", value=beta, min=0)
    params.add("d0", value=d0)

    minner = Minimizer(_weighted_residual, params, fcn_args=(d, f, weight, M0))
    result = minner.minimize(method="leastsq", max_nfev=max_nfev)
    v = result.params.valuesdict()

    # keep the phase offset outside the core by shifting whole periods
    d0_fit = v["d0"]
    period = 2.0 * math.pi / v["beta"]
    while d0_fit <= d_b:
        d0_fit += period

    fitted = KernelParams(M0=v["M0"], alpha=v["alpha"], beta=v["beta"], d0=d0_fit, d_b=d_b)
    model = fitted.eval(d)
    rms = float(np.sqrt(np.mean((model - f) ** 2)))
    weighted_rms = float(np.sqrt(np.mean(((model - f) * weight / M0) ** 2)))
    converged = bool(result.success)
    if not converged:
        logger.warning(f"Kernel fit did not converge: {result.message}")
    else:
        logger.info(f"Kernel fit converged: {fitted} rms={rms:.3e}")
    return KernelFit(params=fitted, rms=rms, weighted_rms=weighted_rms, converged=converged,
                     nfev=int(result.nfev), message=str(result.message))


def canonical_json(params: KernelParams) -> str:
    return json.dumps({k: repr(float(v)) for k, v in sorted(params.to_dict().items())}, sort_keys=True)


def kernel_hash(params: KernelParams) -> str:
    """git blob SHA-1 of the canonical kernel JSON"""
    payload = canonical_json(params).encode("utf-8")
    header = f"blob {len(payload)}\0".encode("utf-8")
    return hashlib.sha1(header + payload).hexdigest()


def save_kernel(params: KernelParams, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(params.to_dict(), indent=2))
    return path


def load_kernel(source: str) -> KernelParams:
    """Accepts 'builtin:<name>' or a path to a kernel JSON file"""
    if source.startswith("builtin:"):
        return KernelParams.builtin(source.split(":", 1)[1])
    data = json.loads(Path(source).read_text())
    if "params" in data:
        data = data["params"]
    return KernelParams(**{k: float(data[k]) for k in ("M0", "alpha", "beta", "d0", "d_b")})
