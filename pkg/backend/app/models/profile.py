# Homogeneous state, radial single-spot profile and the quantities derived from it
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import spsolve

from ..core.errors import (DegenerateProfileError, KernelSupportError, NewtonDivergenceError,
                           NoSpotFoundError)

logger = logging.getLogger(__name__)

# pseudo-transient continuation of the radial solve
DT_START = 1.0
DT_MIN = 1e-4
DT_MAX = 1e8
MAX_RISE = 2.0
IGNITION_RETRIES = 2


@dataclass(frozen=True)
class PdeParams:
    """Parameters of the two-component nonlocal activator system"""

    D_u: float
    D_w: float
    k1: float
    k3: float
    k4: float
    kappa: float
    tau: float

    def __post_init__(self):
        if self.D_u <= 0 or self.D_w <= 0 or self.tau <= 0:
            raise ValueError("D_u, D_w and tau must be positive")
        if self.k3 == 0:
            raise ValueError("k3 must be nonzero (tau_c = 1/k3)")

    @classmethod
    def fig1(cls, tau: float = 0.1) -> "PdeParams":
        return cls(D_u=1.1e-4, D_w=9.64e-4, k1=1.01, k3=0.3, k4=1.0, kappa=-0.1, tau=tau)

    @property
    def tau_c(self) -> float:
        return 1.0 / self.k3

    def with_tau(self, tau: float) -> "PdeParams":
        return replace(self, tau=tau)

    def to_dict(self) -> dict:
        return asdict(self)


def homogeneous_roots(params: PdeParams) -> List[float]:
    """Real roots of u^3 + (k3 + k4 - k1) u - kappa = 0"""
    coeffs = [1.0, 0.0, params.k3 + params.k4 - params.k1, -params.kappa]
    roots = np.roots(coeffs)
    scale = max(1.0, float(np.max(np.abs(roots)))) if roots.size else 1.0
    real = sorted(float(r.real) for r in roots if abs(r.imag) <= 1e-9 * scale)
    # one Newton polish per root
    polished = []
    for u in real:
        g = u ** 3 + coeffs[2] * u + coeffs[3]
        dg = 3 * u ** 2 + coeffs[2]
        polished.append(u - g / dg if dg != 0 else u)
    return polished


def solve_homogeneous(params: PdeParams) -> float:
    """Uniform steady state u_c; picks the root stable against uniform perturbations"""
    roots = homogeneous_roots(params)
    assert roots, "odd-degree cubic must have a real root"
    slope = [params.k1 - 3 * u ** 2 - params.k3 - params.k4 for u in roots]
    stable = [u for u, s in zip(roots, slope) if s < 0]
    if len(roots) > 1:
        logger.info(f"Homogeneous roots {roots}, uniformly stable: {stable}")
    if len(stable) > 1:
        logger.warning(f"Several uniformly stable homogeneous states {stable}; using {stable[0]}")
    if stable:
        return stable[0]
    return roots[int(np.argmin(slope))]


def homogeneous_growth_rates(params: PdeParams, u_c: float, k: Union[float, np.ndarray]) -> np.ndarray:
    """Eigenvalues (shape (..., 2)) of the linearization about (u_c, u_c) at wavenumber |k|"""
    k = np.asarray(k, dtype=float)
    a = -params.D_u * k ** 2 + params.k1 - 3 * u_c ** 2 - params.k4 / (1.0 + params.D_w * k ** 2)
    b = -params.k3
    c = 1.0 / params.tau
    d = -1.0 / params.tau
    tr = a + d
    det = a * d - b * c
    disc = np.sqrt((tr / 2.0) ** 2 - det + 0j)
    return np.stack([tr / 2.0 + disc, tr / 2.0 - disc], axis=-1)


def tail_exponent(params: PdeParams, u_c: float) -> Tuple[float, float]:
    """Decay rate and wavenumber (alpha, beta) of the far field exp(-mu rho) of a spot"""
    a = params.k1 - 3 * u_c ** 2 - params.k3
    # (D_u x + a)(1 - D_w x) = k4 with x = mu^2
    xs = np.roots([params.D_u * params.D_w, a * params.D_w - params.D_u, params.k4 - a])
    candidates = []
    for x in xs:
        mu = np.sqrt(complex(x))
        for m in (mu, -mu):
            if m.real > 0 and m.imag >= 0:
                candidates.append(m)
    if not candidates:
        raise DegenerateProfileError("no decaying far-field mode: the background is not a spot background")
    # slowest decaying oscillatory mode dominates the tail
    mu = min(candidates, key=lambda m: m.real)
    return float(mu.real), float(mu.imag)


@dataclass
class SpotProfile:
    rho: np.ndarray
    u_s: np.ndarray
    w_s: np.ndarray
    u_c: float
    R: float
    params: Optional[PdeParams] = None
    residual: float = float("nan")
    iterations: int = 0
    _spline: Optional[CubicSpline] = field(default=None, repr=False, compare=False)

    @property
    def h(self) -> float:
        return float(self.rho[1] - self.rho[0])

    @property
    def sign_changes(self) -> int:
        s = np.sign(self.u_s[:-1])
        s = s[s != 0]
        return int(np.count_nonzero(np.diff(s)))

    def spline(self) -> CubicSpline:
        if self._spline is None:
            # clamped at the origin for radial symmetry
            self._spline = CubicSpline(self.rho, self.u_s, bc_type=((1, 0.0), "not-a-knot"))
        return self._spline

    def radial(self, r: Union[float, np.ndarray]) -> np.ndarray:
        """u_s(r) with the profile taken as zero beyond the truncation radius"""
        r = np.asarray(r, dtype=float)
        out = self.spline()(np.minimum(r, self.R))
        return np.where(r >= self.R, 0.0, out)

    def scaled(self, c: float) -> "SpotProfile":
        return SpotProfile(self.rho.copy(), c * self.u_s, c * self.w_s, self.u_c, self.R, self.params,
                           self.residual, self.iterations)


def _laplacian(n: int, h: float) -> sp.csr_matrix:
    """Radial Laplacian on rho_i = i h, i = 0..n-1, with the value at rho_n = R fixed to zero"""
    rho = np.arange(n) * h
    main = np.full(n, -2.0 / h ** 2)
    # upper[j] couples row j to j+1, lower[j] couples row j+1 to j
    upper = np.empty(n - 1)
    upper[1:] = 1.0 / h ** 2 + 1.0 / (2 * h * rho[1:n - 1])
    lower = 1.0 / h ** 2 - 1.0 / (2 * h * rho[1:n])
    # u'' + u'/rho -> 2 u'' at the origin, symmetric ghost point
    main[0] = -4.0 / h ** 2
    upper[0] = 4.0 / h ** 2
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr")


def _residual(x: np.ndarray, lap: sp.csr_matrix, params: PdeParams, u_c: float) -> np.ndarray:
    n = lap.shape[0]
    u, w = x[:n], x[n:]
    U = u_c + u
    ru = (params.D_u * (lap @ u) + params.k1 * U - U ** 3 - params.k3 * U
          - params.k4 * (u_c + w) + params.kappa)
    rw = params.D_w * (lap @ w) - w + u
    return np.concatenate([ru, rw])


def _jacobian(x: np.ndarray, lap: sp.csr_matrix, params: PdeParams, u_c: float) -> sp.csc_matrix:
    n = lap.shape[0]
    U = u_c + x[:n]
    eye = sp.identity(n, format="csr")
    j_uu = params.D_u * lap + sp.diags(params.k1 - 3 * U ** 2 - params.k3)
    j_uw = -params.k4 * eye
    j_wu = eye
    j_ww = params.D_w * lap - eye
    return sp.bmat([[j_uu, j_uw], [j_wu, j_ww]], format="csc")


def _continuation(x: np.ndarray, lap: sp.csr_matrix, params: PdeParams, u_c: float, tol: float,
                  max_iter: int, shift_tol: float) -> Tuple[np.ndarray, float, int]:
    """
    Pseudo-transient continuation followed by plain Newton.

    While the residual is above shift_tol each step is an implicit Euler step
    (J - I/dt) dx = -F of the relaxation dynamics. A step that multiplies the
    residual by more than MAX_RISE is rejected and retried with half the dt;
    accepted steps rescale dt by old/new residual, at most doubling it.
    """
    m2 = x.size
    eye = sp.identity(m2, format="csc")
    res = _residual(x, lap, params, u_c)
    norm = float(np.max(np.abs(res)))
    dt = DT_START
    it = 0
    while norm >= tol and it < max_iter:
        it += 1
        J = _jacobian(x, lap, params, u_c)
        if norm >= shift_tol:
            step = spsolve(J - eye / dt, -res)
            trial = x + step
            trial_res = _residual(trial, lap, params, u_c)
            trial_norm = float(np.max(np.abs(trial_res)))
            if not np.isfinite(trial_norm) or (trial_norm > MAX_RISE * norm and dt > DT_MIN):
                dt = max(0.5 * dt, DT_MIN)
                logger.debug(f"Continuation step {it} rejected: residual {trial_norm:.3e}, dt -> {dt:.2e}")
                continue
            dt = float(np.clip(dt * min(norm / trial_norm, 2.0), DT_MIN, DT_MAX))
            lam = 1.0
        else:
            step = spsolve(J, -res)
            lam = 1.0
            while True:
                trial = x + lam * step
                trial_res = _residual(trial, lap, params, u_c)
                trial_norm = float(np.max(np.abs(trial_res)))
                if np.isfinite(trial_norm) and (trial_norm < norm or lam < 1e-4):
                    break
                lam *= 0.5
            if not np.isfinite(trial_norm):
                raise NewtonDivergenceError(norm, it)
        x, res, norm = trial, trial_res, trial_norm
        logger.debug(f"Newton iteration {it}: residual {norm:.3e}, dt {dt:.2e}, damping {lam}")
    return x, norm, it


def solve_radial_profile(params: PdeParams, R: float = 0.6, n: int = 2048,
                         initial_guess: Optional[np.ndarray] = None,
                         height: Optional[float] = None, width: Optional[float] = None,
                         tol: float = 1e-10, max_iter: int = 400, shift_tol: float = 1e-6) -> SpotProfile:
    """
    Radially symmetric spot of the steady problem.

    The initial guess is a Gaussian bump on u_c. Without an explicit height or
    guess, the bump starts at 1.5|u_c| and doubles (IGNITION_RETRIES times) while
    the iteration relaxes back to the homogeneous state.
    """
    if n < 512:
        raise ValueError("radial grid needs at least 512 points")
    u_c = solve_homogeneous(params)
    h = R / (n - 1)
    rho = np.arange(n) * h
    m = n - 1  # unknowns at rho_0..rho_{n-2}; value at R is zero
    lap = _laplacian(m, h)

    if initial_guess is not None:
        guess = np.asarray(initial_guess, dtype=float)
        starts = [guess.copy() if guess.size == 2 * m else np.concatenate([guess[:m], np.zeros(m)])]
    else:
        wid = 3.0 * math.sqrt(params.D_u) if width is None else width
        heights = [height] if height is not None else [1.5 * abs(u_c) * 2 ** k for k in range(IGNITION_RETRIES + 1)]
        starts = [np.concatenate([a * np.exp(-(rho[:m] / wid) ** 2), np.zeros(m)]) for a in heights]

    for attempt, x0 in enumerate(starts):
        x, norm, it = _continuation(x0, lap, params, u_c, tol, max_iter, shift_tol)
        if norm >= tol:
            raise NewtonDivergenceError(norm, it)
        u = np.append(x[:m], 0.0)
        w = np.append(x[m:], 0.0)
        if np.max(np.abs(u)) >= 1e-6 * max(1.0, abs(u_c)):
            break
        if attempt + 1 < len(starts):
            logger.warning(f"Bump of height {x0[0]:.3f} relaxed to the homogeneous state; "
                           f"retrying with {starts[attempt + 1][0]:.3f}")
    else:
        raise NoSpotFoundError("Newton iteration converged to the homogeneous state: no spot found")

    profile = SpotProfile(rho=rho, u_s=u, w_s=w, u_c=u_c, R=R, params=params, residual=norm, iterations=it)
    if profile.sign_changes < 2:
        logger.warning(f"Spot profile has only {profile.sign_changes} sign changes; tail may not be oscillatory")
    logger.info(f"Spot profile converged in {it} iterations: residual {norm:.2e}, "
                f"core height {u[0]:.4f}, {profile.sign_changes} sign changes")
    return profile


def radial_residual(profile: SpotProfile) -> float:
    """Max-norm residual of the radial BVP on the profile's own grid"""
    if profile.params is None:
        raise ValueError("profile carries no PDE parameters")
    m = len(profile.rho) - 1
    lap = _laplacian(m, profile.h)
    x = np.concatenate([profile.u_s[:m], profile.w_s[:m]])
    return float(np.max(np.abs(_residual(x, lap, profile.params, profile.u_c))))


def tail_decay_rate(profile: SpotProfile, rho_lo: float = 0.15, rho_hi: float = 0.4) -> float:
    """Envelope decay rate of sqrt(rho)*|u_s| from a log-linear fit through lobe maxima"""
    mask = (profile.rho >= rho_lo) & (profile.rho <= rho_hi)
    r = profile.rho[mask]
    g = np.abs(profile.u_s[mask]) * np.sqrt(r)
    peaks = [i for i in range(1, len(g) - 1) if g[i] >= g[i - 1] and g[i] > g[i + 1]]
    if len(peaks) < 2:
        raise DegenerateProfileError("fewer than two tail lobes in the fitting window")
    slope, _ = np.polyfit(r[peaks], np.log(g[peaks]), 1)
    return float(-slope)


class InteractionQuadrature:
    """
    Tensor-product trapezoid quadrature of the interaction integral.

    The weight u_{s,x} (3 u_s^2 + 6 u_c u_s) vanishes outside the truncation
    disc, so the box [-R, R] x [0, R] (even in y) carries the whole numerator.
    """

    def __init__(self, profile: SpotProfile, spacing: Optional[float] = None, chunk_rows: int = 128):
        self.profile = profile
        self.spacing = profile.h if spacing is None else spacing
        self.chunk_rows = chunk_rows
        R = profile.R
        self.x = np.linspace(-R, R, int(math.ceil(2 * R / self.spacing)) + 1)
        self.y = np.linspace(0.0, R, int(math.ceil(R / self.spacing)) + 1)
        spline = profile.spline()
        deriv = spline.derivative()

        weight_rows, denom_rows = [], []
        for y in self._chunks():
            X, Y = np.meshgrid(self.x, y, indexing="xy")
            r = np.hypot(X, Y)
            inside = r < R
            r_in = np.where(inside, r, 0.0)
            u = np.where(inside, spline(r_in), 0.0)
            du = np.where(inside, deriv(r_in), 0.0)
            u_x = np.where(r > 0, du * X / np.where(r > 0, r, 1.0), 0.0)
            weight_rows.append(u_x * (3 * u ** 2 + 6 * profile.u_c * u))
            denom_rows.append(trapezoid(u_x ** 2, self.x, axis=1))
        self.weight = np.vstack(weight_rows)
        # the half plane is doubled; trapezoid weights count the y=0 row once
        self.denominator = 2.0 * trapezoid(np.concatenate(denom_rows), self.y)
        if self.denominator < 1e-14:
            raise DegenerateProfileError(f"interaction denominator {self.denominator:.3e} below 1e-14")

    def _chunks(self):
        for start in range(0, len(self.y), self.chunk_rows):
            yield self.y[start:start + self.chunk_rows]

    def numerator(self, shift: float) -> float:
        """Weighted overlap with a second spot centred at (shift, 0); odd in shift"""
        if abs(shift) >= 2 * self.profile.R:
            raise KernelSupportError(f"kernel support exceeded: d={abs(shift)} >= 2R={2 * self.profile.R}")
        rows = []
        start = 0
        for y in self._chunks():
            X, Y = np.meshgrid(self.x - shift, y, indexing="xy")
            shifted = self.profile.radial(np.hypot(X, Y))
            rows.append(trapezoid(self.weight[start:start + len(y)] * shifted, self.x, axis=1))
            start += len(y)
        return float(2.0 * trapezoid(np.concatenate(rows), self.y))

    def __call__(self, d: float) -> float:
        if d <= 0:
            raise ValueError("separation must be positive")
        return self.numerator(d) / (d * self.denominator)


def interaction_numeric(profile: SpotProfile, d: float, spacing: Optional[float] = None) -> float:
    """f(d) from the profile by 2-D quadrature"""
    return InteractionQuadrature(profile, spacing)(abs(d))


def interaction_samples(profile: SpotProfile, distances: Iterable[float],
                        spacing: Optional[float] = None) -> List[Tuple[float, float]]:
    quad = InteractionQuadrature(profile, spacing)
    return [(float(d), quad(float(d))) for d in distances]


def _radial_derivatives(profile: SpotProfile) -> Tuple[np.ndarray, np.ndarray]:
    """u' and u'' on the radial grid by second-order central differences"""
    h = profile.h
    u = profile.u_s
    du = np.gradient(u, h, edge_order=2)
    d2u = np.empty_like(u)
    d2u[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h ** 2
    d2u[0] = 2 * (u[1] - u[0]) / h ** 2
    d2u[-1] = d2u[-2]
    du[0] = 0.0
    return du, d2u


def compute_Q(profile: SpotProfile, spacing: Optional[float] = None, chunk_rows: int = 128) -> float:
    """Q = int u_{s,xx}^2 / int u_{s,x}^2 over the plane, chain rule on a 2-D grid"""
    du, d2u = _radial_derivatives(profile)
    s_du = CubicSpline(profile.rho, du)
    s_d2u = CubicSpline(profile.rho, d2u)
    h = profile.h if spacing is None else spacing
    R = profile.R
    # both integrands are even in x and y: one quadrant suffices for the ratio
    axis = np.linspace(0.0, R, int(math.ceil(R / h)) + 1)
    num_rows, den_rows = [], []
    for start in range(0, len(axis), chunk_rows):
        X, Y = np.meshgrid(axis, axis[start:start + chunk_rows], indexing="xy")
        r = np.hypot(X, Y)
        inside = r < R
        r_in = np.where(inside, r, 0.0)
        d1 = np.where(inside, s_du(r_in), 0.0)
        d2 = np.where(inside, s_d2u(r_in), 0.0)
        safe_r = np.where(r > 0, r, 1.0)
        cos2 = np.where(r > 0, (X / safe_r) ** 2, 1.0)
        sin2 = np.where(r > 0, (Y / safe_r) ** 2, 0.0)
        # u'/rho -> u''(0) at the origin
        d1_over_r = np.where(r > 0, d1 / safe_r, d2u[0])
        u_xx = d2 * cos2 + d1_over_r * sin2
        num_rows.append(trapezoid(u_xx ** 2, axis, axis=1))
        den_rows.append(trapezoid(d1 ** 2 * cos2, axis, axis=1))
    den = trapezoid(np.concatenate(den_rows), axis)
    if den < 1e-14:
        raise DegenerateProfileError(f"Q denominator {den:.3e} below 1e-14")
    num = trapezoid(np.concatenate(num_rows), axis)
    return float(num / den)


def compute_Q_radial(profile: SpotProfile) -> float:
    """Same ratio with the angular integrals done in closed form"""
    du, d2u = _radial_derivatives(profile)
    rho = profile.rho
    d1_over_r = np.empty_like(du)
    d1_over_r[1:] = du[1:] / rho[1:]
    d1_over_r[0] = d2u[0]
    num = trapezoid(rho * (0.75 * d2u ** 2 + 0.5 * d2u * d1_over_r + 0.75 * d1_over_r ** 2), rho)
    den = trapezoid(rho * du ** 2, rho)
    if den < 1e-14:
        raise DegenerateProfileError(f"Q denominator {den:.3e} below 1e-14")
    return float(num / den)


def save_profile(profile: SpotProfile, path: Union[str, Path]) -> Tuple[Path, Path]:
    """CSV (rho, u_s, w_s) at full precision plus a JSON sidecar"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"rho": profile.rho, "u_s": profile.u_s, "w_s": profile.w_s}).to_csv(
        path, index=False, float_format="%.17g")
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps({
        "u_c": repr(profile.u_c),
        "R": repr(profile.R),
        "residual": profile.residual,
        "iterations": profile.iterations,
        "params": profile.params.to_dict() if profile.params else None,
    }, indent=2))
    return path, sidecar


def load_profile(path: Union[str, Path]) -> SpotProfile:
    path = Path(path)
    frame = pd.read_csv(path, float_precision="round_trip")
    meta = json.loads(path.with_suffix(".json").read_text())
    params = PdeParams(**meta["params"]) if meta.get("params") else None
    return SpotProfile(rho=frame["rho"].to_numpy(), u_s=frame["u_s"].to_numpy(), w_s=frame["w_s"].to_numpy(),
                       u_c=float(meta["u_c"]), R=float(meta["R"]), params=params,
                       residual=float(meta.get("residual", float("nan"))),
                       iterations=int(meta.get("iterations", 0)))
