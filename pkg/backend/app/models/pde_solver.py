# Fourier pseudo-spectral solver for the two-component nonlocal system on a periodic square
import logging
import math
import struct
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import ndimage

from ..core.errors import BlowUpError, ClearanceError
from .profile import PdeParams, SpotProfile, solve_homogeneous

logger = logging.getLogger(__name__)

COMPLETED = "completed"
STEADY = "steady"
COUNT_CHANGE = "count_change"
BLOW_UP = "blow_up"


@dataclass(frozen=True)
class Grid:
    """Periodic square [-L, L)^2 with nx x ny points; axis 0 is x"""

    nx: int = 128
    ny: int = 128
    L: float = 1.0

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if n < 8 or n & (n - 1):
                raise ValueError(f"grid sizes must be powers of two >= 8, got {n}")
        if self.L <= 0:
            raise ValueError("L must be positive")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.nx

    @property
    def dy(self) -> float:
        return 2.0 * self.L / self.ny

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return -self.L + self.dy * np.arange(self.ny)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def wavenumbers(self) -> Tuple[np.ndarray, np.ndarray]:
        """(kx, ky) broadcastable to the rfft2 spectrum shape (nx, ny//2+1)"""
        kx = 2.0 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)
        ky = 2.0 * np.pi * np.fft.rfftfreq(self.ny, d=self.dy)
        return kx[:, None], ky[None, :]

    def k2(self) -> np.ndarray:
        kx, ky = self.wavenumbers()
        return kx ** 2 + ky ** 2

    def dealias_mask(self) -> np.ndarray:
        """2/3-rule truncation for the cubic term"""
        kx, ky = self.wavenumbers()
        kx_max = np.pi / self.dx
        ky_max = np.pi / self.dy
        return (np.abs(kx) < (2.0 / 3.0) * kx_max) & (np.abs(ky) < (2.0 / 3.0) * ky_max)

    def wrap(self, d: np.ndarray) -> np.ndarray:
        """Minimal-image offset on the torus"""
        return np.mod(d + self.L, 2.0 * self.L) - self.L


@dataclass
class Field2D:
    grid: Grid
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    @property
    def nx(self) -> int:
        return self.grid.nx

    @property
    def ny(self) -> int:
        return self.grid.ny

    @property
    def L(self) -> float:
        return self.grid.L

    def copy(self) -> "Field2D":
        return Field2D(self.grid, self.u.copy(), self.v.copy(), self.t)


@dataclass
class SpotTrack:
    t: float
    centers: List[Tuple[float, float]]

    @property
    def count(self) -> int:
        return len(self.centers)


def apply_Ginv(spectrum: np.ndarray, D_w: float, k2: np.ndarray) -> np.ndarray:
    return spectrum / (D_w * k2 + 1.0)


def apply_G(spectrum: np.ndarray, D_w: float, k2: np.ndarray) -> np.ndarray:
    return spectrum * (D_w * k2 + 1.0)


def spectral_derivative(f: np.ndarray, grid: Grid, axis: int = 0) -> np.ndarray:
    """d f / dx (axis 0) or d f / dy (axis 1) of a real periodic field"""
    kx, ky = grid.wavenumbers()
    k = kx if axis == 0 else ky
    if axis == 0 and grid.nx % 2 == 0:
        k = k.copy()
        k[grid.nx // 2] = 0.0
    if axis == 1 and grid.ny % 2 == 0:
        k = k.copy()
        k[:, -1] = 0.0
    return np.fft.irfft2(1j * k * np.fft.rfft2(f), s=f.shape)


def _block_functions(a: np.ndarray, b: float, c: float, d: float, h: float, n_points: int = 64):
    """
    exp, phi1 and phi2 of h*[[a, b], [c, d]] for every wavenumber, by the Cauchy
    integral on a circle around both eigenvalues (roots-of-unity quadrature).
    Returns dict name -> (4, ...) entries in order 11, 12, 21, 22.
    """
    A11, A12, A21, A22 = h * a, h * b * np.ones_like(a), h * c * np.ones_like(a), h * d * np.ones_like(a)
    center = 0.5 * (A11 + A22)
    spread = np.abs(np.sqrt(0.25 * (A11 - A22) ** 2 + A12 * A21 + 0j))
    radius = spread + 1.0
    if np.max(spread) > 2.0:
        logger.warning(f"Eigenvalue spread {np.max(spread):.2f} of h*L is large; reduce dt for accurate ETD weights")
    roots = np.exp(2j * np.pi * (np.arange(n_points) + 0.5) / n_points)

    out = {"exp": np.zeros((4,) + a.shape), "phi1": np.zeros((4,) + a.shape), "phi2": np.zeros((4,) + a.shape)}
    for w in roots:
        z = center + radius * w
        det = (z - A11) * (z - A22) - A12 * A21
        # (zI - A)^{-1} times the quadrature weight (z - center)
        weight = radius * w / det
        inv = ((z - A22) * weight, A12 * weight, A21 * weight, (z - A11) * weight)
        ez = np.exp(z)
        values = {"exp": ez, "phi1": (ez - 1.0) / z, "phi2": (ez - 1.0 - z) / z ** 2}
        for name, phi in values.items():
            for i in range(4):
                out[name][i] += (phi * inv[i]).real / n_points
    return out


class PseudoSpectralSolver:
    """
    ETD2RK stepping of the deviation (U, V) = (u - u_c, v - u_c):
      U_t = D_u Lap U + (k1 - 3u_c^2) U - k3 V - k4 G^{-1} U - 3u_c U^2 - U^3
      V_t = (U - V) / tau
    The linear part is a 2x2 block per wavenumber and is integrated exactly.
    """

    def __init__(self, params: PdeParams, grid: Grid, dt: float = 0.05, dealias: bool = True):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.params = params
        self.grid = grid
        self.dt = dt
        self.u_c = solve_homogeneous(params)
        self.k2 = grid.k2()
        self.mask = grid.dealias_mask() if dealias else np.ones_like(self.k2, dtype=bool)

        a = -params.D_u * self.k2 + params.k1 - 3.0 * self.u_c ** 2 - params.k4 / (1.0 + params.D_w * self.k2)
        self.linear_diag = a
        blocks = _block_functions(a, -params.k3, 1.0 / params.tau, -1.0 / params.tau, dt)
        self.E = blocks["exp"]
        # only the U column of phi1, phi2 is needed: the nonlinearity has no V component
        self.P1 = dt * blocks["phi1"][[0, 2]]
        self.P2 = dt * blocks["phi2"][[0, 2]]
        logger.debug(f"ETD2RK operators ready: grid {grid.nx}x{grid.ny}, dt={dt}")

    def nonlinear(self, U_hat: np.ndarray) -> np.ndarray:
        U = np.fft.irfft2(U_hat, s=(self.grid.nx, self.grid.ny))
        N = -3.0 * self.u_c * U ** 2 - U ** 3
        return np.fft.rfft2(N) * self.mask

    def _linear(self, U_hat, V_hat):
        E = self.E
        return E[0] * U_hat + E[1] * V_hat, E[2] * U_hat + E[3] * V_hat

    def step_spectral(self, U_hat: np.ndarray, V_hat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        N0 = self.nonlinear(U_hat)
        eU, eV = self._linear(U_hat, V_hat)
        aU = eU + self.P1[0] * N0
        aV = eV + self.P1[1] * N0
        N1 = self.nonlinear(aU)
        return aU + self.P2[0] * (N1 - N0), aV + self.P2[1] * (N1 - N0)

    def step(self, fld: Field2D) -> Field2D:
        U_hat = np.fft.rfft2(fld.u - self.u_c)
        V_hat = np.fft.rfft2(fld.v - self.u_c)
        U_hat, V_hat = self.step_spectral(U_hat, V_hat)
        shape = (self.grid.nx, self.grid.ny)
        u = np.fft.irfft2(U_hat, s=shape) + self.u_c
        v = np.fft.irfft2(V_hat, s=shape) + self.u_c
        t = fld.t + self.dt
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise BlowUpError(t)
        return Field2D(self.grid, u, v, t)

    def advance(self, fld: Field2D, n_steps: int) -> Field2D:
        for _ in range(n_steps):
            fld = self.step(fld)
        return fld


@lru_cache(maxsize=8)
def _cached_solver(params: PdeParams, grid: Grid, dt: float) -> PseudoSpectralSolver:
    return PseudoSpectralSolver(params, grid, dt)


def step(fld: Field2D, params: PdeParams, dt: float) -> Field2D:
    return _cached_solver(params, fld.grid, dt).step(fld)


def homogeneous_field(grid: Grid, params: PdeParams) -> Field2D:
    u_c = solve_homogeneous(params)
    u = np.full((grid.nx, grid.ny), u_c)
    return Field2D(grid, u, u.copy(), 0.0)


def spot_field(grid: Grid, profile: SpotProfile, centers: Sequence[complex]) -> np.ndarray:
    """u_c + sum_k u_s(|r - p_k|) with minimal-image distances"""
    X, Y = grid.mesh()
    u = np.full(X.shape, profile.u_c)
    for p in centers:
        r = np.hypot(grid.wrap(X - p.real), grid.wrap(Y - p.imag))
        u += profile.radial(r)
    return u


def ring_centers(N: int, r0: float, center: complex = 0j, phase: float = 0.0) -> np.ndarray:
    if N == 1:
        return np.array([center], dtype=complex)
    return center + r0 * np.exp(1j * (phase + 2.0 * np.pi * np.arange(N) / N))


def init_ring(N: int, r0: float, profile: SpotProfile, grid: Grid, center: complex = 0j,
              phase: float = 0.0) -> Field2D:
    """Superposition of N embedded spots on a ring; v = u"""
    if N < 1:
        raise ValueError("N must be >= 1")
    reach = (r0 if N > 1 else 0.0) + profile.R
    extent = max(abs(center.real), abs(center.imag)) + reach
    if extent > grid.L:
        raise ClearanceError(f"ring of radius {r0} with profile support {profile.R} does not fit in [-{grid.L}, {grid.L}]")
    u = spot_field(grid, profile, ring_centers(N, r0, center, phase))
    return Field2D(grid, u, u.copy(), 0.0)


def kick_spot(fld: Field2D, profile: SpotProfile, center: complex, displacement: complex) -> Field2D:
    """
    Move one spot's activator contribution by `displacement` and leave v behind;
    the lagging inhibitor gives the spot an initial velocity along the displacement.
    """
    X, Y = fld.grid.mesh()
    wrap = fld.grid.wrap
    old = profile.radial(np.hypot(wrap(X - center.real), wrap(Y - center.imag)))
    target = center + displacement
    new = profile.radial(np.hypot(wrap(X - target.real), wrap(Y - target.imag)))
    delta = new - old
    return Field2D(fld.grid, fld.u + delta, fld.v.copy(), fld.t)


def center_superposition(N: int, r0: float, profile: SpotProfile) -> float:
    """u_c + N u_s(r0): field value at the ring centre before any dynamics"""
    return float(profile.u_c + N * profile.radial(r0))


def _merge_periodic(labels: np.ndarray, n: int) -> np.ndarray:
    parent = list(range(n + 1))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in ((labels[0, :], labels[-1, :]), (labels[:, 0], labels[:, -1])):
        for la, lb in zip(a, b):
            if la and lb:
                ra, rb = find(la), find(lb)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    lookup = np.array([find(i) for i in range(n + 1)])
    return lookup[labels]


def detect_spots(fld: Field2D, u_c: float, threshold_fraction: float = 0.5) -> SpotTrack:
    """Weighted centroids of the 4-connected (periodic) components of {u - u_c > frac * max}"""
    W = fld.u - u_c
    peak = float(np.max(W))
    if not peak > 1e-8 * max(1.0, abs(u_c)):
        return SpotTrack(fld.t, [])
    mask = W > threshold_fraction * peak
    labels, n = ndimage.label(mask)
    if n == 0:
        return SpotTrack(fld.t, [])
    labels = _merge_periodic(labels, n)

    grid = fld.grid
    X, Y = grid.mesh()
    centers = []
    for lab in np.unique(labels[labels > 0]):
        sel = labels == lab
        w = W[sel]
        i = int(np.argmax(w))
        x0, y0 = X[sel][i], Y[sel][i]
        ox = grid.wrap(X[sel] - x0)
        oy = grid.wrap(Y[sel] - y0)
        cx = x0 + float(np.sum(w * ox) / np.sum(w))
        cy = y0 + float(np.sum(w * oy) / np.sum(w))
        centers.append((float(grid.wrap(np.array(cx))), float(grid.wrap(np.array(cy)))))
    centers.sort(key=lambda c: (math.atan2(c[1], c[0]), c[0]))
    return SpotTrack(fld.t, centers)


def track_radius(track: SpotTrack, grid: Grid) -> float:
    """Mean minimal-image distance of the spots to their centroid"""
    if track.count == 0:
        return math.nan
    pts = np.array(track.centers)
    ref = pts[0]
    rel = grid.wrap(pts - ref)
    centroid = rel.mean(axis=0)
    return float(np.mean(np.hypot(*(rel - centroid).T)))


def tracks_to_frame(tracks: Sequence[SpotTrack]) -> pd.DataFrame:
    width = max((tr.count for tr in tracks), default=0)
    rows = []
    for tr in tracks:
        row = {"t": tr.t, "count": tr.count}
        for k in range(width):
            x, y = tr.centers[k] if k < tr.count else (math.nan, math.nan)
            row[f"x_{k + 1}"] = x
            row[f"y_{k + 1}"] = y
        rows.append(row)
    return pd.DataFrame(rows)


@dataclass
class PdeRunConfig:
    N: int = 3
    r0: float = 0.178
    phase: float = 0.0
    nx: int = 128
    ny: int = 128
    L: float = 1.0
    dt: float = 0.05
    t_end: float = 100.0
    record_every: float = 1.0
    steady_tol: float = 1e-7
    threshold_fraction: float = 0.5
    kick: Optional[Tuple[float, float]] = None
    stop_on_count_change: bool = True
    snapshot_every: Optional[float] = None

    @property
    def grid(self) -> Grid:
        return Grid(self.nx, self.ny, self.L)


@dataclass
class PdeRunResult:
    config: PdeRunConfig
    tracks: List[SpotTrack]
    termination: str
    t_final: float
    wall_time: float
    final: Field2D
    snapshots: List[Field2D] = field(default_factory=list)
    events: List[Dict[str, float]] = field(default_factory=list)

    def summary(self) -> dict:
        last = self.tracks[-1] if self.tracks else None
        return {
            "termination": self.termination,
            "t_final": self.t_final,
            "wall_time": self.wall_time,
            "initial_count": self.tracks[0].count if self.tracks else 0,
            "final_count": last.count if last else 0,
            "final_radius": track_radius(last, self.final.grid) if last else math.nan,
            "events": list(self.events),
        }


def run(config: PdeRunConfig, params: PdeParams, profile: SpotProfile,
        initial: Optional[Field2D] = None) -> PdeRunResult:
    """Step the field, record spot tracks every record_every, stop on steady state or count change"""
    started = time.perf_counter()
    grid = config.grid
    solver = PseudoSpectralSolver(params, grid, config.dt)
    fld = initial if initial is not None else init_ring(config.N, config.r0, profile, grid, phase=config.phase)
    if config.kick is not None:
        first = ring_centers(config.N, config.r0, phase=config.phase)[0]
        fld = kick_spot(fld, profile, first, complex(*config.kick))

    record_steps = max(1, int(round(config.record_every / config.dt)))
    snap_steps = None if config.snapshot_every is None else max(1, int(round(config.snapshot_every / config.dt)))
    n_steps = int(math.ceil((config.t_end - fld.t) / config.dt - 1e-9))

    tracks = [detect_spots(fld, solver.u_c, config.threshold_fraction)]
    initial_count = tracks[0].count
    snapshots = [fld.copy()] if snap_steps else []
    events: List[Dict[str, float]] = []
    termination = COMPLETED
    logger.info(f"PDE run: N={config.N} r0={config.r0} tau={params.tau} grid {grid.nx}x{grid.ny} "
                f"dt={config.dt} t_end={config.t_end}")

    for n in range(1, n_steps + 1):
        prev = fld
        try:
            fld = solver.step(fld)
        except BlowUpError as e:
            logger.error(str(e))
            events.append({"t": e.t, "kind": BLOW_UP})
            termination = BLOW_UP
            break
        if snap_steps and n % snap_steps == 0:
            snapshots.append(fld.copy())
        if n % record_steps and n != n_steps:
            continue
        track = detect_spots(fld, solver.u_c, config.threshold_fraction)
        tracks.append(track)
        if track.count != initial_count:
            kind = "birth" if track.count > initial_count else "death"
            events.append({"t": fld.t, "kind": kind, "from": initial_count, "to": track.count})
            logger.warning(f"Spot {kind} at t={fld.t:.3f}: {initial_count} -> {track.count}")
            if config.stop_on_count_change:
                termination = COUNT_CHANGE
                break
        change = float(np.max(np.abs(fld.u - prev.u)))
        if change < config.steady_tol:
            termination = STEADY
            break

    wall = time.perf_counter() - started
    logger.info(f"PDE run finished: {termination} at t={fld.t:.3f} ({wall:.1f}s)")
    return PdeRunResult(config=config, tracks=tracks, termination=termination, t_final=fld.t,
                        wall_time=wall, final=fld, snapshots=snapshots, events=events)


def spot_speed(tracks: Sequence[SpotTrack], grid: Grid, window: int = 5) -> float:
    """Mean speed of a single spot over the last `window` records"""
    usable = [tr for tr in tracks if tr.count == 1][-(window + 1):]
    if len(usable) < 2:
        return math.nan
    pts = np.array([tr.centers[0] for tr in usable])
    steps = grid.wrap(np.diff(pts, axis=0))
    dt = usable[-1].t - usable[0].t
    return float(np.sum(np.hypot(*steps.T)) / dt) if dt > 0 else math.nan


_HEADER = struct.Struct("<qqdd")


def write_snapshot(fld: Field2D, path: Union[str, Path]) -> Path:
    """nx, ny (int64), L, t (float64), then u and v row-major as little-endian float64"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(fld.nx, fld.ny, fld.L, fld.t))
        fh.write(np.ascontiguousarray(fld.u, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(fld.v, dtype="<f8").tobytes())
    return path


def read_snapshot(path: Union[str, Path]) -> Field2D:
    data = Path(path).read_bytes()
    nx, ny, L, t = _HEADER.unpack_from(data, 0)
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * nx * ny:
        raise ValueError(f"snapshot body has {body.size} values, expected {2 * nx * ny}")
    u = body[:nx * ny].reshape(nx, ny).copy()
    v = body[nx * ny:].reshape(nx, ny).copy()
    return Field2D(Grid(int(nx), int(ny), float(L)), u, v, float(t))
