# Pseudo-spectral PDE runs: ring initialization, spot tracking, outputs
from pathlib import Path
from typing import Dict, Optional
from sqlalchemy.orm import Session
import logging

import numpy as np

from ..core.outputs import write_csv, write_json
from ..models.pde_solver import (Field2D, Grid, PdeRunConfig, PseudoSpectralSolver, homogeneous_field, run,
                                 spot_field, spot_speed, tracks_to_frame, write_snapshot)
from ..models.profile import PdeParams
from ..models.rings import stationary_radius
from ..models.schemas import PdeSimulationRequest
from .profile_service import ProfileService
from .ring_service import cached_kernel
from .run_store import RunStore, new_run_id

logger = logging.getLogger(__name__)


class PdeService:
    """Service for desk-scale PDE runs that check the reduced-model predictions"""

    def __init__(self, profile_service: Optional[ProfileService] = None):
        self.profile_service = profile_service or ProfileService()
        self.store = RunStore()

    def config_from_request(self, request: PdeSimulationRequest, kernel_source: str = "builtin:fig1") -> PdeRunConfig:
        r0 = request.r0
        if r0 is None:
            r0 = stationary_radius(request.N, request.branch, cached_kernel(kernel_source)).r0 if request.N > 1 else 0.0
        return PdeRunConfig(N=request.N, r0=r0, nx=request.nx, ny=request.ny, L=request.L, dt=request.dt,
                            t_end=request.t_end, record_every=request.record_every, steady_tol=request.steady_tol,
                            threshold_fraction=request.threshold_fraction,
                            kick=tuple(request.kick) if request.kick else None,
                            stop_on_count_change=request.stop_on_count_change)

    def run_pde(self, request: PdeSimulationRequest, db: Optional[Session] = None,
                out_dir: Optional[Path] = None) -> Dict:
        try:
            params = PdeParams.fig1(tau=request.tau)
            profile = ProfileService(request.profile_R, request.profile_n).profile(params)
            config = self.config_from_request(request)
            result = run(config, params, profile)

            run_id = new_run_id("pdesim")
            summary = {**result.summary(), "config": request.model_dump()}
            frame = tracks_to_frame(result.tracks)
            if out_dir is not None:
                target = Path(out_dir) / run_id
                write_csv(frame, target / "tracks.csv", request.model_dump())
                write_snapshot(result.final, target / "final.bin")
                for i, snap in enumerate(result.snapshots):
                    write_snapshot(snap, target / f"snapshot_{i:04d}.bin")
                write_json(summary, target / "summary.json")
            self.store.record_run(db, run_id, "pdesim run", request.model_dump(), result.summary())
            return {
                "run_id": run_id,
                "summary": result.summary(),
                "tracks": frame.to_dict(orient="records"),
                "output_dir": str(Path(out_dir) / run_id) if out_dir is not None else None,
            }
        except Exception as e:
            logger.error(f"PDE simulation error: {str(e)}")
            raise

    def relax_single_spot(self, params: PdeParams, grid: Grid, t_end: float = 50.0, dt: float = 0.05,
                          scale: float = 0.8) -> Field2D:
        """Embed a scaled-down spot at the origin and let it relax"""
        profile = self.profile_service.profile(params)
        u = spot_field(grid, profile.scaled(scale), [0j])
        fld = Field2D(grid, u, u.copy(), 0.0)
        solver = PseudoSpectralSolver(params, grid, dt)
        return solver.advance(fld, int(round(t_end / dt)))

    def drift_speed(self, tau: float, grid: Optional[Grid] = None, kick: complex = 0.01 + 0j, t_end: float = 200.0,
                    dt: float = 0.05, record_every: float = 5.0) -> float:
        """Late-time speed of a single kicked spot at the given tau"""
        grid = grid or Grid(128, 128, 1.0)
        base = PdeParams.fig1()
        params = base.with_tau(tau)
        profile = self.profile_service.profile(base)
        config = PdeRunConfig(N=1, r0=0.0, nx=grid.nx, ny=grid.ny, L=grid.L, dt=dt, t_end=t_end,
                              record_every=record_every, kick=(kick.real, kick.imag), steady_tol=0.0)
        result = run(config, params, profile)
        speed = spot_speed(result.tracks, grid)
        logger.info(f"Single-spot drift at tau={tau}: speed {speed:.3e}")
        return speed

    def drift_onset(self, delta: float = 0.3, **kwargs) -> Dict:
        """Bracket the drift bifurcation: speeds just below and above tau_c = 1/k3"""
        tau_c = PdeParams.fig1().tau_c
        below = self.drift_speed(tau_c - delta, **kwargs)
        above = self.drift_speed(tau_c + delta, **kwargs)
        return {"tau_c": tau_c, "tau_below": tau_c - delta, "speed_below": below,
                "tau_above": tau_c + delta, "speed_above": above}


def homogeneous_decays(params: PdeParams, grid: Grid, amplitude: float = 1e-3, t_end: float = 20.0,
                       dt: float = 0.05, seed: int = 0) -> bool:
    """Small random perturbations of (u_c, u_c) shrink"""
    fld = homogeneous_field(grid, params)
    rng = np.random.default_rng(seed)
    noise = amplitude * rng.standard_normal(fld.u.shape)
    start = Field2D(grid, fld.u + noise, fld.v.copy(), 0.0)
    solver = PseudoSpectralSolver(params, grid, dt)
    end = solver.advance(start, int(round(t_end / dt)))
    return float(np.max(np.abs(end.u - fld.u))) < float(np.max(np.abs(noise)))
