# Reduced-model (ODE) simulation service
from pathlib import Path
from typing import Dict, Optional
from sqlalchemy.orm import Session
import logging

import numpy as np

from ..core.errors import InsufficientSamplesError
from ..models.kernel import kernel_hash
from ..models.rings import ReducedParams
from ..models.schemas import OdeSimulationRequest
from ..models.simulator import (SpotEnsemble, SpotSimulator, measure_ring, perturb, save_trajectory,
                                shape_deviation)
from .ring_service import build_ring, cached_kernel
from .run_store import RunStore, new_run_id

logger = logging.getLogger(__name__)


class SimulationService:
    """Service for perturbation-relaxation runs of the reduced spot models"""

    def __init__(self):
        self.store = RunStore()

    def run_ode(self, request: OdeSimulationRequest, db: Optional[Session] = None,
                out_dir: Optional[Path] = None) -> Dict:
        """Seed at the requested ring, perturb, integrate and measure"""
        try:
            kernel = cached_kernel(request.kernel)
            params = ReducedParams.from_tau(request.tau, k3=request.k3, Q=request.Q)
            ring = build_ring(request.N, request.branch, request.kind, params, kernel, request.angle)
            ensemble = SpotEnsemble.from_ring(ring, params, kernel, request.model)

            if request.perturb_mode is not None:
                ensemble = perturb(ensemble, request.perturb_mode, request.perturb_amplitude,
                                   which=request.perturb_which)
            elif request.perturb_amplitude > 0:
                rng = np.random.default_rng(request.seed)
                kick = rng.standard_normal(ring.N) + 1j * rng.standard_normal(ring.N)
                ensemble.p = ensemble.p + request.perturb_amplitude * ring.r0 * kick / np.max(np.abs(kick))

            simulator = SpotSimulator(params, kernel, rtol=request.rtol, atol=request.atol)
            trajectory = simulator.integrate(ensemble, request.t_end, n_samples=request.n_samples)

            d0 = shape_deviation(ensemble.p, ring)
            d_end = shape_deviation(trajectory.p[-1], ring)
            d_peak = max(shape_deviation(p, ring) for p in trajectory.p)
            growth = d_peak / d0 if d0 > 0 else 0.0
            if trajectory.termination != "completed" or growth >= 10.0:
                empirical = "unstable"
            elif d0 > 0 and d_end <= d0 / 10.0:
                empirical = "stable"
            else:
                empirical = "inconclusive"

            try:
                measurement = measure_ring(trajectory.tail(0.5)).to_dict()
            except InsufficientSamplesError as e:
                logger.warning(f"Ring measurement skipped: {e}")
                measurement = {}

            run_id = new_run_id("odesim")
            sha = kernel_hash(kernel)
            trajectory_path = None
            if out_dir is not None:
                trajectory_path = str(save_trajectory(trajectory, Path(out_dir) / f"{run_id}.csv",
                                                      request.model_dump(), sha))

            result = {
                "run_id": run_id,
                "ring": ring.to_dict(),
                "termination": trajectory.termination,
                "t_final": float(trajectory.t[-1]),
                "measurement": measurement,
                "initial_deviation": d0,
                "final_deviation": d_end,
                "growth_factor": growth,
                "empirical_verdict": empirical,
                "trajectory_path": trajectory_path,
            }
            self.store.record_run(db, run_id, "odesim run", request.model_dump(),
                                  {k: v for k, v in result.items() if k != "ring"}, sha)
            self.store.record_ring(db, run_id, ring, tau=request.tau, verdict=empirical)
            logger.info(f"ODE run {run_id}: {empirical} (growth {growth:.3g}, {trajectory.termination})")
            return result
        except Exception as e:
            logger.error(f"Simulation error: {str(e)}")
            raise
