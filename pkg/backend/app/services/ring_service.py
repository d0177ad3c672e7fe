# Ring construction and stability service
from functools import lru_cache
from typing import Dict, List, Optional
from sqlalchemy.orm import Session
import logging

from ..core.config import settings
from ..models.kernel import KernelParams, find_zeros, kernel_hash, load_kernel
from ..models.rings import (ROTATING, STATIONARY, TRAVELING, ReducedParams, RingSolution, equilibrium_residual,
                            rotating_ring_near, stationary_radius, traveling_ring)
from ..models.schemas import RingFindRequest, StabilityRequest
from ..models.stability import verdict
from .run_store import RunStore, new_run_id

logger = logging.getLogger(__name__)


@lru_cache(maxsize=16)
def cached_kernel(source: str) -> KernelParams:
    return load_kernel(source)


def build_ring(N: int, branch: int, kind: str, params: ReducedParams, kernel: KernelParams,
               angle: float = 0.0) -> RingSolution:
    """Stationary, traveling or rotating ring continuing the given binding-radius branch"""
    if kind == STATIONARY:
        return stationary_radius(N, branch, kernel)
    if kind == TRAVELING:
        return traveling_ring(N, branch, params, kernel, angle=angle)
    if kind == ROTATING:
        return rotating_ring_near(N, branch, params, kernel)
    raise ValueError(f"unknown ring kind '{kind}'")


class RingService:
    """Service for ring solutions and their linear stability"""

    def __init__(self, kernel_source: Optional[str] = None):
        self.kernel_source = kernel_source or settings.kernel_source
        self.store = RunStore()

    def kernel(self, source: Optional[str] = None) -> KernelParams:
        return cached_kernel(source or self.kernel_source)

    def find_ring(self, request: RingFindRequest, db: Optional[Session] = None) -> Dict:
        """Construct the requested ring and report its equilibrium residual"""
        try:
            kernel = self.kernel(request.kernel)
            params = ReducedParams.from_tau(request.tau, k3=request.k3, Q=request.Q)
            ring = build_ring(request.N, request.branch, request.kind, params, kernel, request.angle)
            residual = equilibrium_residual(ring, params, kernel)
            sha = kernel_hash(kernel)

            run_id = new_run_id("rings")
            result = {**ring.to_dict(), "residual": residual, "kernel_sha1": sha}
            self.store.record_run(db, run_id, "rings find", request.model_dump(), result, sha)
            self.store.record_ring(db, run_id, ring, tau=request.tau)
            logger.info(f"Found {ring.kind} ring N={ring.N} branch={ring.branch}: r0={ring.r0:.6f}")
            return result
        except Exception as e:
            logger.error(f"Ring construction error: {str(e)}")
            raise

    def stability(self, request: StabilityRequest, db: Optional[Session] = None) -> Dict:
        try:
            kernel = self.kernel(request.kernel)
            params = ReducedParams.from_tau(request.tau, k3=request.k3, Q=request.Q)
            ring = build_ring(request.N, request.branch, request.kind, params, kernel, request.angle)
            report = verdict(ring, params, kernel, eps_neutral=request.eps_neutral, full_range=request.full_range)
            sha = kernel_hash(kernel)

            result = {**report.to_dict(), "kernel_sha1": sha}
            run_id = new_run_id("stability")
            self.store.record_run(db, run_id, "stability", request.model_dump(),
                                  {"verdict": report.verdict, "margin": report.margin}, sha)
            self.store.record_ring(db, run_id, ring, tau=request.tau, verdict=report.verdict, margin=report.margin)
            return result
        except Exception as e:
            logger.error(f"Stability analysis error: {str(e)}")
            raise

    def zeros(self, source: Optional[str] = None, d_hi: float = 0.5) -> List[Dict]:
        kernel = self.kernel(source)
        return [{"d_c": z.d_c, "kind": z.kind, "index": z.index} for z in find_zeros(kernel, kernel.d_b, d_hi)]
