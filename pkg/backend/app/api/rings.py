# Ring construction and stability API endpoints
from fastapi import APIRouter, HTTPException, Depends
from fastapi.concurrency import run_in_threadpool
from sqlalchemy.orm import Session
from typing import List, Optional
import logging

from ..core.database import get_db
from ..core.errors import SpotRingsError
from ..models.schemas import RingFindRequest, RingResponse, StabilityRequest, StabilityResponse, ZeroOut
from ..services.ring_service import RingService

router = APIRouter(prefix="/api/rings", tags=["rings"])

# Initialize service
ring_service = RingService()

@router.post("/find", response_model=RingResponse)
async def find_ring(request: RingFindRequest, db: Session = Depends(get_db)):
    """Construct a stationary, traveling or rotating N-spot ring"""
    try:
        return await run_in_threadpool(ring_service.find_ring, request, db)
    except SpotRingsError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logging.error(f"Ring construction error: {str(e)}")
        raise HTTPException(status_code=500, detail=f"Ring construction failed: {str(e)}")

@router.post("/stability", response_model=StabilityResponse)
async def ring_stability(request: StabilityRequest, db: Session = Depends(get_db)):
    """Per-mode spectra and the stable/unstable verdict of a ring"""
    try:
        return await run_in_threadpool(ring_service.stability, request, db)
    except SpotRingsError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logging.error(f"Stability analysis error: {str(e)}")
        raise HTTPException(status_code=500, detail=f"Stability analysis failed: {str(e)}")

@router.get("/zeros", response_model=List[ZeroOut])
async def kernel_zeros(kernel: Optional[str] = None, d_hi: float = 0.5):
    """Classified zeros of the interaction kernel on (d_b, d_hi)"""
    try:
        return ring_service.zeros(kernel, d_hi)
    except SpotRingsError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logging.error(f"Kernel zeros error: {str(e)}")
        raise HTTPException(status_code=500, detail=f"Failed to find kernel zeros: {str(e)}")
