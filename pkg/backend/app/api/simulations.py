# Reduced-model and PDE simulation API endpoints
from fastapi import APIRouter, HTTPException, Depends
from fastapi.concurrency import run_in_threadpool
from sqlalchemy.orm import Session
import logging

from ..core.database import get_db
from ..core.errors import SpotRingsError
from ..models.schemas import (OdeSimulationRequest, OdeSimulationResponse, PdeSimulationRequest,
                              PdeSimulationResponse)
from ..services.pde_service import PdeService
from ..services.simulation_service import SimulationService

router = APIRouter(prefix="/api/simulations", tags=["simulations"])

# Initialize services
simulation_service = SimulationService()
pde_service = PdeService()

@router.post("/ode", response_model=OdeSimulationResponse)
async def simulate_ode(request: OdeSimulationRequest, db: Session = Depends(get_db)):
    """Perturb a ring, integrate the reduced model and report the empirical verdict"""
    try:
        return await run_in_threadpool(simulation_service.run_ode, request, db)
    except SpotRingsError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logging.error(f"Simulation error: {str(e)}")
        raise HTTPException(status_code=500, detail=f"Simulation failed: {str(e)}")

@router.post("/pde", response_model=PdeSimulationResponse)
async def simulate_pde(request: PdeSimulationRequest, db: Session = Depends(get_db)):
    """Desk-scale pseudo-spectral run seeded with a ring of spots"""
    try:
        return await run_in_threadpool(pde_service.run_pde, request, db)
    except SpotRingsError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logging.error(f"PDE simulation error: {str(e)}")
        raise HTTPException(status_code=500, detail=f"PDE simulation failed: {str(e)}")
