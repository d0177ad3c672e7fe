# Reproduction and run-history API endpoints
from fastapi import APIRouter, HTTPException, Depends, Query
from fastapi.concurrency import run_in_threadpool
from sqlalchemy.orm import Session
from typing import Optional
import logging

from ..core.config import settings
from ..core.database import get_db
from ..core.errors import SpotRingsError
from ..models.schemas import RunListResponse, TableResponse
from ..services.reproduction_service import ReproductionService, frame_records
from ..services.run_store import RunStore

router = APIRouter(tags=["reproduce"])

# Initialize services
reproduction_service = ReproductionService(settings.kernel_source, threads=settings.threads)
run_store = RunStore()

@router.get("/api/reproduce/table/{which}", response_model=TableResponse)
async def reproduce_table(which: int):
    """Stability table 1 (stationary), 2 (traveling) or 3 (rotating) for N = 2..8"""
    if which not in (1, 2, 3):
        raise HTTPException(status_code=404, detail="Table not found")
    try:
        result = await run_in_threadpool(reproduction_service.reproduce_table, which)
        return {"table": which, "kernel_sha1": result.kernel_sha1, "matches": result.matches,
                "cells": result.records()}
    except SpotRingsError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logging.error(f"Table reproduction error: {str(e)}")
        raise HTTPException(status_code=500, detail=f"Table reproduction failed: {str(e)}")

@router.get("/api/reproduce/radius-vs-n")
async def radius_vs_n(n_min: int = Query(2, ge=2), n_max: int = Query(12, le=64), max_branch: int = Query(2, ge=1, le=4)):
    """Exact ring radius against the d_c/(2 sin(pi/N)) approximation"""
    if n_max < n_min:
        raise HTTPException(status_code=422, detail="n_max must be at least n_min")
    try:
        frame = await run_in_threadpool(reproduction_service.radius_vs_N, range(n_min, n_max + 1), max_branch)
        return {"rows": frame_records(frame)}
    except Exception as e:
        logging.error(f"Radius reproduction error: {str(e)}")
        raise HTTPException(status_code=500, detail=f"Radius reproduction failed: {str(e)}")

@router.get("/api/runs", response_model=RunListResponse)
async def list_runs(command: Optional[str] = None, limit: int = Query(100, ge=1, le=1000),
                    db: Session = Depends(get_db)):
    """List stored runs, newest first"""
    try:
        return {"runs": run_store.list_runs(db, command, limit)}
    except Exception as e:
        logging.error(f"Failed to list runs: {str(e)}")
        raise HTTPException(status_code=500, detail="Failed to retrieve runs")

@router.get("/api/runs/{run_id}/rings")
async def get_run_rings(run_id: str, db: Session = Depends(get_db)):
    """Ring rows recorded by one run"""
    try:
        rings = run_store.get_rings(db, run_id)
        if not rings:
            raise HTTPException(status_code=404, detail="Run not found")
        return {"run_id": run_id, "rings": rings}
    except HTTPException:
        raise
    except Exception as e:
        logging.error(f"Failed to get run {run_id}: {str(e)}")
        raise HTTPException(status_code=500, detail="Failed to retrieve run")
