# Persistence of runs and ring results (no-op without a database session)
from typing import Any, Dict, List, Optional
from sqlalchemy.orm import Session
from datetime import datetime
import logging
import uuid

from ..core.database import RunRecord, RingRecord
from ..models.rings import RingSolution

logger = logging.getLogger(__name__)


def new_run_id(command: str) -> str:
    return f"{command}_{datetime.now().strftime('%Y%m%d_%H%M%S')}_{uuid.uuid4().hex[:6]}"


class RunStore:
    """Writes RunRecord/RingRecord rows when a session is supplied"""

    def record_run(self, db: Optional[Session], run_id: str, command: str, config: Dict[str, Any],
                   summary: Optional[Dict[str, Any]] = None, kernel_hash: Optional[str] = None):
        if db is None:
            return None
        record = RunRecord(run_id=run_id, command=command, config=config, summary=summary, kernel_hash=kernel_hash)
        db.add(record)
        db.commit()
        logger.info(f"Stored run {run_id} ({command})")
        return record

    def record_ring(self, db: Optional[Session], run_id: str, ring: RingSolution, tau: Optional[float] = None,
                    verdict: Optional[str] = None, margin: Optional[float] = None):
        if db is None:
            return None
        record = RingRecord(run_id=run_id, N=ring.N, branch=ring.branch, kind=ring.kind, tau=tau, r0=ring.r0,
                            v0_re=ring.v0.real, v0_im=ring.v0.imag, omega0=ring.omega0,
                            verdict=verdict, margin=margin)
        db.add(record)
        db.commit()
        return record

    def list_runs(self, db: Session, command: Optional[str] = None, limit: int = 100) -> List[Dict[str, Any]]:
        query = db.query(RunRecord)
        if command:
            query = query.filter(RunRecord.command == command)
        rows = query.order_by(RunRecord.created_at.desc()).limit(limit).all()
        return [
            {
                "run_id": r.run_id,
                "command": r.command,
                "kernel_hash": r.kernel_hash,
                "config": r.config,
                "summary": r.summary,
                "created_at": r.created_at,
            }
            for r in rows
        ]

    def get_rings(self, db: Session, run_id: str) -> List[Dict[str, Any]]:
        rows = db.query(RingRecord).filter(RingRecord.run_id == run_id).all()
        return [
            {"N": r.N, "branch": r.branch, "kind": r.kind, "tau": r.tau, "r0": r.r0,
             "v0": [r.v0_re, r.v0_im], "omega0": r.omega0, "verdict": r.verdict, "margin": r.margin}
            for r in rows
        ]
