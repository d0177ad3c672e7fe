# backend/app/core/database.py
from sqlalchemy import create_engine, Column, Integer, String, Float, DateTime, JSON
from sqlalchemy.orm import declarative_base, sessionmaker
from datetime import datetime

from .config import settings

# Database URL
DATABASE_URL = settings.database_url

# Create engine
connect_args = {"check_same_thread": False} if DATABASE_URL.startswith("sqlite") else {}
engine = create_engine(DATABASE_URL, connect_args=connect_args)
SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

Base = declarative_base()

# Database Models
class RunRecord(Base):
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(String, unique=True, index=True)
    command = Column(String, index=True)

    # Provenance
    config = Column(JSON)
    kernel_hash = Column(String, nullable=True)

    # Results
    summary = Column(JSON, nullable=True)

    created_at = Column(DateTime, default=datetime.utcnow)

class RingRecord(Base):
    __tablename__ = "rings"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(String, index=True)

    # Ring geometry
    N = Column(Integer)
    branch = Column(Integer)
    kind = Column(String)
    tau = Column(Float, nullable=True)
    r0 = Column(Float)
    v0_re = Column(Float, default=0.0)
    v0_im = Column(Float, default=0.0)
    omega0 = Column(Float, default=0.0)

    # Stability
    verdict = Column(String, nullable=True)
    margin = Column(Float, nullable=True)

    created_at = Column(DateTime, default=datetime.utcnow)

# Database dependency
def get_db():
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()
