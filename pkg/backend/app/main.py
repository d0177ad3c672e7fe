# backend/app/main.py
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
import logging
from datetime import datetime

# Import API routers
from .api.rings import router as rings_router
from .api.simulations import router as simulations_router
from .api.reproduce import router as reproduce_router

# Import database setup
from .core.config import LOG_FORMAT, settings
from .core.database import engine, Base
from .models.schemas import HealthResponse

# Create tables
Base.metadata.create_all(bind=engine)

# Configure logging
logging.basicConfig(level=settings.log_level, format=LOG_FORMAT)

app = FastAPI(
    title="Spot Rings API",
    description="Ring solutions, linear stability and simulations of interacting spots with oscillatory tails",
    version="1.0.0"
)

# CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["http://localhost:3000", "http://127.0.0.1:3000"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include API routers
app.include_router(rings_router)
app.include_router(simulations_router)
app.include_router(reproduce_router)

@app.get("/")
async def root():
    return {
        "message": "Spot Rings API",
        "version": "1.0.0",
        "status": "active"
    }

@app.get("/health", response_model=HealthResponse)
async def health_check():
    from .services.ring_service import cached_kernel

    try:
        cached_kernel(settings.kernel_source)
        kernel_ok = True
    except Exception as e:
        logging.error(f"Kernel load error: {str(e)}")
        kernel_ok = False

    return {
        "status": "healthy" if kernel_ok else "degraded",
        "timestamp": datetime.now().isoformat(),
        "services": {
            "kernel": kernel_ok,
            "ring_solver": True,
            "pde_solver": True
        }
    }

if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
