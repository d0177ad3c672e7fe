# Pydantic schemas for API requests, responses and run configurations
from pydantic import BaseModel, Field, field_validator
from typing import Any, Dict, List, Literal, Optional
from datetime import datetime

from .rings import Q_FIG1

RingKind = Literal["stationary", "traveling", "rotating"]


class ReducedModelInput(BaseModel):
    tau: float = Field(0.1, gt=0, description="Relaxation time of the inhibitor")
    k3: float = Field(0.3, gt=0, description="Inhibitor coupling; tau_c = 1/k3")
    Q: float = Field(Q_FIG1, gt=0, description="Single-spot coefficient (M2 = Q/k3)")
    kernel: str = Field("builtin:fig1", description="'builtin:<name>' or a kernel JSON path")


class RingFindRequest(ReducedModelInput):
    N: int = Field(..., ge=2, le=64, description="Number of spots on the ring")
    branch: int = Field(1, ge=1, le=6, description="Binding radius index (attractive zero ordinal)")
    kind: RingKind = Field("stationary", description="Ring solution kind")
    angle: float = Field(0.0, description="Heading of a traveling ring in radians")


class RingResponse(BaseModel):
    N: int
    branch: int
    kind: str
    r0: float
    v0: List[float]
    omega0: float
    residual: float
    kernel_sha1: str


class StabilityRequest(RingFindRequest):
    eps_neutral: Optional[float] = Field(None, gt=0, description="Neutral-mode threshold (default 1e-8 x scale)")
    full_range: bool = Field(False, description="Loop every mode m = 0..N-1 instead of the reduced range")


class ModeSpectrumOut(BaseModel):
    m: int
    eigenvalues: List[List[float]]
    neutral: List[bool]


class StabilityResponse(BaseModel):
    ring: Dict[str, Any]
    verdict: Literal["stable", "unstable"]
    neutral_count: int
    margin: float
    eps_neutral: float
    prefactor: float
    per_mode: List[ModeSpectrumOut]
    warnings: List[str] = []
    full_jacobian: Optional[Dict[str, Any]] = None
    kernel_sha1: str


class ZeroOut(BaseModel):
    d_c: float
    kind: str
    index: int


class OdeSimulationRequest(RingFindRequest):
    model: Optional[Literal["first", "second"]] = Field(None, description="Default: first for stationary rings below tau_c")
    perturb_mode: Optional[int] = Field(None, ge=0, description="Fourier mode of the initial perturbation")
    perturb_amplitude: float = Field(1e-4, ge=0, le=0.1, description="Relative perturbation size")
    perturb_which: Literal["position", "amplitude"] = "position"
    t_end: float = Field(1000.0, gt=0, le=1e5, description="Integration horizon")
    n_samples: int = Field(1001, ge=101, le=100_001)
    rtol: float = Field(1e-9, gt=0, lt=1)
    atol: float = Field(1e-12, gt=0, lt=1)
    seed: int = 0


class OdeSimulationResponse(BaseModel):
    run_id: str
    ring: Dict[str, Any]
    termination: str
    t_final: float
    measurement: Dict[str, Any]
    initial_deviation: float
    final_deviation: float
    growth_factor: float
    empirical_verdict: str
    trajectory_path: Optional[str] = None


class PdeSimulationRequest(BaseModel):
    N: int = Field(3, ge=1, le=12)
    branch: int = Field(2, ge=1, le=4)
    r0: Optional[float] = Field(None, gt=0, description="Ring radius; default is the stationary radius of `branch`")
    tau: float = Field(0.1, gt=0)
    nx: int = Field(128, ge=16, le=512)
    ny: int = Field(128, ge=16, le=512)
    L: float = Field(1.0, gt=0)
    dt: float = Field(0.05, gt=0, le=0.5)
    t_end: float = Field(50.0, gt=0, le=5e4)
    record_every: float = Field(1.0, gt=0)
    steady_tol: float = Field(1e-7, gt=0)
    threshold_fraction: float = Field(0.5, gt=0, lt=1)
    kick: Optional[List[float]] = Field(None, min_length=2, max_length=2, description="Displacement of spot 0")
    stop_on_count_change: bool = True
    profile_R: float = Field(0.6, gt=0)
    profile_n: int = Field(2048, ge=512)

    @field_validator("nx", "ny")
    @classmethod
    def power_of_two(cls, v: int) -> int:
        if v & (v - 1):
            raise ValueError("grid size must be a power of two")
        return v


class PdeSimulationResponse(BaseModel):
    run_id: str
    summary: Dict[str, Any]
    tracks: List[Dict[str, Any]]
    output_dir: Optional[str] = None


class TableCell(BaseModel):
    table: int
    N: int
    branch: int
    kind: str
    tau: float
    r0: Optional[float] = None
    omega0: Optional[float] = None
    speed: Optional[float] = None
    verdict: str
    margin: Optional[float] = None
    verdict_full_range: str
    growth_time: Optional[float] = Field(None, description="Time for the leading mode to grow tenfold")
    observable_verdict: str
    published_ode: str
    published_pde: str
    pde_na: bool
    match: bool


class TableResponse(BaseModel):
    table: int
    kernel_sha1: str
    matches: bool
    cells: List[TableCell]


class RunConfig(BaseModel):
    """Echoed into every output file for provenance"""

    command: str
    kernel: str = "builtin:fig1"
    parameters: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0


class RunSummary(BaseModel):
    run_id: str
    command: str
    kernel_hash: Optional[str]
    config: Dict[str, Any]
    summary: Optional[Dict[str, Any]]
    created_at: datetime


class RunListResponse(BaseModel):
    runs: List[RunSummary]


class HealthResponse(BaseModel):
    status: str
    timestamp: str
    services: Dict[str, bool]
