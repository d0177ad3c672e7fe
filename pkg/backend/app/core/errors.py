# Exception hierarchy shared by the models, services, API and CLI
from typing import Optional


class SpotRingsError(ValueError):
    """Base class for every failure the toolkit raises on purpose"""


class KernelDomainError(SpotRingsError):
    def __init__(self, d: float, d_b: float):
        self.d = d
        self.d_b = d_b
        super().__init__(f"distance {d:.6g} is inside the spot core (d_b = {d_b:.6g})")


class KernelFitError(SpotRingsError):
    pass


class KernelSupportError(SpotRingsError):
    """Requested separation lies outside the quadrature box"""


class NewtonDivergenceError(SpotRingsError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"Newton iteration diverged after {iterations} steps (residual {residual:.3e})")


class NoSpotFoundError(SpotRingsError):
    pass


class DegenerateProfileError(SpotRingsError):
    pass


class BranchNotRealizableError(SpotRingsError):
    def __init__(self, n_spots: int, branch: int, reason: str = "no sign change in bracket"):
        self.n_spots = n_spots
        self.branch = branch
        super().__init__(f"branch {branch} not realizable for N={n_spots}: {reason}")


class BelowBifurcationError(SpotRingsError):
    def __init__(self, M1: float):
        self.M1 = M1
        super().__init__(f"no traveling ring below bifurcation (M1 = {M1:.3e})")


class CoreViolationError(SpotRingsError):
    def __init__(self, i: int, j: int, distance: float, t: Optional[float] = None):
        self.i = i
        self.j = j
        self.distance = distance
        self.t = t
        when = f" at t={t:.6g}" if t is not None else ""
        super().__init__(f"spots {i} and {j} closer than the core radius ({distance:.6g}){when}")


class StepSizeUnderflowError(SpotRingsError):
    def __init__(self, t: float, message: str = ""):
        self.t = t
        super().__init__(f"step size underflow at t={t:.6g} {message}".strip())


class BlowUpError(SpotRingsError):
    def __init__(self, t: float):
        self.t = t
        super().__init__(f"non-finite field values at t={t:.6g}")


class ClearanceError(SpotRingsError):
    pass


class InsufficientSamplesError(SpotRingsError):
    pass


class ModeRangeError(SpotRingsError):
    def __init__(self, m: int, n_spots: int):
        super().__init__(f"mode m={m} outside 0..{n_spots}")


class PipelineStageError(SpotRingsError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")
