from enum import Enum

from pydantic import BaseModel, ConfigDict, Field


class Regime(str, Enum):
    MEMORY_BOUND = "MemoryBound"
    COMPUTE_BOUND = "ComputeBound"


class RooflinePoint(BaseModel):
    """Roofline evaluation of one (b, top_k) deployment point."""
    model_config = ConfigDict(frozen=True)

    b: int = Field(ge=1)
    top_k: int = Field(ge=0)
    t_acc: float = Field(ge=0)
    intensity: float
    regime: Regime
    compute_s: float
    memory_s: float
    latency_s: float = Field(gt=0)
    throughput_tps: float = Field(ge=0)


class PlanStatus(str, Enum):
    OPTIMAL = "Optimal"
    # Intensity at top_k = 1 already reaches the knee.
    ALREADY_COMPUTE_BOUND = "AlreadyComputeBound"
    # Intensity stays below the knee up to the search cap.
    NO_ROOT = "NoRoot"


class PlanResult(BaseModel):
    """Optimal top_k for one batch size."""
    model_config = ConfigDict(frozen=True)

    b: int
    s_pre: int
    optimal_topk_real: float = Field(gt=0)
    optimal_topk_int: int = Field(ge=1)
    achieved_intensity: float
    critical_intensity: float
    throughput_at_opt: float
    speedup: float
    status: PlanStatus = PlanStatus.OPTIMAL

    @property
    def flagged(self) -> bool:
        return self.status != PlanStatus.OPTIMAL


class InterplayRow(BaseModel):
    """Throughput argmax for one (b, kappa) group of the acceptance interplay sweep."""
    model_config = ConfigDict(frozen=True)

    b: int
    kappa: float
    argmax_top_k: int
    max_throughput_tps: float
