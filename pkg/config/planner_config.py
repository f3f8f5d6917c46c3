"""Configuration module for planner, fitter and simulator settings."""

from dataclasses import dataclass, field
from typing import Tuple


@dataclass(frozen=True)
class PlannerConfig:
    """Settings for the roofline planner and its sweeps.

    Attributes:
        SOLVER_REL_TOL: Relative bracket width at which bisection stops.
        TOPK_CAP: Largest top_k the planner searches before flagging NoRoot.
        DEFAULT_DRAFT_TOKENS: Tokens fed per draft step (k) when no deploy config is given.
        DEFAULT_TOPK_RANGE: Default (start, stop, step) for throughput curves.
        INTERPLAY_BATCHES: Batch sizes of the acceptance-rate interplay sweep.
        INTERPLAY_KAPPAS: Acceptance scaling factors of the interplay sweep.
        KAPPA_RANGE: Closed interval allowed for the acceptance scaling factor.
    """

    SOLVER_REL_TOL: float = 1e-9
    TOPK_CAP: int = 2 ** 20
    DEFAULT_DRAFT_TOKENS: int = 10
    DEFAULT_TOPK_RANGE: Tuple[int, int, int] = (1, 257, 1)
    INTERPLAY_BATCHES: Tuple[int, ...] = (16, 32, 64)
    INTERPLAY_KAPPAS: Tuple[float, ...] = (0.9, 1.0, 1.1, 1.2)
    KAPPA_RANGE: Tuple[float, float] = (0.9, 1.2)


@dataclass(frozen=True)
class FitterConfig:
    """Settings for the Levenberg-Marquardt fit of the inverse-square-root law.

    Attributes:
        MAX_ITER: Iteration limit before the fit is flagged as not converged.
        LAMBDA_INIT: Initial damping.
        LAMBDA_UP: Damping multiplier after a rejected step.
        LAMBDA_DOWN: Damping divisor after an accepted step.
        LAMBDA_MAX: Damping beyond which no descent direction is left.
        XTOL: Relative step size treated as converged.
        FTOL: Relative reduction of the residual sum treated as converged.
        GTOL: Gradient size, relative to the Jacobian columns and the data, below which
            a stall in the damping counts as converged.
    """

    MAX_ITER: int = 500
    LAMBDA_INIT: float = 1e-3
    LAMBDA_UP: float = 10.0
    LAMBDA_DOWN: float = 10.0
    LAMBDA_MAX: float = 1e16
    XTOL: float = 1e-12
    FTOL: float = 1e-15
    GTOL: float = 1e-8


@dataclass(frozen=True)
class SimConfig:
    """Settings for the toy speculative-decoding simulator.

    Attributes:
        MAX_VOCAB: Largest vocabulary a ToyLM may declare.
        ROW_TOLERANCE: Allowed deviation of a probability row sum from 1.
        BEGIN_SYMBOL: Spelling of the begin token in ToyLM files.
        CSV_COLUMNS: Header of the per-cycle simulation report.
    """

    MAX_VOCAB: int = 16
    ROW_TOLERANCE: float = 1e-12
    BEGIN_SYMBOL: str = "^"
    CSV_COLUMNS: Tuple[str, ...] = field(
        default_factory=lambda: ("cycle", "accepted_count", "rejected_at", "replacement_token")
    )
