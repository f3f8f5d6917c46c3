import logging
import math
from typing import List, Optional, Tuple, Union

from app.core.models import DeployConfig, ModelSpec
from app.workload.models import OpCost, OpName, PassKind, PassType, WorkloadBreakdown

logger = logging.getLogger(__name__)

Number = Union[int, float]


def prefill_token_count(t_acc: float) -> int:
    """Round the average accepted count half-up to a positive integer token count."""
    return max(1, math.floor(t_acc + 0.5))


def op_rows(
    spec: ModelSpec, b: Number, s: Number, s_pre: Number, with_fc: bool, layers: int
) -> List[Tuple[OpName, Number, Number, Number]]:
    """
    Per-operator (flops, reads, writes) of one forward pass.

    The arithmetic is generic: integer arguments give exact integer counts, real
    token counts give the continuous relaxation used by the planner. Per-layer rows
    are already multiplied by ``layers``; FC and LM_Head are counted once.
    """
    h, h_kv, h_mlp, vocab = spec.hidden_dim, spec.kv_dim, spec.mlp_dim, spec.vocab
    bs = b * s
    ctx = s + s_pre

    rows = []
    if with_fc:
        rows.append((OpName.FC, 4 * bs * h * h, 2 * bs * h + 2 * h * h, bs * h))

    per_layer = [
        # QKV reads include the bias term (h + 1); bias FLOPs are not counted.
        (OpName.QKV_PROJ, 2 * bs * h * (h + 2 * h_kv), bs * h + (h + 1) * (h + 2 * h_kv), bs * (h + 2 * h_kv)),
        (OpName.SELF_ATTENTION, 4 * bs * ctx * h, bs * h + 2 * b * ctx * h_kv, bs * h),
        (OpName.OUT_PROJ, 2 * bs * h * h, bs * h + h * h, bs * h),
        (OpName.UPGATE_PROJ, 4 * bs * h * h_mlp, 2 * (bs * h + h * h_mlp), 2 * bs * h_mlp),
        (OpName.DOWN_PROJ, 2 * bs * h * h_mlp, bs * h_mlp + h * h_mlp, bs * h),
        (OpName.RESIDUAL, 0, 4 * bs * h, 2 * bs * h),
        (OpName.LAYER_NORM, 0, 2 * (h + bs * h), 2 * bs * h),
        (OpName.ACTIVATION, 0, 2 * bs * h_mlp, bs * h_mlp),
    ]
    rows.extend((name, layers * f, layers * r, layers * w) for name, f, r, w in per_layer)
    rows.append((OpName.LM_HEAD, 2 * bs * h * vocab, bs * h + h * vocab, bs * vocab))
    return rows


class WorkloadModel:
    """FLOP and memory-access accounting for the passes of one speculative decode cycle."""

    def __init__(self, spec: ModelSpec) -> None:
        self.spec = spec

    def op_costs(self, b: int, s: int, s_pre: int, with_fc: bool, layers: int) -> WorkloadBreakdown:
        """
        Exact per-operator costs of one forward pass.

        Args:
            b (int): Batch size, >= 1
            s (int): Tokens processed per sequence, >= 1
            s_pre (int): Cached context length, >= 0
            with_fc (bool): Whether the pass starts with the draft's fusion FC layer
            layers (int): Decoder layers, >= 1

        Returns:
            WorkloadBreakdown: One OpCost per operator

        Raises:
            ValueError: If a size is out of range
        """
        if b < 1 or s < 1 or layers < 1 or s_pre < 0:
            raise ValueError(f"Invalid pass sizes b={b}, s={s}, s_pre={s_pre}, layers={layers}")
        return WorkloadBreakdown.from_ops(
            OpCost(op_name=name, flops=f, read_elems=r, write_elems=w)
            for name, f, r, w in op_rows(self.spec, int(b), int(s), int(s_pre), with_fc, int(layers))
        )

    def pass_kind(self, deploy: DeployConfig, pass_type: PassType) -> PassKind:
        """Token count of a pass: top_k + 1 for verification, k per draft step, rounded t_acc for prefill."""
        if pass_type == PassType.TARGET_VERIFY:
            tokens = deploy.topk_paths + 1
        elif pass_type == PassType.DRAFT_DECODE_STEP:
            tokens = deploy.draft_tokens
        else:
            tokens = prefill_token_count(deploy.accepted_tokens)
        return PassKind(pass_type=pass_type, token_count=tokens)

    def pass_workload(self, deploy: DeployConfig, pass_kind: Union[PassType, PassKind]) -> WorkloadBreakdown:
        """
        Workload of one pass of the cycle.

        A bare PassType takes its token count from the deployment; a PassKind keeps its own.
        """
        if isinstance(pass_kind, PassType):
            pass_kind = self.pass_kind(deploy, pass_kind)
        if pass_kind.pass_type == PassType.TARGET_VERIFY:
            layers, with_fc = self.spec.target_layers, False
        else:
            layers, with_fc = self.spec.draft_layers, True
        return self.op_costs(deploy.batch, pass_kind.token_count, deploy.prefill_len, with_fc, layers)

    def cycle_breakdown(
        self, deploy: DeployConfig, draft_steps: Optional[int] = None
    ) -> List[Tuple[PassKind, int, WorkloadBreakdown]]:
        """
        The passes of one cycle as (pass, repetitions, single-pass workload).

        Args:
            deploy (DeployConfig): Deployment point
            draft_steps (int, optional): Overrides the model's D; 0 leaves only verify and prefill

        Returns:
            list: TargetVerify, DraftDecodeStep and DraftPrefill entries in that order
        """
        steps = self.spec.draft_steps if draft_steps is None else draft_steps
        if steps < 0:
            raise ValueError(f"draft_steps must be non-negative, got {steps}")
        return [
            (self.pass_kind(deploy, pass_type), count, self.pass_workload(deploy, pass_type))
            for pass_type, count in (
                (PassType.TARGET_VERIFY, 1),
                (PassType.DRAFT_DECODE_STEP, steps),
                (PassType.DRAFT_PREFILL, 1),
            )
            if count > 0
        ]

    def cycle_workload(self, deploy: DeployConfig, draft_steps: Optional[int] = None) -> WorkloadBreakdown:
        """Total workload of one cycle: 1 TargetVerify + D DraftDecodeStep + 1 DraftPrefill."""
        parts = []
        for _, count, breakdown in self.cycle_breakdown(deploy, draft_steps):
            parts.extend([breakdown] * count)
        cycle = WorkloadBreakdown.merge(parts)
        logger.debug(
            "Cycle workload b=%d top_k=%d: %d FLOPs, %d elements",
            deploy.batch, deploy.topk_paths, cycle.total_flops, cycle.total_mem_elems,
        )
        return cycle

    def cycle_totals(
        self, b: int, s_pre: int, draft_tokens: int, topk: float, prefill_tokens: float
    ) -> Tuple[float, float]:
        """
        Continuous (flops, memory elements) of one cycle for a real-valued top_k.

        Token counts enter the same per-operator polynomials as in ``op_costs``
        without rounding, so the result interpolates the integer workload.
        """
        spec = self.spec
        passes = [
            (1, topk + 1.0, False, spec.target_layers),
            (spec.draft_steps, float(draft_tokens), True, spec.draft_layers),
            (1, max(1.0, prefill_tokens), True, spec.draft_layers),
        ]
        flops = mem = 0.0
        for count, tokens, with_fc, layers in passes:
            for _, f, r, w in op_rows(spec, float(b), tokens, float(s_pre), with_fc, layers):
                flops += count * f
                mem += count * (r + w)
        return flops, mem
