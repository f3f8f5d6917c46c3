import csv
import io
from enum import Enum
from typing import Dict, Iterable, Tuple

from pydantic import BaseModel, ConfigDict, Field, computed_field


class OpName(str, Enum):
    """Operators of one transformer forward pass, in execution order."""
    FC = "FC"
    QKV_PROJ = "QKV_Proj"
    SELF_ATTENTION = "Self_Attention"
    OUT_PROJ = "Out_Proj"
    UPGATE_PROJ = "UpGate_Proj"
    DOWN_PROJ = "Down_Proj"
    RESIDUAL = "Residual"
    LAYER_NORM = "LayerNorm"
    ACTIVATION = "Activation"
    LM_HEAD = "LM_Head"


# Element-wise operators; their FLOPs are not counted.
ZERO_FLOP_OPS = frozenset({OpName.RESIDUAL, OpName.LAYER_NORM, OpName.ACTIVATION})

BREAKDOWN_CSV_HEADER = ("op", "flops", "read_elems", "write_elems")


class OpCost(BaseModel):
    """FLOPs and memory accesses (in elements) of one operator."""
    model_config = ConfigDict(frozen=True)

    op_name: OpName
    flops: int = Field(ge=0)
    read_elems: int = Field(ge=0)
    write_elems: int = Field(ge=0)

    def __add__(self, other: "OpCost") -> "OpCost":
        if other.op_name != self.op_name:
            raise ValueError(f"Cannot add {other.op_name.value} to {self.op_name.value}")
        return OpCost(
            op_name=self.op_name,
            flops=self.flops + other.flops,
            read_elems=self.read_elems + other.read_elems,
            write_elems=self.write_elems + other.write_elems,
        )


class WorkloadBreakdown(BaseModel):
    """Per-operator costs of one pass or one whole decode cycle.

    Totals are derived from ``per_op`` so they always equal the exact integer sums.
    """
    model_config = ConfigDict(frozen=True)

    per_op: Tuple[OpCost, ...] = ()

    @computed_field
    @property
    def total_flops(self) -> int:
        return sum(op.flops for op in self.per_op)

    @computed_field
    @property
    def total_read(self) -> int:
        return sum(op.read_elems for op in self.per_op)

    @computed_field
    @property
    def total_write(self) -> int:
        return sum(op.write_elems for op in self.per_op)

    @computed_field
    @property
    def total_mem_elems(self) -> int:
        return self.total_read + self.total_write

    @classmethod
    def from_ops(cls, ops: Iterable[OpCost]) -> "WorkloadBreakdown":
        return cls(per_op=tuple(ops))

    def op(self, name: OpName) -> OpCost:
        """Return the cost of one operator, zero if it does not occur."""
        for cost in self.per_op:
            if cost.op_name == name:
                return cost
        return OpCost(op_name=name, flops=0, read_elems=0, write_elems=0)

    @classmethod
    def merge(cls, breakdowns: Iterable["WorkloadBreakdown"]) -> "WorkloadBreakdown":
        """
        Aggregate several breakdowns operator by operator.

        The result keeps the canonical operator order and omits operators that
        occur in none of the inputs.
        """
        merged: Dict[OpName, OpCost] = {}
        for breakdown in breakdowns:
            for cost in breakdown.per_op:
                merged[cost.op_name] = merged[cost.op_name] + cost if cost.op_name in merged else cost
        return cls(per_op=tuple(merged[name] for name in OpName if name in merged))

    def to_csv(self) -> str:
        """Render as CSV with header ``op,flops,read_elems,write_elems``."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(BREAKDOWN_CSV_HEADER)
        for cost in self.per_op:
            writer.writerow((cost.op_name.value, cost.flops, cost.read_elems, cost.write_elems))
        return buffer.getvalue()


class PassType(str, Enum):
    """The three forward passes of one draft-and-verify cycle."""
    TARGET_VERIFY = "TargetVerify"
    DRAFT_DECODE_STEP = "DraftDecodeStep"
    DRAFT_PREFILL = "DraftPrefill"


class PassKind(BaseModel):
    """One forward pass together with the number of tokens it processes."""
    model_config = ConfigDict(frozen=True)

    pass_type: PassType
    token_count: int = Field(ge=1)

    def __str__(self) -> str:
        return f"{self.pass_type.value}(s={self.token_count})"
