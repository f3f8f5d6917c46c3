"""Acceptance-rate models: accepted tokens per cycle as a function of top_k."""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict

from app.core.exceptions import AcceptanceModelError
from config.planner_config import PlannerConfig


class AcceptanceForm(str, Enum):
    CONSTANT = "const"
    # t_acc(top_k) = -6.25 * (0.2 * kappa) ** (top_k / 30) + 6
    SATURATING = "eq8"


class AcceptanceModel(BaseModel):
    """t_acc as a constant or as the saturating top_k law scaled by kappa."""
    model_config = ConfigDict(frozen=True)

    form: AcceptanceForm
    value: float

    @classmethod
    def constant(cls, t_acc: float) -> "AcceptanceModel":
        if not t_acc > 0:
            raise AcceptanceModelError(f"Constant acceptance must be positive, got {t_acc}")
        return cls(form=AcceptanceForm.CONSTANT, value=float(t_acc))

    @classmethod
    def saturating(cls, kappa: float, planner_config: Optional[PlannerConfig] = None) -> "AcceptanceModel":
        low, high = (planner_config or PlannerConfig()).KAPPA_RANGE
        if not low <= kappa <= high:
            raise AcceptanceModelError(f"kappa must lie in [{low}, {high}], got {kappa}")
        return cls(form=AcceptanceForm.SATURATING, value=float(kappa))

    @classmethod
    def parse(cls, text: str) -> "AcceptanceModel":
        """
        Parse ``const:<t_acc>`` or ``eq8:<kappa>``.

        Raises:
            AcceptanceModelError: On unknown forms, bad numbers or kappa out of range
        """
        name, sep, raw = text.partition(":")
        if not sep:
            raise AcceptanceModelError(f"Invalid acceptance model '{text}': expected const:<v> or eq8:<kappa>")
        try:
            number = float(raw)
        except ValueError as e:
            raise AcceptanceModelError(f"Invalid acceptance model '{text}': {e}") from e

        name = name.strip().lower()
        if name == AcceptanceForm.CONSTANT.value:
            return cls.constant(number)
        if name in (AcceptanceForm.SATURATING.value, "sat"):
            return cls.saturating(number)
        raise AcceptanceModelError(f"Unknown acceptance model '{name}': expected const or eq8")

    def accepted_tokens(self, topk: float) -> float:
        """Accepted tokens per cycle at ``topk`` verified nodes; the saturating law is clamped to [0, top_k + 1]."""
        if self.form == AcceptanceForm.CONSTANT:
            return self.value
        raw = -6.25 * (0.2 * self.value) ** (topk / 30.0) + 6.0
        return min(max(raw, 0.0), topk + 1.0)

    def __str__(self) -> str:
        return f"{self.form.value}:{self.value!r}"
