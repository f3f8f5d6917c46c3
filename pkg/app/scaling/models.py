import json
import math
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from app.core.exceptions import DataIngestError, DomainError, DuplicateXError, NonPositiveXError


class LawForm(str, Enum):
    """Functional forms of the empirical scaling laws."""
    LOG10 = "log10"  # y = a * log10(x) + b
    LOG2 = "log2"  # y = a * log2(x) + b
    INVSQRT = "invsqrt"  # y = c1 * sqrt(1 + c2 / x) + c3

    @property
    def n_params(self) -> int:
        return 3 if self == LawForm.INVSQRT else 2

    def evaluate(self, params: Sequence[float], x):
        """Evaluate the form at scalar or array ``x`` (no domain checks)."""
        if self == LawForm.LOG10:
            return params[0] * np.log10(x) + params[1]
        if self == LawForm.LOG2:
            return params[0] * np.log2(x) + params[1]
        c1, c2, c3 = params
        return c1 * np.sqrt(1.0 + c2 / np.asarray(x, dtype=float)) + c3


class DataSeries(BaseModel):
    """Measurement points sorted by strictly increasing positive x."""
    model_config = ConfigDict(frozen=True)

    points: Tuple[Tuple[float, float], ...]
    x_label: str = "x"
    y_label: str = "y"

    @model_validator(mode="after")
    def _check_points(self) -> "DataSeries":
        if len(self.points) < 2:
            raise DataIngestError(f"A series needs at least 2 points, got {len(self.points)}")
        for x, y in self.points:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise DataIngestError(f"Non-finite point ({x}, {y})")
            if x <= 0:
                raise NonPositiveXError(f"x must be positive, got {x}")
        xs = [x for x, _ in self.points]
        for prev, cur in zip(xs, xs[1:]):
            if cur == prev:
                raise DuplicateXError(f"Duplicate x value {cur}")
            if cur < prev:
                raise DataIngestError("Points must be sorted by x")
        return self

    @classmethod
    def from_points(cls, points, x_label: str = "x", y_label: str = "y") -> "DataSeries":
        """Build a series from unsorted (x, y) pairs."""
        ordered = sorted((float(x), float(y)) for x, y in points)
        return cls(points=tuple(ordered), x_label=x_label, y_label=y_label)

    @property
    def x(self) -> np.ndarray:
        return np.array([x for x, _ in self.points], dtype=float)

    @property
    def y(self) -> np.ndarray:
        return np.array([y for _, y in self.points], dtype=float)

    def __len__(self) -> int:
        return len(self.points)


class ScalingFit(BaseModel):
    """Fitted parameters of one law form.

    ``r_squared`` is None for laws that were not fitted here (reference constants).
    """
    model_config = ConfigDict(frozen=True)

    form: LawForm
    params: Tuple[float, ...]
    r_squared: Optional[float]
    n_points: int
    converged: bool = True
    x_label: str = "x"
    y_label: str = "y"

    def predict(self, x: float) -> float:
        """
        Evaluate the fitted law.

        Raises:
            DomainError: If x <= 0 or the inverse-square-root argument turns negative
        """
        if not x > 0:
            raise DomainError(f"Scaling laws are defined for x > 0, got {x}")
        if self.form == LawForm.INVSQRT and 1.0 + self.params[1] / x < 0:
            raise DomainError(f"x={x} lies outside the domain of the fitted law (c2={self.params[1]})")
        return float(self.form.evaluate(self.params, x))

    def report(self) -> dict:
        return {
            "form": self.form.value,
            "params": list(self.params),
            "r_squared": self.r_squared,
            "n_points": self.n_points,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(self.report(), indent=2)
