import csv
import io
import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from app.core.exceptions import DataIngestError, DegenerateDataError, ScalingLawError
from app.scaling.models import DataSeries, LawForm, ScalingFit
from config.laws import REFERENCE_LAWS
from config.planner_config import FitterConfig

logger = logging.getLogger(__name__)

CSV_HEADER = ("x", "y")


def r_squared(y: np.ndarray, fitted: np.ndarray) -> float:
    """Coefficient of determination against the mean-model baseline."""
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def parse_series_csv(text: str, source: str = "<string>") -> DataSeries:
    """
    Parse an ``x,y`` CSV into a sorted DataSeries.

    Raises:
        DataIngestError: On an empty file, a wrong header or an unparsable row
        DuplicateXError: If two rows share the same x
        NonPositiveXError: If any x <= 0
    """
    rows = [row for row in csv.reader(io.StringIO(text)) if row and any(cell.strip() for cell in row)]
    if not rows:
        raise DataIngestError(f"{source}: empty file")
    header = tuple(cell.strip() for cell in rows[0])
    if header != CSV_HEADER:
        raise DataIngestError(f"{source}: expected header 'x,y', got '{','.join(header)}'")

    points = []
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) != 2:
            raise DataIngestError(f"{source}: row {lineno} must have 2 columns, got {len(row)}")
        try:
            points.append((float(row[0]), float(row[1])))
        except ValueError as e:
            raise DataIngestError(f"{source}: row {lineno}: {e}") from e
    return DataSeries.from_points(points)


def ingest_csv(path: Union[str, Path]) -> DataSeries:
    """Read an ``x,y`` measurement CSV from disk."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise DataIngestError(f"Cannot read {path}: {e}") from e
    return parse_series_csv(text, source=str(path))


def reference_fit(name: str) -> ScalingFit:
    """Return a published law from ``config.laws`` as an unfitted ScalingFit."""
    try:
        form, params, x_label, y_label = REFERENCE_LAWS[name]
    except KeyError as e:
        raise ScalingLawError(f"Unknown reference law '{name}'; known: {', '.join(REFERENCE_LAWS)}") from e
    return ScalingFit(
        form=LawForm(form), params=tuple(params), r_squared=None, n_points=0, x_label=x_label, y_label=y_label
    )


class ScalingLawFitter:
    """Least-squares fitting of the log-linear and inverse-square-root laws."""

    def __init__(self, fitter_config: Optional[FitterConfig] = None) -> None:
        self.config = fitter_config or FitterConfig()

    def fit(self, series: DataSeries, form: LawForm) -> ScalingFit:
        """
        Fit a law form to a series.

        Log forms are solved by ordinary least squares on the transformed abscissa.
        The inverse-square-root form uses damped Gauss-Newton iterations; when the
        iteration limit is hit, or the damping saturates away from a stationary
        point, the best parameters so far are returned with ``converged=False``.

        Args:
            series (DataSeries): Measurements
            form (LawForm): Law to fit

        Returns:
            ScalingFit: Parameters, R^2 and point count

        Raises:
            DegenerateDataError: If there are fewer points than parameters or the abscissae carry no spread
        """
        if len(series) < form.n_params:
            raise DegenerateDataError(
                f"{form.value} has {form.n_params} parameters but the series has {len(series)} points"
            )
        x, y = series.x, series.y
        if form == LawForm.INVSQRT:
            params, converged = self._fit_invsqrt(x, y)
        else:
            params, converged = self._fit_log(x, y, form), True

        fitted = form.evaluate(params, x)
        fit = ScalingFit(
            form=form,
            params=tuple(float(p) for p in params),
            r_squared=r_squared(y, fitted),
            n_points=len(series),
            converged=converged,
            x_label=series.x_label,
            y_label=series.y_label,
        )
        logger.debug("Fitted %s: params=%s r2=%s", form.value, fit.params, fit.r_squared)
        return fit

    def _fit_log(self, x: np.ndarray, y: np.ndarray, form: LawForm) -> Tuple[float, float]:
        t = np.log10(x) if form == LawForm.LOG10 else np.log2(x)
        if np.ptp(t) == 0.0:
            raise DegenerateDataError("All transformed x values are equal")
        design = np.column_stack([t, np.ones_like(t)])
        (alpha, beta), *_ = np.linalg.lstsq(design, y, rcond=None)
        return float(alpha), float(beta)

    def _fit_invsqrt(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, bool]:
        cfg = self.config
        form = LawForm.INVSQRT
        x_min = float(np.min(x))

        c3 = float(np.min(y)) - 1.0
        theta = np.array([float(np.max(y)) - c3, float(np.median(x)), c3])
        lam = cfg.LAMBDA_INIT
        sse = float(np.sum((y - form.evaluate(theta, x)) ** 2))

        for iteration in range(1, cfg.MAX_ITER + 1):
            c1, c2, _ = theta
            root = np.sqrt(1.0 + c2 / x)
            jac = np.column_stack([root, c1 / (2.0 * x * root), np.ones_like(x)])
            residual = y - form.evaluate(theta, x)
            normal = jac.T @ jac
            gradient = jac.T @ residual

            try:
                step = np.linalg.solve(normal + lam * np.diag(np.diag(normal)), gradient)
            except np.linalg.LinAlgError:
                step = None

            candidate = None if step is None else theta + step
            new_sse = np.inf
            if candidate is not None and candidate[1] > -x_min:
                new_sse = float(np.sum((y - form.evaluate(candidate, x)) ** 2))
            if not new_sse < sse:
                lam *= cfg.LAMBDA_UP
                if lam > cfg.LAMBDA_MAX:
                    scale = np.linalg.norm(jac, axis=0) * max(float(np.linalg.norm(y)), 1.0)
                    if np.all(np.abs(gradient) <= cfg.GTOL * scale):
                        logger.debug("LM stopped at iteration %d: no descent left", iteration)
                        return theta, True
                    logger.warning("Inverse-square-root fit stalled at iteration %d away from a minimum, sse=%g", iteration, sse)
                    return theta, False
                continue

            small_step = np.linalg.norm(step) <= cfg.XTOL * (np.linalg.norm(theta) + cfg.XTOL)
            small_drop = sse - new_sse <= cfg.FTOL * sse
            theta, sse = candidate, new_sse
            if small_step or small_drop or sse <= 1e-30:
                logger.debug("LM converged at iteration %d, sse=%g", iteration, sse)
                return theta, True
            lam /= cfg.LAMBDA_DOWN

        logger.warning("Inverse-square-root fit did not converge after %d iterations", cfg.MAX_ITER)
        return theta, False
