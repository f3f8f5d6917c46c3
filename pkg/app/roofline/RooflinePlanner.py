import csv
import io
import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from app.core.exceptions import DataIngestError
from app.core.models import DeployConfig, HardwareSpec, ModelSpec
from app.roofline.acceptance import AcceptanceModel
from app.roofline.models import InterplayRow, PlanResult, PlanStatus, Regime, RooflinePoint
from app.scaling.models import DataSeries, LawForm, ScalingFit
from app.scaling.ScalingLawFitter import ScalingLawFitter
from app.workload.WorkloadModel import WorkloadModel, prefill_token_count
from config.planner_config import PlannerConfig

logger = logging.getLogger(__name__)

CURVE_CSV_HEADER = ("b", "top_k", "intensity", "regime", "latency_s", "throughput_tps")
INTERPLAY_CSV_HEADER = ("b", "kappa", "argmax_top_k", "max_throughput_tps")


def critical_intensity(hw: HardwareSpec) -> float:
    """Roofline knee P_peak / B_mem in FLOP per byte."""
    return hw.peak_flops / hw.mem_bandwidth


class RooflinePlanner:
    """Roofline analysis of speculative decode cycles and the batch-adaptive top_k planner."""

    def __init__(
        self,
        spec: ModelSpec,
        hw: HardwareSpec,
        planner_config: Optional[PlannerConfig] = None,
    ) -> None:
        self.spec = spec
        self.hw = hw
        self.config = planner_config or PlannerConfig()
        self.workload = WorkloadModel(spec)
        self.i_crit = critical_intensity(hw)

    def critical_intensity(self) -> float:
        return self.i_crit

    def intensity(self, deploy: DeployConfig) -> float:
        """FLOPs of one cycle divided by its bytes moved (reads and writes)."""
        cycle = self.workload.cycle_workload(deploy)
        return cycle.total_flops / (cycle.total_mem_elems * self.hw.dtype_bytes)

    def _point(self, b: int, top_k: int, t_acc: float, flops: float, mem_elems: float) -> RooflinePoint:
        compute_s = flops / self.hw.peak_flops
        memory_s = mem_elems * self.hw.dtype_bytes / self.hw.mem_bandwidth
        intensity = flops / (mem_elems * self.hw.dtype_bytes)
        latency = max(compute_s, memory_s)
        return RooflinePoint(
            b=b,
            top_k=top_k,
            t_acc=t_acc,
            intensity=intensity,
            regime=Regime.MEMORY_BOUND if intensity < self.i_crit else Regime.COMPUTE_BOUND,
            compute_s=compute_s,
            memory_s=memory_s,
            latency_s=latency,
            throughput_tps=b * t_acc / latency,
        )

    def roofline_point(self, deploy: DeployConfig, acc: Optional[AcceptanceModel] = None) -> RooflinePoint:
        """
        Evaluate one deployment point on the roofline.

        Args:
            deploy (DeployConfig): Deployment point
            acc (AcceptanceModel, optional): Source of t_acc; the deployment's own t_acc if omitted

        Returns:
            RooflinePoint: latency = max(compute time, memory time), throughput = b * t_acc / latency
        """
        sized, t_acc = self.sized_deploy(deploy, acc)
        cycle = self.workload.cycle_workload(sized)
        return self._point(deploy.batch, deploy.topk_paths, t_acc, cycle.total_flops, cycle.total_mem_elems)

    def sized_deploy(
        self, deploy: DeployConfig, acc: Optional[AcceptanceModel] = None
    ) -> Tuple[DeployConfig, float]:
        """The deployment with its prefill count taken from ``acc``, and the real t_acc."""
        t_acc = deploy.accepted_tokens if acc is None else acc.accepted_tokens(deploy.topk_paths)
        # The prefill pass only sees the rounded count, which is >= 1 even when t_acc is 0.
        return deploy.model_copy(update={"accepted_tokens": prefill_token_count(t_acc)}), t_acc

    def baseline_point(self, b: int, s_pre: int) -> RooflinePoint:
        """Plain autoregressive decoding: one single-token target pass per emitted token."""
        single = self.workload.op_costs(b, 1, s_pre, with_fc=False, layers=self.spec.target_layers)
        return self._point(b, 0, 1.0, single.total_flops, single.total_mem_elems)

    def _deploy(self, b: int, s_pre: int, top_k: int, draft_tokens: Optional[int]) -> DeployConfig:
        return DeployConfig(
            batch=b,
            prefill_len=s_pre,
            topk_paths=top_k,
            draft_tokens=draft_tokens or self.config.DEFAULT_DRAFT_TOKENS,
            accepted_tokens=1.0,
        )

    def relaxed_intensity(
        self, b: int, s_pre: int, topk: float, acc: AcceptanceModel, draft_tokens: Optional[int] = None
    ) -> float:
        """Intensity at a real-valued top_k; the prefill pass takes the unrounded t_acc."""
        k = draft_tokens or self.config.DEFAULT_DRAFT_TOKENS
        flops, mem = self.workload.cycle_totals(b, s_pre, k, topk, acc.accepted_tokens(topk))
        return flops / (mem * self.hw.dtype_bytes)

    def plan_topk(
        self, b: int, s_pre: int, acc: AcceptanceModel, draft_tokens: Optional[int] = None
    ) -> PlanResult:
        """
        Find the top_k at which the cycle's intensity reaches the roofline knee.

        The real root is bracketed by doubling from top_k = 1 and refined by
        bisection. The integer recommendation is the ceiling of the root when that
        stays at or below the knee, else the largest integer under it that does.

        Args:
            b (int): Batch size
            s_pre (int): Cached context length
            acc (AcceptanceModel): Acceptance model
            draft_tokens (int, optional): Tokens per draft step k

        Returns:
            PlanResult: Flagged AlreadyComputeBound (top_k = 1) or NoRoot (top_k = cap) when no crossing exists
        """
        cap = self.config.TOPK_CAP
        tol = self.config.SOLVER_REL_TOL

        def excess(topk: float) -> float:
            return self.relaxed_intensity(b, s_pre, topk, acc, draft_tokens) - self.i_crit

        status = PlanStatus.OPTIMAL
        if excess(1.0) >= 0:
            logger.warning("b=%d is compute-bound already at top_k=1", b)
            status, root = PlanStatus.ALREADY_COMPUTE_BOUND, 1.0
        else:
            lo, hi = 1.0, 2.0
            while excess(hi) < 0 and hi < cap:
                lo, hi = hi, min(2.0 * hi, float(cap))
            if excess(hi) < 0:
                logger.warning("b=%d: intensity stays below I_crit up to top_k=%d", b, cap)
                status, root = PlanStatus.NO_ROOT, float(cap)
            else:
                iterations = 0
                while hi - lo > tol * hi:
                    mid = 0.5 * (lo + hi)
                    if excess(mid) < 0:
                        lo = mid
                    else:
                        hi = mid
                    iterations += 1
                root = 0.5 * (lo + hi)
                logger.debug("b=%d: root %.9g after %d bisection steps", b, root, iterations)

        if status == PlanStatus.OPTIMAL:
            def over_knee(top_k: int) -> bool:
                deploy, _ = self.sized_deploy(self._deploy(b, s_pre, top_k, draft_tokens), acc)
                return self.intensity(deploy) > self.i_crit

            top_int = max(1, math.floor(root))
            if math.ceil(root) != top_int and not over_knee(math.ceil(root)):
                top_int = math.ceil(root)
            # The integer pass rounds the prefill count, so the floor itself can sit past the knee.
            while top_int > 1 and over_knee(top_int):
                top_int -= 1
        else:
            top_int = int(root)

        point = self.roofline_point(self._deploy(b, s_pre, top_int, draft_tokens), acc)
        baseline = self.baseline_point(b, s_pre)
        return PlanResult(
            b=b,
            s_pre=s_pre,
            optimal_topk_real=root,
            optimal_topk_int=top_int,
            achieved_intensity=self.relaxed_intensity(b, s_pre, root, acc, draft_tokens),
            critical_intensity=self.i_crit,
            throughput_at_opt=point.throughput_tps,
            speedup=point.throughput_tps / baseline.throughput_tps,
            status=status,
        )

    def plan_batches(
        self, batches: Sequence[int], s_pre: int, acc: AcceptanceModel, draft_tokens: Optional[int] = None
    ) -> List[PlanResult]:
        return [self.plan_topk(b, s_pre, acc, draft_tokens) for b in batches]

    @staticmethod
    def batch_laws(plans: Sequence[PlanResult], fitter: Optional[ScalingLawFitter] = None) -> Dict[str, ScalingFit]:
        """
        Fit the decoding-batch-size laws to a planner sweep.

        Returns:
            dict: ``optimal_topk`` (inverse-square-root form over b, needs 3 points)
            and ``throughput`` (log2 form over b, needs 2 points)
        """
        fitter = fitter or ScalingLawFitter()
        laws = {}
        topk = DataSeries.from_points(
            [(plan.b, plan.optimal_topk_real) for plan in plans], x_label="batch size", y_label="optimal top_k"
        )
        if len(topk) >= LawForm.INVSQRT.n_params:
            laws["optimal_topk"] = fitter.fit(topk, LawForm.INVSQRT)
        throughput = DataSeries.from_points(
            [(plan.b, plan.throughput_at_opt) for plan in plans], x_label="batch size", y_label="throughput (tokens/s)"
        )
        laws["throughput"] = fitter.fit(throughput, LawForm.LOG2)
        return laws

    def throughput_curve(
        self,
        b: int,
        s_pre: int,
        acc: AcceptanceModel,
        topk_range: Optional[Iterable[int]] = None,
        draft_tokens: Optional[int] = None,
    ) -> List[RooflinePoint]:
        """One RooflinePoint per top_k of the range, in range order."""
        if topk_range is None:
            topk_range = range(*self.config.DEFAULT_TOPK_RANGE)
        return [self.roofline_point(self._deploy(b, s_pre, top_k, draft_tokens), acc) for top_k in topk_range]

    def interplay_sweep(
        self,
        batches: Sequence[int],
        s_pre: int,
        kappas: Sequence[float],
        topk_range: Optional[Iterable[int]] = None,
        draft_tokens: Optional[int] = None,
    ) -> List[InterplayRow]:
        """
        Throughput argmax over top_k for every (b, kappa) of the saturating acceptance law.

        Rows come in grid order (b outer, kappa inner). Ties go to the smallest top_k.
        """
        topks = list(topk_range) if topk_range is not None else list(range(*self.config.DEFAULT_TOPK_RANGE))
        rows = []
        for b in batches:
            for kappa in kappas:
                curve = self.throughput_curve(b, s_pre, AcceptanceModel.saturating(kappa), topks, draft_tokens)
                best = best_point(curve)
                rows.append(
                    InterplayRow(b=b, kappa=kappa, argmax_top_k=best.top_k, max_throughput_tps=best.throughput_tps)
                )
        return rows


def best_point(points: Sequence[RooflinePoint]) -> RooflinePoint:
    """Highest-throughput point; the smallest top_k wins ties."""
    return max(points, key=lambda point: (point.throughput_tps, -point.top_k))


def write_curve_csv(points: Iterable[RooflinePoint]) -> str:
    """Render points as CSV with header ``b,top_k,intensity,regime,latency_s,throughput_tps``."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CURVE_CSV_HEADER)
    for p in points:
        writer.writerow((p.b, p.top_k, repr(p.intensity), p.regime.value, repr(p.latency_s), repr(p.throughput_tps)))
    return buffer.getvalue()


def read_curve_csv(text: str) -> List[dict]:
    """
    Parse a curve CSV back into typed rows.

    Returns:
        list: dicts keyed by the CSV header with int, float and Regime values

    Raises:
        DataIngestError: On a wrong header or an unparsable row
    """
    rows = [row for row in csv.reader(io.StringIO(text)) if row]
    if not rows or tuple(rows[0]) != CURVE_CSV_HEADER:
        raise DataIngestError(f"Expected curve header '{','.join(CURVE_CSV_HEADER)}'")
    parsed = []
    for row in rows[1:]:
        try:
            b, top_k, intensity, regime, latency, throughput = row
            parsed.append({
                "b": int(b),
                "top_k": int(top_k),
                "intensity": float(intensity),
                "regime": Regime(regime),
                "latency_s": float(latency),
                "throughput_tps": float(throughput),
            })
        except ValueError as e:
            raise DataIngestError(f"Invalid curve row {row}: {e}") from e
    return parsed


def write_interplay_csv(rows: Iterable[InterplayRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(INTERPLAY_CSV_HEADER)
    for row in rows:
        writer.writerow((row.b, repr(row.kappa), row.argmax_top_k, repr(row.max_throughput_tps)))
    return buffer.getvalue()
