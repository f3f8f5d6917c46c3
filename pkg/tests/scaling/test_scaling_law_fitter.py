import logging
import math

import numpy as np
import pytest
from pytest_check import check

from app.core.exceptions import (
    DataIngestError,
    DegenerateDataError,
    DuplicateXError,
    NonPositiveXError,
    ScalingLawError,
)
from app.scaling.models import DataSeries, LawForm
from app.scaling.ScalingLawFitter import ScalingLawFitter, ingest_csv, parse_series_csv, r_squared, reference_fit
from config.planner_config import FitterConfig

BATCHES = [1, 2, 4, 8, 16, 32, 64]
NOISE = [0.5, -1.0, 0.8, -0.3, 1.0, -0.7, 0.2]


def sse(form, params, series):
    return float(np.sum((series.y - form.evaluate(params, series.x)) ** 2))


def eq4(b):
    return 27904.0 * math.sqrt(1.0 + 0.034 / b) - 27897.0


class TestLogFits:
    @pytest.fixture(autouse=True)
    def setup(self, fixtures_dir):
        self.fitter = ScalingLawFitter()
        self.data_dir = fixtures_dir / "data"

    def test_recovers_pretrain_law(self):
        fit = self.fitter.fit(ingest_csv(self.data_dir / "pretrain_synthetic.csv"), LawForm.LOG10)

        with check:
            check.equal(fit.params[0], pytest.approx(0.08, abs=1e-9))
            check.equal(fit.params[1], pytest.approx(5.05, abs=1e-9))
            check.equal(fit.r_squared, pytest.approx(1.0, abs=1e-12))
            check.equal(fit.n_points, 7)

    def test_recovers_draft_capacity_law(self):
        fit = self.fitter.fit(ingest_csv(self.data_dir / "draft_capacity_synthetic.csv"), LawForm.LOG10)

        with check:
            check.equal(fit.params[0], pytest.approx(0.74, abs=1e-9))
            check.equal(fit.params[1], pytest.approx(4.61, abs=1e-9))

    def test_two_points_interpolate_exactly(self):
        series = ingest_csv(self.data_dir / "pretrain_endpoints.csv")
        fit = self.fitter.fit(series, LawForm.LOG10)

        with check:
            check.equal(fit.r_squared, pytest.approx(1.0, abs=1e-12))
            check.equal(fit.params[0], pytest.approx(0.15))
            check.equal(fit.predict(1), pytest.approx(5.13))
            check.equal(fit.predict(100), pytest.approx(5.43))

    def test_ols_optimality(self):
        series = ingest_csv(self.data_dir / "throughput_baseline.csv")
        fit = self.fitter.fit(series, LawForm.LOG2)
        best = sse(LawForm.LOG2, fit.params, series)

        for delta in ((1e-3, 0), (-1e-3, 0), (0, 1e-3), (0, -1e-3)):
            moved = (fit.params[0] + delta[0], fit.params[1] + delta[1])
            check.greater_equal(sse(LawForm.LOG2, moved, series), best)

    def test_scale_equivariance(self):
        series = ingest_csv(self.data_dir / "throughput_tree_drafting.csv")
        scaled = DataSeries.from_points([(1000.0 * x, y) for x, y in series.points])
        fit = self.fitter.fit(series, LawForm.LOG10)
        moved = self.fitter.fit(scaled, LawForm.LOG10)

        with check:
            check.equal(moved.params[0], pytest.approx(fit.params[0]))
            check.equal(moved.params[1], pytest.approx(fit.params[1] - 3.0 * fit.params[0]))
            check.equal(moved.r_squared, pytest.approx(fit.r_squared))

    def test_noisy_throughput_fit(self):
        fit = self.fitter.fit(ingest_csv(self.data_dir / "throughput_baseline.csv"), LawForm.LOG2)

        with check:
            check.greater(fit.params[0], 0.0)
            check.greater(fit.r_squared, 0.8)
            check.less(fit.r_squared, 1.0)

    def test_too_few_points_for_form(self):
        series = DataSeries.from_points([(1, 1.0), (2, 2.0)])
        with pytest.raises(DegenerateDataError):
            self.fitter.fit(series, LawForm.INVSQRT)


class TestInvSqrtFit:
    @pytest.fixture(autouse=True)
    def setup(self, fixtures_dir):
        self.fitter = ScalingLawFitter()
        self.data_dir = fixtures_dir / "data"

    def test_recovers_noiseless_parameters(self):
        series = DataSeries.from_points([(b, 10.0 * math.sqrt(1.0 + 20.0 / b) + 1.0) for b in range(1, 65)])
        fit = self.fitter.fit(series, LawForm.INVSQRT)

        with check:
            check.is_true(fit.converged)
            check.equal(fit.params[0], pytest.approx(10.0, rel=1e-6))
            check.equal(fit.params[1], pytest.approx(20.0, rel=1e-6))
            check.equal(fit.params[2], pytest.approx(1.0, rel=1e-6))

    def test_noisy_samples_predict_batch_64(self):
        series = DataSeries.from_points([(b, eq4(b) * (1.0 + 0.01 * e)) for b, e in zip(BATCHES, NOISE)])
        fit = self.fitter.fit(series, LawForm.INVSQRT)

        with check:
            check.equal(fit.predict(64), pytest.approx(14.36, abs=1.0))
            check.greater(fit.r_squared, 0.99)

    def test_iteration_limit_flags_non_convergence(self, caplog):
        series = ingest_csv(self.data_dir / "optimal_topk_noiseless.csv")
        with caplog.at_level(logging.WARNING, logger="app.scaling.ScalingLawFitter"):
            fit = self.fitter.fit(series, LawForm.INVSQRT)

        with check:
            check.is_false(fit.converged)
            check.greater(fit.r_squared, 0.9999)
            check.equal(fit.predict(64), pytest.approx(14.36, abs=0.3))
            check.is_in("did not converge", caplog.text)

    def test_iteration_limit_comes_from_config(self):
        series = DataSeries.from_points([(b, 10.0 * math.sqrt(1.0 + 20.0 / b) + 1.0) for b in range(1, 65)])
        fit = ScalingLawFitter(FitterConfig(MAX_ITER=1)).fit(series, LawForm.INVSQRT)
        check.is_false(fit.converged)

    def test_stalled_damping_away_from_minimum_flags_non_convergence(self, mocker, caplog):
        series = DataSeries.from_points([(b, eq4(b) * (1.0 + 0.01 * e)) for b, e in zip(BATCHES, NOISE)])
        mocker.patch.object(np.linalg, "solve", side_effect=np.linalg.LinAlgError)
        with caplog.at_level(logging.WARNING, logger="app.scaling.ScalingLawFitter"):
            fit = self.fitter.fit(series, LawForm.INVSQRT)

        with check:
            check.is_false(fit.converged)
            check.is_in("stalled", caplog.text)

    def test_deterministic(self):
        series = DataSeries.from_points([(b, eq4(b) * (1.0 + 0.01 * e)) for b, e in zip(BATCHES, NOISE)])
        check.equal(self.fitter.fit(series, LawForm.INVSQRT), self.fitter.fit(series, LawForm.INVSQRT))

    def test_c2_stays_in_domain(self):
        series = DataSeries.from_points([(b, eq4(b) * (1.0 + 0.01 * e)) for b, e in zip(BATCHES, NOISE)])
        fit = self.fitter.fit(series, LawForm.INVSQRT)
        check.greater(fit.params[1], -1.0)


class TestRSquared:
    def test_zero_residuals(self):
        y = np.array([1.0, 2.0, 4.0])
        check.equal(r_squared(y, y.copy()), 1.0)

    def test_mean_model_is_zero(self):
        y = np.array([1.0, 2.0, 6.0])
        check.equal(r_squared(y, np.full(3, 3.0)), pytest.approx(0.0))

    def test_constant_data(self):
        y = np.array([2.0, 2.0])
        with check:
            check.equal(r_squared(y, y.copy()), 1.0)
            check.equal(r_squared(y, np.array([2.0, 3.0])), 0.0)


class TestSeriesCsv:
    @pytest.fixture(autouse=True)
    def setup(self, tmp_path):
        self.tmp_path = tmp_path

    def test_endpoints_example(self):
        series = parse_series_csv("x,y\n1,5.13\n100,5.43")
        check.equal(series.points, ((1.0, 5.13), (100.0, 5.43)))

    def test_unsorted_rows_sorted(self):
        series = parse_series_csv("x,y\n8,3\n1,1\n4,2\n")
        check.equal(list(series.x), [1.0, 4.0, 8.0])

    @pytest.mark.parametrize("text,error", [
        ("", DataIngestError),
        ("a,b\n1,2\n2,3\n", DataIngestError),
        ("x,y\n1,2\n2\n", DataIngestError),
        ("x,y\n1,abc\n2,3\n", DataIngestError),
        ("x,y\n1,2\n1,3\n", DuplicateXError),
        ("x,y\n0,2\n1,3\n", NonPositiveXError),
    ])
    def test_bad_csv_rejected(self, text, error):
        with pytest.raises(error):
            parse_series_csv(text)

    def test_missing_file(self):
        with pytest.raises(DataIngestError):
            ingest_csv(self.tmp_path / "absent.csv")


class TestReferenceLaws:
    def test_batch_throughput_law(self):
        fit = reference_fit("batch-throughput")

        with check:
            check.equal(fit.form, LawForm.LOG2)
            check.equal(fit.predict(64), pytest.approx(1728.28))
            check.is_none(fit.r_squared)

    def test_optimal_topk_law(self):
        check.equal(reference_fit("optimal-topk").predict(64), pytest.approx(14.36, abs=0.1))

    def test_unknown_law(self):
        with pytest.raises(ScalingLawError):
            reference_fit("moores-law")
