import json
import logging

import pytest
from click.testing import CliRunner
from pytest_check import check

from app.cli.commands import cli
from app.core.exceptions import ResidualMassError
from app.roofline.RooflinePlanner import read_curve_csv


class TestCommands:
    @pytest.fixture(autouse=True)
    def setup(self, fixtures_dir, tmp_path):
        """CLI runner with paths to the shipped fixtures"""
        self.runner = CliRunner()
        self.tmp_path = tmp_path
        self.model = str(fixtures_dir / "models" / "tiny.cfg")
        self.hardware = str(fixtures_dir / "hardware" / "tiny.cfg")
        self.deploy = str(fixtures_dir / "deploy" / "tiny.cfg")
        self.data_dir = fixtures_dir / "data"
        self.target = str(fixtures_dir / "toylm" / "markov_target.txt")
        self.draft = str(fixtures_dir / "toylm" / "markov_draft.txt")

    def teardown_method(self):
        """Drop the stderr handler the CLI installs on the root logger"""
        root = logging.getLogger()
        for handler in root.handlers[:]:
            if type(handler) is logging.StreamHandler:
                root.removeHandler(handler)
        root.setLevel(logging.WARNING)

    def invoke(self, *args, **kwargs):
        return self.runner.invoke(cli, ["--log-level", "error", *args], **kwargs)

    def test_analyze_human_report(self):
        result = self.invoke("analyze", "-m", self.model, "-w", self.hardware, "-d", self.deploy)

        with check:
            check.equal(result.exit_code, 0, result.output)
            check.is_in("1 x TargetVerify(s=2)", result.output)
            check.is_in("total_flops: 2656", result.output)
            check.is_in("total_mem_elems: 1588", result.output)
            check.is_in("critical_intensity: 4.0", result.output)
            check.is_in("regime: MemoryBound", result.output)

    def test_analyze_csv_report(self):
        result = self.invoke("analyze", "-m", self.model, "-w", self.hardware, "-d", self.deploy, "--format", "csv")
        breakdown, curve = result.output.strip().split("\n\n")

        with check:
            check.equal(breakdown.splitlines()[0], "op,flops,read_elems,write_elems")
            check.equal(sum(int(line.split(",")[1]) for line in breakdown.splitlines()[1:]), 2656)
            check.equal(curve.splitlines()[0], "b,top_k,intensity,regime,latency_s,throughput_tps")
            check.equal(curve.splitlines()[1].split(",")[:2], ["1", "1"])

    def test_analyze_missing_file(self):
        result = self.invoke("analyze", "-m", "nope.cfg", "-w", self.hardware, "-d", self.deploy)

        with check:
            check.equal(result.exit_code, 1)
            check.is_in("nope.cfg", result.output)

    def test_plan_batch_sweep(self):
        result = self.invoke(
            "plan", "-m", self.model, "-w", self.hardware,
            "--batch-list", "1,2,4,8,16,32,64", "--acc-model", "const:2", "-k", "2",
        )

        with check:
            check.equal(result.exit_code, 0, result.output)
            check.is_in("critical_intensity: 4.0", result.output)
            check.is_in("acc_model: const:2.0", result.output)
            check.is_in("law optimal_topk: invsqrt", result.output)
            check.is_in("law throughput: log2", result.output)
            check.is_not_in("flag: b=", result.output)

    def test_plan_flags_compute_bound_batch(self):
        hardware = self.tmp_path / "slow.cfg"
        hardware.write_text("P_peak = 1\nB_mem = 100\n", encoding="utf-8")
        result = self.invoke("plan", "-m", self.model, "-w", str(hardware), "--batch", "4", "--acc-model", "const:2")

        with check:
            check.equal(result.exit_code, 0, result.output)
            check.is_in("flag: b=4 AlreadyComputeBound", result.output)

    @pytest.mark.parametrize("extra", [[], ["--batch", "1", "--batch-list", "1,2"], ["--batch", "0"]])
    def test_plan_batch_options(self, extra):
        result = self.invoke("plan", "-m", self.model, "-w", self.hardware, *extra)
        check.equal(result.exit_code, 1)

    def test_plan_bad_acceptance_model(self):
        result = self.invoke("plan", "-m", self.model, "-w", self.hardware, "--batch", "1", "--acc-model", "eq8:2")
        check.equal(result.exit_code, 1)

    def test_fit_json_and_predictions(self):
        result = self.invoke(
            "fit", "--csv", str(self.data_dir / "pretrain_synthetic.csv"), "--form", "log10", "--predict", "100"
        )
        report_text, _, predict_line = result.output.rpartition("}")
        report = json.loads(report_text + "}")

        with check:
            check.equal(result.exit_code, 0, result.output)
            check.equal(report["form"], "log10")
            check.equal(report["n_points"], 7)
            check.equal(report["params"][0], pytest.approx(0.08))
            check.equal(report["r_squared"], pytest.approx(1.0))
            check.equal(float(predict_line.strip().split("y=")[1]), pytest.approx(5.21))

    def test_fit_reference_law(self):
        result = self.invoke("fit", "--reference", "batch-throughput", "--predict", "64")

        with check:
            check.equal(result.exit_code, 0, result.output)
            check.is_in('"r_squared": null', result.output)
            check.is_in("predict x=64.0", result.output)
            check.equal(float(result.output.strip().splitlines()[-1].split("y=")[1]), pytest.approx(1728.28))

    def test_fit_flags_non_convergence(self):
        result = self.invoke("fit", "--csv", str(self.data_dir / "optimal_topk_noiseless.csv"), "--form", "invsqrt")

        with check:
            check.equal(result.exit_code, 0, result.output)
            check.is_in("flag: NonConvergence", result.output)

    def test_fit_requires_csv_and_form(self):
        result = self.invoke("fit", "--form", "log2")
        check.equal(result.exit_code, 1)

    def test_fit_domain_error(self):
        result = self.invoke("fit", "--reference", "batch-throughput", "--predict", "0")
        check.equal(result.exit_code, 1)

    def test_simulate_identical_models(self):
        result = self.invoke(
            "simulate", "--target", self.target, "--draft", self.target,
            "--depth", "4", "--topc", "2", "--budget", "30", "--prefix", "0",
        )

        with check:
            check.equal(result.exit_code, 0, result.output)
            check.equal(result.output.splitlines()[0], "acceptance_rate: 5.0")
            check.is_in("cycle,accepted_count,rejected_at,replacement_token", result.output)

    def test_simulate_is_seeded(self):
        args = ("simulate", "--target", self.target, "--draft", self.draft, "--mode", "sampled", "--seed", "7")
        first = self.invoke(*args, "--format", "csv")
        second = self.invoke(*args, "--format", "csv")

        with check:
            check.equal(first.exit_code, 0, first.output)
            check.equal(first.output, second.output)
            check.equal(len(first.output.splitlines()), 11)

    @pytest.mark.parametrize("extra", [["--prefix", "7"], ["--budget", "0"], ["--topc", "4"]])
    def test_simulate_rejects_bad_arguments(self, extra):
        result = self.invoke("simulate", "--target", self.target, "--draft", self.draft, *extra)
        check.equal(result.exit_code, 1)

    def test_simulate_malformed_model(self):
        bad = self.tmp_path / "bad.txt"
        bad.write_text("vocab=3 order=1\n^ : 1 0 0\n", encoding="utf-8")
        result = self.invoke("simulate", "--target", str(bad), "--draft", self.draft)
        check.equal(result.exit_code, 1)

    def test_invariant_violation_exits_with_two(self, mocker):
        mocker.patch("app.cli.commands.SpecDecodeSimulator.run_decode", side_effect=ResidualMassError("no mass"))
        result = self.invoke("simulate", "--target", self.target, "--draft", self.draft)

        with check:
            check.equal(result.exit_code, 2)
            check.is_in("no mass", result.output)

    def test_sweep_topk_curve(self):
        result = self.invoke("sweep", "--what", "topk-curve", "-m", self.model, "-w", self.hardware, "--topk", "1:6")
        lines = result.output.splitlines()

        with check:
            check.equal(result.exit_code, 0, result.output)
            check.equal(lines[0], "b,top_k,intensity,regime,latency_s,throughput_tps")
            check.equal([line.split(",")[1] for line in lines[1:]], ["1", "2", "3", "4", "5"])

    def test_sweep_interplay_to_file(self):
        out = self.tmp_path / "interplay.csv"
        result = self.invoke(
            "sweep", "--what", "interplay", "-m", self.model, "-w", self.hardware,
            "--batch-list", "1,2", "--kappas", "0.9,1.2", "--topk", "1:40", "--out", str(out),
        )
        lines = out.read_text(encoding="utf-8").splitlines()

        with check:
            check.equal(result.exit_code, 0, result.output)
            check.equal(result.output, "")
            check.equal(lines[0], "b,kappa,argmax_top_k,max_throughput_tps")
            check.equal([line.split(",")[:2] for line in lines[1:]], [["1", "0.9"], ["1", "1.2"], ["2", "0.9"], ["2", "1.2"]])

    @pytest.mark.parametrize("extra", [["--kappas", "1.5"], ["--topk", "5:1"], ["--topk", "a:b"]])
    def test_sweep_rejects_bad_grids(self, extra):
        result = self.invoke("sweep", "--what", "interplay", "-m", self.model, "-w", self.hardware, *extra)
        check.equal(result.exit_code, 1)

    def test_log_level_from_environment(self):
        self.runner.invoke(
            cli, ["fit", "--reference", "optimal-topk"], env={"SPECROOF_LOG_LEVEL": "debug"}
        )
        check.equal(logging.getLogger().level, logging.DEBUG)

    def test_fit_log2_on_tree_drafting_throughput(self):
        result = self.invoke("fit", "--csv", str(self.data_dir / "throughput_tree_drafting.csv"), "--form", "log2")
        report = json.loads(result.output)

        with check:
            check.equal(result.exit_code, 0, result.output)
            check.greater(report["params"][0], 0.0)
            check.equal(report["n_points"], 9)

    def test_fit_invsqrt_shape(self):
        result = self.invoke("fit", "--csv", str(self.data_dir / "optimal_topk_noiseless.csv"), "--form", "invsqrt")
        report = json.loads(result.output.split("flag:")[0])

        with check:
            check.equal(len(report["params"]), 3)
            check.greater_equal(report["r_squared"], 0.99)

    def test_simulate_peaked_target(self, fixtures_dir):
        result = self.invoke(
            "simulate", "--target", str(fixtures_dir / "toylm" / "peaked_target.txt"),
            "--draft", str(fixtures_dir / "toylm" / "uniform_draft.txt"),
            "--cycles", "2000", "--depth", "2", "--topc", "1", "--budget", "2", "--mode", "sampled", "--seed", "3",
        )
        rate = float(result.output.splitlines()[0].split(": ")[1])
        check.equal(rate, pytest.approx(1.8525, abs=0.07))

    def test_single_point_sweep_matches_analyze(self):
        analyzed = self.invoke(
            "analyze", "-m", self.model, "-w", self.hardware, "-d", self.deploy, "--acc-model", "const:2", "--format", "csv"
        )
        swept = self.invoke(
            "sweep", "--what", "topk-curve", "-m", self.model, "-w", self.hardware,
            "--topk", "1:2", "--acc-model", "const:2", "-k", "2",
        )
        check.equal(analyzed.output.strip().split("\n\n")[1].splitlines(), swept.output.splitlines())

    def test_out_file_matches_stdout(self):
        out = self.tmp_path / "curve.csv"
        args = ("sweep", "--what", "topk-curve", "-m", self.model, "-w", self.hardware, "--topk", "1:30:3")
        printed = self.invoke(*args)
        self.invoke(*args, "--out", str(out))

        with check:
            check.equal(out.read_text(encoding="utf-8"), printed.output)
            check.equal(len(read_curve_csv(printed.output)), 10)

    def test_plan_is_deterministic(self):
        args = ("plan", "-m", self.model, "-w", self.hardware, "--batch-list", "1,4,16", "--acc-model", "eq8:1.1")
        check.equal(self.invoke(*args).output, self.invoke(*args).output)

    def test_plan_qwen_topk_column_decreases(self, fixtures_dir):
        result = self.invoke(
            "plan", "-m", str(fixtures_dir / "models" / "qwen2.5-72b.cfg"), "-w", str(fixtures_dir / "hardware" / "h800.cfg"),
            "--batch-list", "1,2,4,8,16,32,64", "--prefill", "10000", "-k", "10",
        )
        table = result.output.split("---")[1].strip().splitlines()
        column = [float(line.split()[1]) for line in table[1:]]

        with check:
            check.equal(result.exit_code, 0, result.output)
            check.equal(len(column), 7)
            check.is_true(all(later < earlier for earlier, later in zip(column, column[1:])), column)
