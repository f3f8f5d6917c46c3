"""CLI commands for the specroof speculative-decoding performance toolkit."""

import functools
import logging
import sys
from os import getenv
from pathlib import Path
from typing import Optional

import click
from dotenv import load_dotenv

from app.core.exceptions import InvariantViolation, SpecroofError
from app.core.loader import load_deploy_config, load_hardware_spec, load_model_spec
from app.roofline.acceptance import AcceptanceModel
from app.roofline.RooflinePlanner import (
    RooflinePlanner,
    write_curve_csv,
    write_interplay_csv,
)
from app.scaling.models import LawForm
from app.scaling.ScalingLawFitter import ScalingLawFitter, ingest_csv, reference_fit
from app.sim.models import TreeMode
from app.sim.SpecDecodeSimulator import SpecDecodeSimulator, write_report_csv
from app.sim.ToyLM import ToyLM
from app.utils.utils import format_number, parse_float_list, parse_int_list, parse_range, render_table
from app.workload.WorkloadModel import WorkloadModel
from config.planner_config import PlannerConfig
from config.laws import REFERENCE_LAWS

# Load environment variables at module level
load_dotenv()

LOG_LEVELS = ["debug", "info", "warning", "error"]


def handle_errors(func):
    """Map user errors to exit code 1 and internal invariant failures to exit code 2."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SpecroofError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(1)
        except InvariantViolation as e:
            click.echo(f"Internal error: {e}", err=True)
            sys.exit(2)

    return wrapper


def emit(text: str, out: Optional[str] = None) -> None:
    """Write to ``out`` if given, stdout otherwise."""
    if out:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as e:
            raise SpecroofError(f"Cannot write {out}: {e}") from e
    else:
        click.echo(text, nl=False)


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    default=None,
    help="Logging verbosity on stderr (default: $SPECROOF_LOG_LEVEL or warning)",
)
def cli(log_level):
    """specroof - roofline planning and simulation for speculative decoding"""
    level = (log_level or getenv("SPECROOF_LOG_LEVEL") or "warning").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


model_option = click.option("--model", "-m", "model_path", required=True, help="Model config file")
hardware_option = click.option("--hardware", "-w", "hardware_path", required=True, help="Hardware config file")


@cli.command(name="analyze")
@model_option
@hardware_option
@click.option("--deploy", "-d", "deploy_path", required=True, help="Deployment config file")
@click.option("--acc-model", default=None, help="const:<t_acc> or eq8:<kappa> (default: const:t_acc of the deployment)")
@click.option("--format", "fmt", type=click.Choice(["human", "csv"]), default="human", show_default=True)
@handle_errors
def analyze(model_path, hardware_path, deploy_path, acc_model, fmt):
    """Per-operator workload and roofline point of one deployment"""
    spec = load_model_spec(model_path)
    hw = load_hardware_spec(hardware_path)
    deploy = load_deploy_config(deploy_path)
    acc = AcceptanceModel.parse(acc_model) if acc_model else AcceptanceModel.constant(deploy.accepted_tokens)

    workload = WorkloadModel(spec)
    planner = RooflinePlanner(spec, hw)
    point = planner.roofline_point(deploy, acc)
    sized, _ = planner.sized_deploy(deploy, acc)
    cycle = workload.cycle_workload(sized)

    if fmt == "csv":
        click.echo(cycle.to_csv())
        click.echo(write_curve_csv([point]), nl=False)
        return

    baseline = planner.baseline_point(deploy.batch, deploy.prefill_len)
    click.echo("Passes:")
    for pass_kind, count, breakdown in workload.cycle_breakdown(sized):
        click.echo(f"  {count} x {pass_kind}: flops={breakdown.total_flops} mem_elems={breakdown.total_mem_elems}")
    click.echo("---")
    rows = [(c.op_name.value, c.flops, c.read_elems, c.write_elems) for c in cycle.per_op]
    click.echo(render_table(("op", "flops", "read_elems", "write_elems"), rows))
    click.echo("---")
    click.echo(f"total_flops: {cycle.total_flops}")
    click.echo(f"total_read: {cycle.total_read}")
    click.echo(f"total_write: {cycle.total_write}")
    click.echo(f"total_mem_elems: {cycle.total_mem_elems}")
    click.echo("---")
    click.echo(f"b: {point.b}")
    click.echo(f"top_k: {point.top_k}")
    click.echo(f"t_acc: {format_number(point.t_acc)}")
    click.echo(f"intensity: {format_number(point.intensity)}")
    click.echo(f"critical_intensity: {format_number(planner.critical_intensity())}")
    click.echo(f"regime: {point.regime.value}")
    click.echo(f"latency_s: {format_number(point.latency_s)}")
    click.echo(f"throughput_tps: {format_number(point.throughput_tps)}")
    click.echo(f"speedup: {format_number(point.throughput_tps / baseline.throughput_tps)}")


@cli.command(name="plan")
@model_option
@hardware_option
@click.option("--batch", "-b", type=int, default=None, help="Batch size")
@click.option("--batch-list", default=None, help="Comma-separated batch sizes, e.g. 1,2,4,8")
@click.option("--prefill", "-s", type=int, default=0, show_default=True, help="Cached context length s_pre")
@click.option("--acc-model", default="eq8:1.0", show_default=True, help="const:<t_acc> or eq8:<kappa>")
@click.option("--draft-tokens", "-k", type=int, default=None, help="Tokens per draft step")
@handle_errors
def plan(model_path, hardware_path, batch, batch_list, prefill, acc_model, draft_tokens):
    """Optimal top_k where the cycle reaches the roofline knee"""
    if (batch is None) == (batch_list is None):
        raise SpecroofError("Provide exactly one of --batch or --batch-list")
    if prefill < 0 or (draft_tokens is not None and draft_tokens < 1):
        raise SpecroofError("--prefill must be >= 0 and --draft-tokens >= 1")
    batches = [batch] if batch is not None else parse_int_list(batch_list)
    if any(b < 1 for b in batches):
        raise SpecroofError("Batch sizes must be >= 1")

    planner = RooflinePlanner(load_model_spec(model_path), load_hardware_spec(hardware_path))
    acc = AcceptanceModel.parse(acc_model)
    plans = planner.plan_batches(batches, prefill, acc, draft_tokens)

    click.echo(f"critical_intensity: {format_number(planner.critical_intensity())}")
    click.echo(f"acc_model: {acc}")
    click.echo("---")
    rows = [
        (p.b, p.optimal_topk_real, p.optimal_topk_int, p.achieved_intensity, p.throughput_at_opt, p.speedup, p.status.value)
        for p in plans
    ]
    headers = ("b", "topk_real", "topk_int", "intensity", "throughput_tps", "speedup", "status")
    click.echo(render_table(headers, rows))
    for p in plans:
        if p.flagged:
            click.echo(f"flag: b={p.b} {p.status.value}")

    if len(plans) > 1:
        click.echo("---")
        for name, law in RooflinePlanner.batch_laws(plans).items():
            params = ", ".join(format_number(v) for v in law.params)
            line = f"law {name}: {law.form.value} params=[{params}] r_squared={format_number(law.r_squared)}"
            click.echo(line if law.converged else f"{line} flag: NonConvergence")


@cli.command(name="fit")
@click.option("--csv", "csv_path", default=None, help="Measurement CSV with header x,y")
@click.option("--form", type=click.Choice([f.value for f in LawForm]), default=None, help="Law form to fit")
@click.option("--reference", type=click.Choice(sorted(REFERENCE_LAWS)), default=None, help="Use a published law instead of fitting")
@click.option("--predict", "predict_at", type=float, multiple=True, help="Evaluate the law at x (repeatable)")
@handle_errors
def fit(csv_path, form, reference, predict_at):
    """Fit a scaling law and report params, R^2 and n_points as JSON"""
    if reference:
        if csv_path:
            raise SpecroofError("--reference cannot be combined with --csv")
        law = reference_fit(reference)
    else:
        if not csv_path or not form:
            raise SpecroofError("--csv and --form are required unless --reference is given")
        law = ScalingLawFitter().fit(ingest_csv(csv_path), LawForm(form))

    click.echo(law.to_json())
    if not law.converged:
        click.echo("flag: NonConvergence")
    for x in predict_at:
        click.echo(f"predict x={format_number(x)} y={format_number(law.predict(x))}")


@cli.command(name="simulate")
@click.option("--target", "target_path", required=True, help="Target ToyLM file")
@click.option("--draft", "draft_path", required=True, help="Draft ToyLM file")
@click.option("--cycles", "-n", type=int, default=10, show_default=True)
@click.option("--depth", "-d", type=int, default=4, show_default=True)
@click.option("--topc", "-c", type=int, default=2, show_default=True)
@click.option("--budget", "-k", type=int, default=16, show_default=True)
@click.option("--mode", type=click.Choice([m.value for m in TreeMode]), default="greedy", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--prefix", default="", help="Comma-separated prompt tokens")
@click.option("--format", "fmt", type=click.Choice(["human", "csv"]), default="human", show_default=True)
@handle_errors
def simulate(target_path, draft_path, cycles, depth, topc, budget, mode, seed, prefix, fmt):
    """Run draft-and-verify decoding between two ToyLMs"""
    target = ToyLM.load(target_path)
    draft = ToyLM.load(draft_path)
    prompt = parse_int_list(prefix) if prefix else []
    if any(not 0 <= t < target.vocab for t in prompt):
        raise SpecroofError(f"Prefix tokens must lie in [0, {target.vocab})")

    simulator = SpecDecodeSimulator(target, draft)
    result = simulator.run_decode(prompt, cycles, topc, depth, budget, TreeMode(mode), seed)

    if fmt == "human":
        click.echo(f"acceptance_rate: {format_number(result.acceptance_rate)}")
        click.echo(f"tokens: {' '.join(str(t) for t in result.tokens)}")
        click.echo("---")
    click.echo(write_report_csv(result), nl=False)


@cli.command(name="sweep")
@click.option("--what", type=click.Choice(["topk-curve", "interplay"]), required=True)
@model_option
@hardware_option
@click.option("--batch", "-b", type=int, default=1, show_default=True, help="Batch size (topk-curve)")
@click.option("--batch-list", default=None, help="Batch sizes (interplay; default 16,32,64)")
@click.option("--prefill", "-s", type=int, default=0, show_default=True)
@click.option("--acc-model", default="eq8:1.0", show_default=True, help="Acceptance model (topk-curve)")
@click.option("--kappas", default=None, help="Comma-separated kappas (interplay; default 0.9,1.0,1.1,1.2)")
@click.option("--topk", "topk_range", default="1:257:1", show_default=True, help="top_k range start:stop:step")
@click.option("--draft-tokens", "-k", type=int, default=None, help="Tokens per draft step")
@click.option("--out", "-o", default=None, help="Write the CSV here instead of stdout")
@handle_errors
def sweep(what, model_path, hardware_path, batch, batch_list, prefill, acc_model, kappas, topk_range, draft_tokens, out):
    """Emit plot-ready throughput curve or interplay CSV"""
    topks = parse_range(topk_range)
    if batch < 1 or prefill < 0 or (draft_tokens is not None and draft_tokens < 1):
        raise SpecroofError("--batch and --draft-tokens must be >= 1, --prefill >= 0")
    planner = RooflinePlanner(load_model_spec(model_path), load_hardware_spec(hardware_path))

    if what == "topk-curve":
        points = planner.throughput_curve(batch, prefill, AcceptanceModel.parse(acc_model), topks, draft_tokens)
        emit(write_curve_csv(points), out)
        return

    config = PlannerConfig()
    batches = parse_int_list(batch_list) if batch_list else list(config.INTERPLAY_BATCHES)
    kappa_list = parse_float_list(kappas) if kappas else list(config.INTERPLAY_KAPPAS)
    # Validates the kappa range before the sweep starts.
    for kappa in kappa_list:
        AcceptanceModel.saturating(kappa)
    rows = planner.interplay_sweep(batches, prefill, kappa_list, topks, draft_tokens)
    emit(write_interplay_csv(rows), out)
