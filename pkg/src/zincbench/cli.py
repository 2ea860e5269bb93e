"""Command-line front end: run strategies, score results, check models,
validate corpora, and serve the editor."""

from __future__ import annotations

import concurrent.futures
import datetime
import json
import subprocess
import sys
import uuid
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .corpus import Corpus, CorpusError, cross_validate, load_problem
from .evaluator import build_report, emit_leaderboard, judge_instance, outcome_from_json, outcome_to_json
from .gateway import (
    Gateway,
    GatewayConfig,
    LiveTransport,
    MockTransport,
    ReplayTransport,
)
from .grammar import load_default_grammar, validate_syntax
from .harness import SolverConfig, ToolchainMissing, solve
from .strategies import CALL_BUDGETS, Strategy, run_strategy, save_generated

STRATEGY_BY_NAME = {s.value.lower(): s for s in Strategy}


def _parse_strategy(name: str) -> Strategy:
    strategy = STRATEGY_BY_NAME.get(name.lower())
    if strategy is None:
        raise click.UsageError(
            f"unknown strategy {name!r}; pick one of: "
            + ", ".join(s.value for s in Strategy)
        )
    return strategy


def _utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _tool_versions(config: SolverConfig) -> dict:
    versions = {"zincbench": __version__, "python": sys.version.split()[0]}
    try:
        exe = config.resolve_executable()
        proc = subprocess.run(
            [exe, "--version"], capture_output=True, text=True, timeout=10
        )
        if proc.returncode == 0 and proc.stdout.strip():
            versions["minizinc"] = proc.stdout.strip().splitlines()[0]
    except (ToolchainMissing, OSError, subprocess.TimeoutExpired):
        pass
    return versions


@click.group()
@click.version_option(__version__, prog_name="zincbench")
def main():
    """Copilot pipeline and benchmark harness for MiniZinc model generation."""


def _load_instances(corpus_root: Optional[Path], instance_dir: Optional[Path]):
    if corpus_root is not None:
        corpus = Corpus.open(corpus_root)
        return [corpus.load(i) for i in sorted(corpus.ids())]
    if instance_dir is not None:
        return [load_problem(instance_dir)]
    raise click.UsageError("pass --corpus <root> or --instance <dir>")


def _fenced(model_text: str) -> str:
    return f"```minizinc\n{model_text}\n```"


@main.command()
@click.option("--strategy", "strategy_name", required=True, help="One of: " + ", ".join(s.value for s in Strategy))
@click.option("--corpus", "corpus_root", type=click.Path(exists=True, file_okay=False, path_type=Path), default=None)
@click.option("--instance", "instance_dir", type=click.Path(exists=True, file_okay=False, path_type=Path), default=None)
@click.option("--transport", type=click.Choice(["mock", "replay", "live"]), default="mock", show_default=True)
@click.option("--replay-from", type=click.Path(exists=True, file_okay=False, path_type=Path), default=None, help="Results directory of a previous run to replay traces from.")
@click.option("--endpoint", default=None, help="Chat-completions URL for the live transport.")
@click.option("--model", "model_name", default="default", show_default=True)
@click.option("--solver", default="gecode", show_default=True)
@click.option("--time-limit", type=float, default=60.0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True, help="Instances processed in parallel; keep 1 for deterministic logs.")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
def run(strategy_name, corpus_root, instance_dir, transport, replay_from,
        endpoint, model_name, solver, time_limit, jobs, out_dir):
    """Generate models for each instance, solve them, and judge the results."""
    strategy = _parse_strategy(strategy_name)
    solver_config = SolverConfig(solver=solver, time_limit=time_limit)
    try:
        solver_config.resolve_executable()
    except ToolchainMissing as e:
        raise click.ClickException(str(e))
    if transport == "replay" and replay_from is None:
        raise click.UsageError("--transport replay needs --replay-from <dir>")

    try:
        instances = _load_instances(corpus_root, instance_dir)
    except CorpusError as e:
        raise click.ClickException(f"corpus fault: {e}")
    if not instances:
        raise click.ClickException("selection matched no instances")

    grammar = load_default_grammar()
    gateway_config = GatewayConfig(model=model_name)
    out_dir.mkdir(parents=True, exist_ok=True)

    def make_transport(instance):
        if transport == "mock":
            if not instance.ground_truth_model:
                raise RuntimeError(
                    "mock transport answers with the reference model, "
                    f"but {instance.identifier} has none"
                )
            reply = _fenced(instance.ground_truth_model)
            return MockTransport(lambda _p, reply=reply: reply)
        if transport == "replay":
            trace = replay_from / instance.identifier / "trace.jsonl"
            if not trace.is_file():
                raise RuntimeError(f"no trace at {trace}")
            return ReplayTransport(trace)
        return LiveTransport(
            endpoint or "https://api.openai.com/v1/chat/completions"
        )

    def process(instance):
        inst_out = out_dir / instance.identifier
        try:
            gateway = Gateway(make_transport(instance), gateway_config)
            generated = run_strategy(
                strategy, instance, gateway, solver=solver_config, grammar=grammar
            )
            save_generated(generated, inst_out)
            result = solve(generated.model_text, instance.data_text, solver_config)
            outcome = judge_instance(result, instance, strategy.value, solver_config)
            inst_out.mkdir(parents=True, exist_ok=True)
            (inst_out / "outcome.json").write_text(
                json.dumps(outcome_to_json(outcome), indent=2) + "\n", encoding="utf-8"
            )
            return {
                "id": instance.identifier,
                "ok": True,
                "calls": len(generated.calls),
                "degraded": generated.degraded,
                "status": result.status.value,
                "outcome": f"{instance.identifier}/outcome.json",
            }
        except Exception as e:  # per-instance failures are data, not crashes
            inst_out.mkdir(parents=True, exist_ok=True)
            (inst_out / "error.txt").write_text(f"{type(e).__name__}: {e}\n", encoding="utf-8")
            return {"id": instance.identifier, "ok": False, "error": str(e)}

    started = _utcnow()
    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(process, instances))
    else:
        entries = [process(i) for i in instances]
    for entry in entries:
        if entry["ok"]:
            click.echo(f"{entry['id']}: {entry['status']} ({entry['calls']} calls)")
        else:
            click.echo(f"{entry['id']}: FAILED {entry['error']}")

    manifest = {
        "run_id": uuid.uuid4().hex,
        "strategy": strategy.value,
        "declared_budget": CALL_BUDGETS[strategy],
        "transport": transport,
        "model": model_name,
        "solver": {"solver": solver, "time_limit": time_limit},
        "corpus": str(corpus_root or instance_dir),
        "started_at": started,
        "finished_at": _utcnow(),
        "tool_versions": _tool_versions(solver_config),
        "instances": entries,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    click.echo(f"manifest: {out_dir / 'manifest.json'}")


@main.command()
@click.option("--corpus", "corpus_root", type=click.Path(exists=True, file_okay=False, path_type=Path), default=None, help="Unused for scoring; accepted for symmetry with run.")
@click.option("--results", "results_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["markdown", "json", "csv"]), default="markdown", show_default=True)
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None)
def evaluate(corpus_root, results_dir, fmt, out_file):
    """Aggregate stored outcomes into a leaderboard."""
    outcomes = []
    for path in sorted(results_dir.rglob("outcome.json")):
        try:
            outcomes.append(outcome_from_json(json.loads(path.read_text(encoding="utf-8"))))
        except (json.JSONDecodeError, KeyError, ValueError) as e:
            raise click.ClickException(f"{path}: unreadable outcome ({e})")
    if not outcomes:
        raise click.ClickException(f"no outcome.json files under {results_dir}")
    text = emit_leaderboard(build_report(outcomes), fmt)
    if out_file is not None:
        out_file.parent.mkdir(parents=True, exist_ok=True)
        out_file.write_text(text, encoding="utf-8")
        click.echo(f"wrote {out_file}")
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("model_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def check(model_file):
    """Syntax-check a MiniZinc file against the bundled grammar."""
    diagnostics = validate_syntax(model_file.read_text(encoding="utf-8"))
    for d in diagnostics:
        click.echo(f"{model_file}:{d.line}:{d.column}: {d.message}")
    if diagnostics:
        click.echo(f"{len(diagnostics)} problem(s)")
        raise SystemExit(1)
    click.echo("ok")


@main.command("validate-corpus")
@click.option("--corpus", "corpus_root", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
def validate_corpus(corpus_root):
    """Load every instance, check invariants, and cross-validate data files."""
    try:
        corpus = Corpus.open(corpus_root)
    except CorpusError as e:
        raise click.ClickException(str(e))
    blocking = 0
    for instance_id in sorted(corpus.ids()):
        try:
            instance = corpus.load(instance_id)
            instance.check_invariants()
        except CorpusError as e:
            click.echo(f"{instance_id}: ERROR {e}")
            blocking += 1
            continue
        findings = cross_validate(instance)
        for f in findings:
            click.echo(f"{instance_id}: {f.kind} {f.symbol}: {f.detail}")
        blocking += sum(1 for f in findings if f.kind != "unused-binding")
    click.echo(f"{len(corpus.ids())} instance(s), {blocking} blocking finding(s)")
    if blocking:
        raise SystemExit(1)


@main.command()
@click.option("--corpus", "corpus_root", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--ui-dist", type=click.Path(file_okay=False, path_type=Path), default=None, help="Built editor UI to serve at /.")
@click.option("--solver-exe", default=None, help="Path to the MiniZinc executable.")
def serve(corpus_root, host, port, ui_dist, solver_exe):
    """Start the editor HTTP service."""
    import uvicorn

    from .service import create_app

    app = create_app(
        corpus_root,
        solver_config=SolverConfig(executable=solver_exe),
        ui_dist=ui_dist,
    )
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
