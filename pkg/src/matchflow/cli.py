"""Command-line entry point: simulate, train, evaluate, replay, sweep, match, serve.

Every command echoes its effective configuration (seeds included) before doing
any work, so a run can be reproduced from its output alone.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import click

from . import __version__, datastore, report
from .calibrator import (
    FeatureContext,
    SequenceExample,
    TrainConfig,
    build_consensus,
    encode_history,
    labels_array,
    train as train_calibrator,
)
from .core import DecisionHistory, Match, prf
from .datastore import TaskBundle, load_task_bundle, save_task_bundle
from .engine import EstimatorKind, TargetSpec, ThresholdMode, process_history
from .harness import run_evaluation
from .recall_boost import (
    RBConfig,
    RBVariant,
    finalize,
    partial_matrix,
    rb_select,
    sweep_curve,
    sweep_rb_threshold,
)
from .simulate import (
    biased_sampler,
    simulate_cohort,
    synthetic_task,
    unbiased_sampler,
)
from .theory import MeasureKind


def _echo_config(command: str, **kwargs) -> None:
    click.echo(f"config: {json.dumps({'command': command, **kwargs}, sort_keys=True)}")


def _parse_grid(spec: str) -> list[float]:
    """Accept 'lo..hi:step' or a comma-separated list."""
    if ".." in spec:
        lo_hi, _, step = spec.partition(":")
        lo, _, hi = lo_hi.partition("..")
        lo_f, hi_f, step_f = float(lo), float(hi), float(step or 0.05)
        count = int(round((hi_f - lo_f) / step_f))
        return [round(lo_f + k * step_f, 10) for k in range(count + 1)]
    return [float(x) for x in spec.split(",") if x.strip()]


def _target(target: str, mode: str) -> TargetSpec:
    return TargetSpec(MeasureKind(target), ThresholdMode(mode))


def _load_calibrated(bundle: TaskBundle, model: Optional[str]):
    if model is None:
        raise click.UsageError("--estimator calibrated requires --model")
    if bundle.algorithmic is None:
        raise click.UsageError("calibrated processing needs an algorithmic matrix in the task")
    params = datastore.load_params(model)
    consensus = build_consensus(list(bundle.histories.values()), bundle.n, bundle.m)
    ctx = FeatureContext(consensus=consensus, algorithmic=bundle.algorithmic, session_start=0.0)
    return params, ctx


def _resolve_history(bundle: TaskBundle, history: str) -> DecisionHistory:
    if history in bundle.histories:
        return bundle.histories[history]
    path = Path(history)
    if path.exists():
        return datastore.load_history(path)
    raise click.UsageError(
        f"history {history!r} is neither a bundle history ({', '.join(sorted(bundle.histories)) or 'none'}) "
        "nor a file"
    )


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Process-aware schema matching toolkit."""


@main.command()
@click.option("--task", type=click.Path(), help="Existing task bundle to simulate over.")
@click.option("--new-task", "new_task", help="Synthesize a task first, e.g. '12x14'.")
@click.option("--count", default=50, show_default=True)
@click.option("--profile", type=click.Choice(["unbiased", "biased"]), default="biased", show_default=True)
@click.option("--decisions", default=25, show_default=True, help="Mean decisions per matcher.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(), help="Output bundle directory.")
def simulate(task, new_task, count, profile, decisions, seed, out) -> None:
    """Simulate a cohort of human matchers into a task bundle."""
    _echo_config(
        "simulate", task=task, new_task=new_task, count=count, profile=profile,
        decisions=decisions, seed=seed, out=str(out),
    )
    if (task is None) == (new_task is None):
        raise click.UsageError("provide exactly one of --task or --new-task")
    if new_task:
        n, _, m = new_task.partition("x")
        schema_a, schema_b, ref, algorithmic = synthetic_task(int(n), int(m), seed=seed)
        bundle = TaskBundle(
            name=f"synthetic-{n}x{m}", version=1, schema_a=schema_a, schema_b=schema_b,
            reference=ref, algorithmic=algorithmic,
        )
    else:
        bundle = load_task_bundle(task)
        if bundle.reference is None:
            raise click.UsageError("simulation needs a reference match in the task bundle")
    sampler = biased_sampler(decisions) if profile == "biased" else unbiased_sampler(decisions)
    cohort = simulate_cohort(
        count, sampler, (bundle.schema_a, bundle.schema_b), bundle.reference, seed=seed
    )
    out_bundle = TaskBundle(
        name=bundle.name, version=bundle.version, schema_a=bundle.schema_a,
        schema_b=bundle.schema_b, reference=bundle.reference,
        algorithmic=bundle.algorithmic, histories=dict(cohort.entries),
    )
    save_task_bundle(out_bundle, out)
    click.echo(f"wrote {count} histories to {out}")


@main.command()
@click.option("--cohort", required=True, type=click.Path(exists=True), help="Bundle with histories.")
@click.option("--model", required=True, type=click.Path(), help="Output parameter artifact.")
@click.option("--seed", default=0, show_default=True)
@click.option("--epochs", default=50, show_default=True)
@click.option("--batch", default=16, show_default=True)
@click.option("--hidden", default=64, show_default=True)
@click.option("--fc", default=128, show_default=True)
@click.option("--lr", default=1e-3, show_default=True)
def train(cohort, model, seed, epochs, batch, hidden, fc, lr) -> None:
    """Train the decision calibrator on a cohort bundle."""
    _echo_config(
        "train", cohort=str(cohort), model=str(model), seed=seed, epochs=epochs,
        batch=batch, hidden=hidden, fc=fc, lr=lr,
    )
    bundle = load_task_bundle(cohort)
    if bundle.reference is None or bundle.algorithmic is None or not bundle.histories:
        raise click.UsageError("training needs reference, algorithmic matrix and histories")
    consensus = build_consensus(list(bundle.histories.values()), bundle.n, bundle.m)
    ctx = FeatureContext(consensus=consensus, algorithmic=bundle.algorithmic)
    dataset = [
        SequenceExample(encode_history(h, ctx), labels_array(h, bundle.reference))
        for h in bundle.histories.values()
        if len(h)
    ]
    cfg = TrainConfig(
        lr=lr, epochs=epochs, batch_size=batch, seed=seed, hidden_size=hidden, fc_size=fc
    )
    params = train_calibrator(dataset, cfg)
    datastore.save_params(params, model)
    click.echo(f"trained on {len(dataset)} histories; model saved to {model}")


@main.command()
@click.option("--cohort", required=True, type=click.Path(exists=True))
@click.option("--folds", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--epochs", default=25, show_default=True)
@click.option("--out", required=True, type=click.Path())
def evaluate(cohort, folds, seed, epochs, out) -> None:
    """K-fold evaluation: raw vs non-sequential baseline vs full pipeline."""
    _echo_config("evaluate", cohort=str(cohort), folds=folds, seed=seed, epochs=epochs, out=str(out))
    bundle = load_task_bundle(cohort)
    if bundle.reference is None or bundle.algorithmic is None or not bundle.histories:
        raise click.UsageError("evaluation needs reference, algorithmic matrix and histories")
    from .simulate import Cohort

    cohort_obj = Cohort(
        entries=tuple(sorted(bundle.histories.items())),
        ref=bundle.reference,
        schema_a=bundle.schema_a,
        schema_b=bundle.schema_b,
    )
    result = run_evaluation(
        cohort_obj, bundle.algorithmic, folds=folds, seed=seed,
        train_cfg=TrainConfig(seed=seed, epochs=epochs),
    )
    written = report.write_evaluation(result, out)
    for path in written:
        click.echo(f"wrote {path}")
    click.echo("")
    click.echo(report.summary_text(result))


@main.command()
@click.option("--task", required=True, type=click.Path(exists=True))
@click.option("--history", required=True, help="Bundle history name or a JSONL file path.")
@click.option("--target", type=click.Choice(["r", "p", "f"]), default="f", show_default=True)
@click.option("--mode", type=click.Choice(["static", "dynamic"]), default="dynamic", show_default=True)
@click.option("--estimator", type=click.Choice(["unbiased", "calibrated"]), default="unbiased",
              show_default=True)
@click.option("--model", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), help="Directory for audit CSV + timeline figure.")
def replay(task, history, target, mode, estimator, model, out) -> None:
    """Replay a history under a target/threshold policy and print the verdicts."""
    _echo_config(
        "replay", task=str(task), history=history, target=target, mode=mode,
        estimator=estimator, model=model and str(model), out=out and str(out),
    )
    bundle = load_task_bundle(task)
    hist = _resolve_history(bundle, history)
    spec = _target(target, mode)
    kind = EstimatorKind(estimator)
    params = ctx = None
    if kind is EstimatorKind.CALIBRATED:
        params, ctx = _load_calibrated(bundle, model)
    sigma, verdicts = process_history(hist, spec, kind, bundle.ref_size(), params, ctx)
    for v in verdicts:
        mark = "accept" if v.accepted else "reject"
        click.echo(
            f"step {v.index + 1}: pair ({v.pair[0]}, {v.pair[1]}) value {v.confidence_used:.3f} "
            f"vs threshold {v.threshold:.2f} -> {mark} (match size {v.running_match_size})"
        )
    if bundle.reference is not None:
        p, r, f = prf(sigma, bundle.reference)
        click.echo(f"final match {sorted(sigma.pairs)}: P={p:.2f} R={r:.2f} F={f:.2f}")
    else:
        click.echo(f"final match {sorted(sigma.pairs)} (no reference available)")
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        report.write_csv(out_dir / "audit.csv", report.verdict_rows(verdicts))
        report.render_timeline(verdicts, out_dir / "timeline.png")
        click.echo(f"wrote {out_dir / 'audit.csv'} and {out_dir / 'timeline.png'}")


@main.command()
@click.option("--cohort", required=True, type=click.Path(exists=True))
@click.option("--grid", default="0..1:0.05", show_default=True)
@click.option("--target", type=click.Choice(["r", "p", "f"]), default="f", show_default=True)
@click.option("--mode", type=click.Choice(["static", "dynamic"]), default="dynamic", show_default=True)
@click.option("--estimator", type=click.Choice(["unbiased", "calibrated"]), default="unbiased",
              show_default=True)
@click.option("--model", type=click.Path(exists=True))
@click.option("--rb-variant", type=click.Choice([v.value for v in RBVariant]), default="uniform",
              show_default=True)
@click.option("--out", type=click.Path())
def sweep(cohort, grid, target, mode, estimator, model, rb_variant, out) -> None:
    """Sweep the recall-boost threshold over a cohort and report the best value."""
    _echo_config(
        "sweep", cohort=str(cohort), grid=grid, target=target, mode=mode,
        estimator=estimator, model=model and str(model), rb_variant=rb_variant,
        out=out and str(out),
    )
    bundle = load_task_bundle(cohort)
    if bundle.reference is None or bundle.algorithmic is None or not bundle.histories:
        raise click.UsageError("sweep needs reference, algorithmic matrix and histories")
    spec = _target(target, mode)
    kind = EstimatorKind(estimator)
    params = ctx = None
    if kind is EstimatorKind.CALIBRATED:
        params, ctx = _load_calibrated(bundle, model)
    cases = []
    for hist in bundle.histories.values():
        sigma_hp, _ = process_history(hist, spec, kind, bundle.ref_size(), params, ctx)
        cases.append((sigma_hp, partial_matrix(bundle.algorithmic, hist)))
    grid_values = _parse_grid(grid)
    variant = RBVariant(rb_variant)
    best = sweep_rb_threshold(cases, bundle.reference, grid_values, variant=variant)
    curve = sweep_curve(cases, bundle.reference, grid_values, variant=variant)
    click.echo(f"best threshold by mean F: {best}")
    for nu, p, r, f in curve:
        click.echo(f"  nu={nu:.2f} P={p:.3f} R={r:.3f} F={f:.3f}")
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        report.write_csv(
            out_dir / "sweep.csv",
            [{"nu": nu, "precision": p, "recall": r, "fmeasure": f} for nu, p, r, f in curve],
        )
        report.render_sweep(curve, out_dir / "rb_sweep.png")
        click.echo(f"wrote {out_dir / 'sweep.csv'} and {out_dir / 'rb_sweep.png'}")


@main.command()
@click.option("--task", required=True, type=click.Path(exists=True))
@click.option("--history", required=True)
@click.option("--target", type=click.Choice(["r", "p", "f"]), default="f", show_default=True)
@click.option("--mode", type=click.Choice(["static", "dynamic"]), default="dynamic", show_default=True)
@click.option("--estimator", type=click.Choice(["unbiased", "calibrated"]), default="unbiased",
              show_default=True)
@click.option("--model", type=click.Path(exists=True))
@click.option("--rb-variant", type=click.Choice([v.value for v in RBVariant]), default="uniform",
              show_default=True)
@click.option("--rb-param", default=0.9, show_default=True)
@click.option("--out", type=click.Path(), help="Write the final match as JSON here.")
def match(task, history, target, mode, estimator, model, rb_variant, rb_param, out) -> None:
    """End-to-end matching: history processing plus recall boosting."""
    _echo_config(
        "match", task=str(task), history=history, target=target, mode=mode,
        estimator=estimator, model=model and str(model), rb_variant=rb_variant,
        rb_param=rb_param, out=out and str(out),
    )
    bundle = load_task_bundle(task)
    hist = _resolve_history(bundle, history)
    spec = _target(target, mode)
    kind = EstimatorKind(estimator)
    params = ctx = None
    if kind is EstimatorKind.CALIBRATED:
        params, ctx = _load_calibrated(bundle, model)
    sigma_hp, _ = process_history(hist, spec, kind, bundle.ref_size(), params, ctx)
    if bundle.algorithmic is not None:
        cfg = RBConfig(RBVariant(rb_variant), rb_param)
        sigma_rb = rb_select(partial_matrix(bundle.algorithmic, hist), cfg, sigma_hp)
    else:
        click.echo("warning: no algorithmic matrix; skipping recall boosting", err=True)
        sigma_rb = Match()
    final = finalize(sigma_hp, sigma_rb)
    click.echo(f"hp match: {sorted(sigma_hp.pairs)}")
    click.echo(f"rb match: {sorted(sigma_rb.pairs)}")
    click.echo(f"final match: {sorted(final.pairs)}")
    if bundle.reference is not None:
        p, r, f = prf(final, bundle.reference)
        click.echo(f"quality: P={p:.3f} R={r:.3f} F={f:.3f}")
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(
            json.dumps(
                {
                    "hp": sorted(sigma_hp.pairs),
                    "rb": sorted(sigma_rb.pairs),
                    "final": sorted(final.pairs),
                },
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
        click.echo(f"wrote {out}")


@main.command()
@click.option("--task-dir", required=True, type=click.Path(exists=True),
              envvar="MATCHFLOW_TASK_DIR",
              help="Directory containing task bundle subdirectories.")
@click.option("--model", type=click.Path(exists=True), envvar="MATCHFLOW_MODEL")
@click.option("--host", default="127.0.0.1", show_default=True, envvar="MATCHFLOW_HOST")
@click.option("--port", default=8787, show_default=True, envvar="MATCHFLOW_PORT")
@click.option("--session-dir", type=click.Path(), envvar="MATCHFLOW_SESSION_DIR",
              help="Persist sessions as append-only logs here (crash recovery).")
def serve(task_dir, model, host, port, session_dir) -> None:
    """Run the interactive session service."""
    _echo_config(
        "serve", task_dir=str(task_dir), model=model and str(model), host=host,
        port=port, session_dir=session_dir and str(session_dir),
    )
    from .service import run

    run(str(task_dir), model and str(model), host, port, session_dir and str(session_dir))


if __name__ == "__main__":
    main()
