"""Report rendering: CSV tables with matplotlib figures written alongside.

Every report path emits the delimited data first (the record of note) and a
PNG rendering of the same data next to it.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .engine import StepVerdict
from .harness import EvalReport


def write_csv(path: str | Path, rows: Sequence[dict], columns: Optional[Sequence[str]] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        path.write_text("", encoding="utf-8")
        return
    cols = list(columns) if columns else list(rows[0].keys())
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


def reliability_points(estimates: Sequence[float], truths: Sequence[float], bins: int = 10):
    """Bucketed mean confidence vs empirical accuracy."""
    est = np.asarray(estimates)
    tru = np.asarray(truths)
    edges = np.linspace(0.0, 1.0, bins + 1)
    xs, ys, counts = [], [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (est >= lo) & (est < hi) if hi < 1.0 else (est >= lo) & (est <= hi)
        if mask.sum() == 0:
            continue
        xs.append(float(est[mask].mean()))
        ys.append(float(tru[mask].mean()))
        counts.append(int(mask.sum()))
    return xs, ys, counts


def render_reliability(report: EvalReport, path: str | Path, bins: int = 10) -> None:
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.plot([0, 1], [0, 1], "r--", lw=1, label="unbiased")
    styles = {"raw": "o-", "ml": "s-", "full": "^-"}
    for method, (est, tru) in report.pooled.items():
        if not est:
            continue
        xs, ys, _ = reliability_points(est, tru, bins)
        ax.plot(xs, ys, styles.get(method, "x-"), label=method)
    ax.set_xlabel("estimated correctness probability")
    ax.set_ylabel("empirical accuracy")
    ax.set_title("held-out reliability by method")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_hp_precision(report: EvalReport, path: str | Path) -> None:
    rows = report.hp_rows()
    keys = sorted({(r["target"], r["mode"]) for r in rows})
    methods = sorted({r["method"] for r in rows})
    fig, ax = plt.subplots(figsize=(8, 4.5))
    width = 0.8 / max(1, len(methods))
    for k, method in enumerate(methods):
        vals = []
        for target, mode in keys:
            cell = [
                r["mean_precision"]
                for r in rows
                if r["target"] == target and r["mode"] == mode and r["method"] == method
            ]
            vals.append(float(np.mean(cell)) if cell else np.nan)
        xs = np.arange(len(keys)) + k * width
        ax.bar(xs, vals, width=width, label=method)
    ax.set_xticks(np.arange(len(keys)) + 0.4 - width / 2)
    ax.set_xticklabels([f"{t}/{m}" for t, m in keys], rotation=20)
    ax.set_ylabel("mean precision (held out)")
    ax.set_title("history processing precision by target row")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_overall(report: EvalReport, path: str | Path) -> None:
    rows = report.overall_rows()
    keys = sorted({(r["target"], r["mode"]) for r in rows})
    fig, ax = plt.subplots(figsize=(8, 4.5))
    width = 0.35
    hp_vals, fin_vals = [], []
    for target, mode in keys:
        cell = [r for r in rows if r["target"] == target and r["mode"] == mode]
        hp_vals.append(float(np.mean([r["hp_fmeasure"] for r in cell])))
        fin_vals.append(float(np.mean([r["final_fmeasure"] for r in cell])))
    xs = np.arange(len(keys))
    ax.bar(xs, hp_vals, width=width, label="history processing only")
    ax.bar(xs + width, fin_vals, width=width, label="with recall boosting")
    ax.set_xticks(xs + width / 2)
    ax.set_xticklabels([f"{t}/{m}" for t, m in keys], rotation=20)
    ax.set_ylabel("mean f-measure (held out)")
    ax.set_title("recall boosting effect by target row")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_sweep(curve: Sequence[tuple[float, float, float, float]], path: str | Path) -> None:
    nus = [c[0] for c in curve]
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    ax.plot(nus, [c[1] for c in curve], "o-", label="precision")
    ax.plot(nus, [c[2] for c in curve], "^-", label="recall")
    ax.plot(nus, [c[3] for c in curve], "s-", label="f-measure")
    ax.set_xlabel("recall-boost threshold")
    ax.set_ylabel("mean quality over cohort")
    ax.set_title("recall-boost threshold sweep")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_timeline(verdicts: Sequence[StepVerdict], path: str | Path) -> None:
    """Per-step confidence bars with the moving threshold and verdict marks."""
    xs = np.arange(1, len(verdicts) + 1)
    confs = [v.confidence_used for v in verdicts]
    ths = [v.threshold for v in verdicts]
    fig, ax = plt.subplots(figsize=(7, 4))
    colors = ["tab:green" if v.accepted else "tab:red" for v in verdicts]
    ax.bar(xs, confs, color=colors, alpha=0.6, label="decision value")
    ax.step(xs, ths, where="mid", color="black", lw=1.5, label="threshold")
    for x, v in zip(xs, verdicts):
        ax.text(x, v.confidence_used + 0.02, "+" if v.accepted else "x",
                ha="center", fontsize=11)
    ax.set_ylim(0, 1.1)
    ax.set_xticks(xs)
    ax.set_xlabel("decision")
    ax.set_ylabel("value")
    ax.set_title("decision timeline")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def verdict_rows(verdicts: Sequence[StepVerdict]) -> list[dict]:
    return [
        {
            "index": v.index,
            "row": v.pair[0],
            "col": v.pair[1],
            "confidence_used": v.confidence_used,
            "threshold": v.threshold,
            "accepted": v.accepted,
            "running_match_size": v.running_match_size,
        }
        for v in verdicts
    ]


def _fmt(value) -> str:
    if value is None:
        return "undef"
    return f"{value:.3f}"


def summary_text(report: EvalReport) -> str:
    """A compact human-readable digest of the evaluation tables."""
    lines = [
        f"evaluation over {report.n_matchers} matchers, "
        f"{len(report.folds)} folds, seed {report.seed}",
        f"swept recall-boost thresholds per fold: "
        f"{[f.swept_nu for f in report.folds]}",
        "",
        "decision-level calibration (held out, mean over folds)",
        f"{'quantity':<12}{'method':<8}{'r':>8}{'tau':>8}{'rmse':>8}{'mae':>8}",
    ]
    calib = report.calibration_rows()
    for quantity in ("pr_correct", "p_prev", "f_prev"):
        for method in ("raw", "ml", "full"):
            cell = [r for r in calib if r["quantity"] == quantity and r["method"] == method]
            if not cell:
                continue
            means = {
                key: (None if any(r[key] is None for r in cell)
                      else float(np.mean([r[key] for r in cell])))
                for key in ("r", "tau", "rmse", "mae")
            }
            lines.append(
                f"{quantity:<12}{method:<8}{_fmt(means['r']):>8}{_fmt(means['tau']):>8}"
                f"{_fmt(means['rmse']):>8}{_fmt(means['mae']):>8}"
            )
    lines += [
        "",
        "history processing by target row (held out, mean over folds)",
        f"{'target':<14}{'method':<8}{'tp':>8}{'size':>8}{'precision':>10}",
    ]
    hp = report.hp_rows()
    for target, mode in sorted({(r["target"], r["mode"]) for r in hp}):
        for method in ("raw", "ml", "full"):
            cell = [
                r for r in hp
                if r["target"] == target and r["mode"] == mode and r["method"] == method
            ]
            if not cell:
                continue
            lines.append(
                f"{target + '/' + mode:<14}{method:<8}"
                f"{np.mean([r['mean_tp'] for r in cell]):>8.2f}"
                f"{np.mean([r['mean_size'] for r in cell]):>8.2f}"
                f"{np.mean([r['mean_precision'] for r in cell]):>10.3f}"
            )
    lines += [
        "",
        "recall boosting effect (full pipeline, held out, mean over folds)",
        f"{'target':<14}{'P hp':>8}{'R hp':>8}{'F hp':>8}{'P fin':>8}{'R fin':>8}{'F fin':>8}",
    ]
    overall = report.overall_rows()
    for target, mode in sorted({(r["target"], r["mode"]) for r in overall}):
        cell = [r for r in overall if r["target"] == target and r["mode"] == mode]
        lines.append(
            f"{target + '/' + mode:<14}"
            f"{np.mean([r['hp_precision'] for r in cell]):>8.3f}"
            f"{np.mean([r['hp_recall'] for r in cell]):>8.3f}"
            f"{np.mean([r['hp_fmeasure'] for r in cell]):>8.3f}"
            f"{np.mean([r['final_precision'] for r in cell]):>8.3f}"
            f"{np.mean([r['final_recall'] for r in cell]):>8.3f}"
            f"{np.mean([r['final_fmeasure'] for r in cell]):>8.3f}"
        )
    return "\n".join(lines) + "\n"


def write_evaluation(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """All evaluation outputs: CSV tables, a text digest, and the figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rows in (
        ("calibration", report.calibration_rows()),
        ("hp_precision", report.hp_rows()),
        ("overall", report.overall_rows()),
    ):
        path = out / f"{name}.csv"
        write_csv(path, rows)
        written.append(path)
    text_path = out / "summary.txt"
    text_path.write_text(summary_text(report), encoding="utf-8")
    written.append(text_path)
    for name, renderer in (
        ("reliability.png", render_reliability),
        ("hp_precision.png", render_hp_precision),
        ("overall.png", render_overall),
    ):
        path = out / name
        renderer(report, path)
        written.append(path)
    return written
