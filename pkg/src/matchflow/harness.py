"""Batch evaluation harness: k-fold cohort studies of the matching pipeline.

For each fold a calibrator is trained on the training matchers (together with
a non-sequential baseline over the same features) and every method is scored
on the held-out matchers: decision-level calibration quality, precision of
history processing per target measure, and overall quality after recall
boosting at a threshold swept on the training fold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.linear_model import LinearRegression, LogisticRegression

from . import metrics
from .calibrator import (
    FeatureContext,
    PredictionTriple,
    SequenceExample,
    TrainConfig,
    build_consensus,
    encode_history,
    labels_array,
    lstm_forward,
    train,
)
from .core import DecisionHistory, Match, ReferenceMatch, fmeasure, precision, recall
from .engine import (
    EstimatorKind,
    StepVerdict,
    TargetSpec,
    ThresholdMode,
    current_threshold,
    process_history,
    start_state,
)
from .matchers import SimilarityMatrix
from .recall_boost import (
    RBConfig,
    RBVariant,
    finalize,
    partial_matrix,
    rb_select,
    sweep_rb_threshold,
)
from .simulate import Cohort
from .theory import ConfidenceMatch, MeasureKind, expected_fmeasure, expected_precision

TARGET_ROWS: tuple[tuple[MeasureKind, ThresholdMode], ...] = (
    (MeasureKind.RECALL, ThresholdMode.STATIC),
    (MeasureKind.PRECISION, ThresholdMode.STATIC),
    (MeasureKind.PRECISION, ThresholdMode.DYNAMIC),
    (MeasureKind.FMEASURE, ThresholdMode.STATIC),
    (MeasureKind.FMEASURE, ThresholdMode.DYNAMIC),
)

RB_GRID: tuple[float, ...] = tuple(round(0.05 * k, 2) for k in range(21))


def kfold_indices(count: int, folds: int, seed: int) -> list[tuple[list[int], list[int]]]:
    """Seed-deterministic, partition-exhaustive k-fold split."""
    if folds < 2 or folds > count:
        raise ValueError(f"folds must be in [2, {count}], got {folds}")
    order = np.random.default_rng(seed).permutation(count)
    chunks = np.array_split(order, folds)
    out = []
    for k in range(folds):
        test = sorted(int(i) for i in chunks[k])
        train_idx = sorted(int(i) for c in range(folds) if c != k for i in chunks[c])
        out.append((train_idx, test))
    return out


class MLBaseline:
    """Non-sequential learner over the same 4 features: a logistic classifier
    for correctness and two linear regressors for the prefix quality labels."""

    def __init__(self, seed: int = 0):
        self.clf = LogisticRegression(max_iter=1000, random_state=seed)
        self.reg_p = LinearRegression()
        self.reg_f = LinearRegression()
        self._clf_constant: Optional[float] = None

    def fit(self, examples: Sequence[SequenceExample]) -> "MLBaseline":
        x = np.concatenate([ex.features for ex in examples])
        y = np.concatenate([ex.labels for ex in examples])
        if len(np.unique(y[:, 0])) < 2:
            self._clf_constant = float(y[0, 0])
        else:
            self.clf.fit(x, y[:, 0])
        self.reg_p.fit(x, y[:, 1])
        self.reg_f.fit(x, y[:, 2])
        return self

    def predict(self, features: np.ndarray) -> list[PredictionTriple]:
        if self._clf_constant is not None:
            pr = np.full(len(features), self._clf_constant)
        else:
            pr = self.clf.predict_proba(features)[:, 1]
        p_hat = np.clip(self.reg_p.predict(features), 0.0, 1.0)
        f_hat = np.clip(self.reg_f.predict(features), 0.0, 1.0)
        return [
            PredictionTriple(float(a), float(b), float(c))
            for a, b, c in zip(pr, p_hat, f_hat)
        ]


def process_with_predictions(
    history: DecisionHistory,
    target: TargetSpec,
    preds: Sequence[PredictionTriple],
    ref_size: int,
) -> tuple[Match, list[StepVerdict]]:
    """History processing driven by precomputed per-step predictions (used for
    learners that are not wired into the engine, e.g. the ML baseline)."""
    if len(preds) != len(history):
        raise ValueError(f"{len(preds)} predictions for {len(history)} decisions")
    accepted: dict = {}
    verdicts: list[StepVerdict] = []
    state = start_state(target, EstimatorKind.UNBIASED, ref_size)
    for idx, (rec, triple) in enumerate(zip(history.records, preds)):
        threshold = current_threshold(state, triple.p_hat, triple.f_hat)
        ok = threshold <= triple.pr_correct
        if ok:
            accepted[rec.pair] = triple.pr_correct
        else:
            accepted.pop(rec.pair, None)
        verdicts.append(
            StepVerdict(
                index=idx,
                pair=rec.pair,
                confidence_used=triple.pr_correct,
                threshold=threshold,
                accepted=ok,
                running_match_size=len(accepted),
            )
        )
    return Match.of(accepted.keys()), verdicts


def raw_prediction_triples(history: DecisionHistory, ref_size: int) -> list[PredictionTriple]:
    """The unbiased-matching view of a history: the confidence is the
    correctness probability and prefix quality is estimated from confidences."""
    out = []
    seen: dict = {}
    for rec in history.records:
        cm = ConfidenceMatch.of(seen.items())
        out.append(
            PredictionTriple(
                pr_correct=rec.confidence,
                p_hat=expected_precision(cm),
                f_hat=expected_fmeasure(cm, ref_size),
            )
        )
        seen[rec.pair] = rec.confidence
    return out


@dataclass
class MatcherEval:
    """Per-matcher artifacts inside one fold."""

    matcher_id: str
    history: DecisionHistory
    features: np.ndarray
    labels: np.ndarray
    predictions: dict[str, list[PredictionTriple]] = field(default_factory=dict)


@dataclass
class FoldReport:
    fold: int
    swept_nu: float
    calibration: list[dict]
    hp_table: list[dict]
    overall_table: list[dict]


@dataclass
class EvalReport:
    folds: list[FoldReport]
    seed: int
    n_matchers: int
    # Pooled held-out (estimate, correctness) points per method, for
    # reliability reporting.
    pooled: dict[str, tuple[list[float], list[float]]] = field(default_factory=dict)

    def calibration_rows(self) -> list[dict]:
        return [dict(row, fold=f.fold) for f in self.folds for row in f.calibration]

    def hp_rows(self) -> list[dict]:
        return [dict(row, fold=f.fold) for f in self.folds for row in f.hp_table]

    def overall_rows(self) -> list[dict]:
        return [dict(row, fold=f.fold) for f in self.folds for row in f.overall_table]


METHODS = ("raw", "ml", "full")


def _calibration_metrics(
    cases: Sequence[MatcherEval], method: str, ref: ReferenceMatch
) -> list[dict]:
    """Pooled decision-level calibration over a fold's test matchers."""
    rows = []
    prs, correct = [], []
    p_est, p_true, f_est, f_true = [], [], [], []
    for case in cases:
        triples = case.predictions[method]
        for triple, lab, rec in zip(triples, case.labels, case.history.records):
            prs.append(triple.pr_correct)
            correct.append(lab[0])
            p_est.append(triple.p_hat)
            p_true.append(lab[1])
            f_est.append(triple.f_hat)
            f_true.append(lab[2])
    for quantity, est, true in (
        ("pr_correct", prs, correct),
        ("p_prev", p_est, p_true),
        ("f_prev", f_est, f_true),
    ):
        r = metrics.pearson_measure(est, true)
        tau = metrics.kendall_tau(metrics.PairedSeries.of(est, true))
        rmse, mae = metrics.rmse_mae(est, true)
        rows.append(
            {
                "method": method,
                "quantity": quantity,
                "r": r,
                "tau": tau,
                "rmse": rmse,
                "mae": mae,
                "count": len(est),
            }
        )
    return rows


def _hp_match(
    case: MatcherEval, method: str, target: TargetSpec, ref_size: int
) -> Match:
    if method == "raw":
        # Unbiased processing: running estimates over the accepted match.
        sigma, _ = process_history(
            case.history, target, EstimatorKind.UNBIASED, ref_size
        )
        return sigma
    sigma, _ = process_with_predictions(
        case.history, target, case.predictions[method], ref_size
    )
    return sigma


def run_evaluation(
    cohort: Cohort,
    algorithmic: SimilarityMatrix,
    folds: int = 5,
    seed: int = 0,
    train_cfg: Optional[TrainConfig] = None,
    rb_grid: Sequence[float] = RB_GRID,
) -> EvalReport:
    """K-fold evaluation of raw / ML-baseline / calibrated history processing
    plus recall boosting, on one cohort over one task."""
    ref = cohort.ref
    n, m = len(cohort.schema_a), len(cohort.schema_b)
    ref_size = len(ref) if len(ref) else min(n, m)
    entries = list(cohort.entries)
    reports: list[FoldReport] = []
    pooled: dict[str, tuple[list[float], list[float]]] = {
        method: ([], []) for method in METHODS
    }

    for fold, (train_idx, test_idx) in enumerate(kfold_indices(len(entries), folds, seed)):
        train_entries = [entries[i] for i in train_idx]
        test_entries = [entries[i] for i in test_idx]

        # Consensus comes from the training matchers only.
        consensus = build_consensus([h for _, h in train_entries], n, m)
        ctx = FeatureContext(consensus=consensus, algorithmic=algorithmic, session_start=0.0)

        def encode(entries_list) -> list[MatcherEval]:
            out = []
            for matcher_id, history in entries_list:
                out.append(
                    MatcherEval(
                        matcher_id=matcher_id,
                        history=history,
                        features=encode_history(history, ctx),
                        labels=labels_array(history, ref),
                    )
                )
            return out

        train_cases = encode(train_entries)
        test_cases = encode(test_entries)

        dataset = [
            SequenceExample(c.features, c.labels) for c in train_cases if len(c.features)
        ]
        cfg = train_cfg or TrainConfig(seed=seed + fold)
        params = train(dataset, cfg)
        ml = MLBaseline(seed=seed + fold).fit(dataset)

        for case in train_cases + test_cases:
            case.predictions["raw"] = raw_prediction_triples(case.history, ref_size)
            case.predictions["ml"] = ml.predict(case.features) if len(case.features) else []
            case.predictions["full"] = lstm_forward(params, case.features)

        calibration = [
            row for method in METHODS for row in _calibration_metrics(test_cases, method, ref)
        ]
        for method in METHODS:
            est, truth = pooled[method]
            for case in test_cases:
                est.extend(t.pr_correct for t in case.predictions[method])
                truth.extend(float(lab[0]) for lab in case.labels)

        hp_table: list[dict] = []
        overall_table: list[dict] = []
        target_f_dyn = TargetSpec(MeasureKind.FMEASURE, ThresholdMode.DYNAMIC)

        # RB threshold swept on the training fold, full pipeline, F-dynamic.
        train_hp_cases = [
            (
                _hp_match(c, "full", target_f_dyn, ref_size),
                partial_matrix(algorithmic, c.history),
            )
            for c in train_cases
        ]
        swept_nu = sweep_rb_threshold(train_hp_cases, ref, rb_grid)

        for measure, mode in TARGET_ROWS:
            target = TargetSpec(measure, mode)
            for method in METHODS:
                if measure is MeasureKind.RECALL and method != "raw":
                    continue  # accept-all is method-independent
                sizes, tps, precs = [], [], []
                for case in test_cases:
                    sigma = _hp_match(case, method, target, ref_size)
                    sizes.append(len(sigma))
                    tps.append(len(sigma.pairs & ref.pairs))
                    precs.append(precision(sigma, ref))
                hp_table.append(
                    {
                        "target": measure.value,
                        "mode": mode.value,
                        "method": method,
                        "mean_tp": float(np.mean(tps)),
                        "mean_size": float(np.mean(sizes)),
                        "mean_precision": float(np.mean(precs)),
                    }
                )

            # Overall (HP vs HP+RB) for the full pipeline on this row.
            hp_p, hp_r, hp_f, fin_p, fin_r, fin_f = [], [], [], [], [], []
            inclusion_ok = True
            for case in test_cases:
                sigma_hp = _hp_match(case, "full", target, ref_size)
                pm = partial_matrix(algorithmic, case.history)
                sigma_rb = rb_select(pm, RBConfig(RBVariant.UNIFORM, swept_nu), sigma_hp)
                final = finalize(sigma_hp, sigma_rb)
                inclusion_ok &= recall(final, ref) >= recall(sigma_hp, ref)
                hp_p.append(precision(sigma_hp, ref))
                hp_r.append(recall(sigma_hp, ref))
                hp_f.append(fmeasure(sigma_hp, ref))
                fin_p.append(precision(final, ref))
                fin_r.append(recall(final, ref))
                fin_f.append(fmeasure(final, ref))
            overall_table.append(
                {
                    "target": measure.value,
                    "mode": mode.value,
                    "hp_precision": float(np.mean(hp_p)),
                    "hp_recall": float(np.mean(hp_r)),
                    "hp_fmeasure": float(np.mean(hp_f)),
                    "final_precision": float(np.mean(fin_p)),
                    "final_recall": float(np.mean(fin_r)),
                    "final_fmeasure": float(np.mean(fin_f)),
                    "recall_inclusion_ok": inclusion_ok,
                }
            )

        reports.append(
            FoldReport(
                fold=fold,
                swept_nu=swept_nu,
                calibration=calibration,
                hp_table=hp_table,
                overall_table=overall_table,
            )
        )

    return EvalReport(folds=reports, seed=seed, n_matchers=len(entries), pooled=pooled)
