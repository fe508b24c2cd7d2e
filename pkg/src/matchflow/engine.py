"""Step-wise match construction from a decision history.

Walks decisions in timestamp order and accepts or rejects each one against a
threshold chosen by the target measure: static thresholds are fixed constants,
dynamic thresholds track an estimate of the running match's quality.  The
estimate comes either from the confidences themselves (unbiased matching) or
from the trained calibrator.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

from .calibrator import (
    CalibratorParams,
    FeatureContext,
    LstmState,
    encode_decision,
    forward_step,
    init_state,
)
from .core import DecisionHistory, DecisionRecord, Match, Pair
from .theory import ConfidenceMatch, MeasureKind, expected_fmeasure, expected_precision


class ThresholdMode(enum.Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


class EstimatorKind(enum.Enum):
    UNBIASED = "unbiased"
    CALIBRATED = "calibrated"


@dataclass(frozen=True)
class TargetSpec:
    measure: MeasureKind
    mode: ThresholdMode = ThresholdMode.DYNAMIC


@dataclass(frozen=True)
class StepVerdict:
    """The audit record for one processed decision."""

    index: int
    pair: Pair
    confidence_used: float
    threshold: float
    accepted: bool
    running_match_size: int


def static_threshold(target: MeasureKind) -> float:
    """The global acceptance threshold per target measure: R 0.0, F 0.5, P 1.0."""
    return {
        MeasureKind.RECALL: 0.0,
        MeasureKind.FMEASURE: 0.5,
        MeasureKind.PRECISION: 1.0,
    }[target]


@dataclass(frozen=True)
class RunningState:
    """Immutable fold state; each `step` returns a new one.

    `accepted` maps pairs to the confidence value they were accepted with
    (the raw confidence under the unbiased estimator, the calibrated
    correctness probability otherwise).
    """

    target: TargetSpec
    estimator: EstimatorKind
    ref_size: int
    accepted: tuple[tuple[Pair, float], ...] = ()
    last_timestamp: Optional[float] = None
    step_index: int = 0
    calibrator: Optional[CalibratorParams] = None
    context: Optional[FeatureContext] = None
    lstm: Optional[LstmState] = None

    def accepted_match(self) -> Match:
        return Match.of(pair for pair, _ in self.accepted)

    def accepted_cm(self) -> ConfidenceMatch:
        return ConfidenceMatch.of(self.accepted)


def start_state(
    target: TargetSpec,
    estimator: EstimatorKind,
    ref_size: int,
    calibrator: Optional[CalibratorParams] = None,
    context: Optional[FeatureContext] = None,
) -> RunningState:
    if ref_size < 1:
        raise ValueError(f"ref_size must be >= 1, got {ref_size}")
    if estimator is EstimatorKind.CALIBRATED:
        if calibrator is None or context is None:
            raise ValueError("calibrated processing requires calibrator params and a feature context")
        return RunningState(
            target=target,
            estimator=estimator,
            ref_size=ref_size,
            calibrator=calibrator,
            context=context,
            lstm=init_state(calibrator),
        )
    return RunningState(target=target, estimator=estimator, ref_size=ref_size)


def current_threshold(state: RunningState, p_est: float, f_est: float) -> float:
    """Resolve the acceptance threshold for the next decision."""
    target = state.target
    if target.mode is ThresholdMode.STATIC or target.measure is MeasureKind.RECALL:
        return static_threshold(target.measure)
    if target.measure is MeasureKind.PRECISION:
        return p_est
    return 0.5 * f_est


def unbiased_estimates(state: RunningState) -> tuple[float, float]:
    """Running (E(P), E(F)) over the accepted match's stored confidences."""
    cm = state.accepted_cm()
    return expected_precision(cm), expected_fmeasure(cm, state.ref_size)


def step(state: RunningState, decision: DecisionRecord) -> tuple[RunningState, StepVerdict]:
    """Process one decision; acceptance updates the running match, rejection of
    a re-decision removes the pair (an un-select is a confidence-0 decision)."""
    if state.last_timestamp is not None and decision.timestamp <= state.last_timestamp:
        raise ValueError(
            f"timestamp regression: {decision.timestamp} after {state.last_timestamp}"
        )

    new_lstm = state.lstm
    if state.estimator is EstimatorKind.CALIBRATED:
        assert state.calibrator is not None and state.context is not None
        prev_t = state.last_timestamp if state.last_timestamp is not None else state.context.session_start
        feature = encode_decision(decision, prev_t, state.context)
        new_lstm, triple = forward_step(state.calibrator, state.lstm, feature.as_array())
        value = triple.pr_correct
        p_est, f_est = triple.p_hat, triple.f_hat
    else:
        value = decision.confidence
        p_est, f_est = unbiased_estimates(state)

    threshold = current_threshold(state, p_est, f_est)
    accepted = threshold <= value

    entries = dict(state.accepted)
    if accepted:
        entries[decision.pair] = value
    else:
        entries.pop(decision.pair, None)

    new_state = replace(
        state,
        accepted=tuple(entries.items()),
        last_timestamp=decision.timestamp,
        step_index=state.step_index + 1,
        lstm=new_lstm,
    )
    verdict = StepVerdict(
        index=state.step_index,
        pair=decision.pair,
        confidence_used=value,
        threshold=threshold,
        accepted=accepted,
        running_match_size=len(entries),
    )
    return new_state, verdict


def process_history(
    history: DecisionHistory,
    target: TargetSpec,
    estimator: EstimatorKind = EstimatorKind.UNBIASED,
    ref_size: int = 1,
    calibrator: Optional[CalibratorParams] = None,
    context: Optional[FeatureContext] = None,
) -> tuple[Match, list[StepVerdict]]:
    """Batch form of `step`: fold the whole history and return the accepted
    match with the per-step audit trail."""
    state = start_state(target, estimator, ref_size, calibrator, context)
    verdicts: list[StepVerdict] = []
    for decision in history.records:
        state, verdict = step(state, decision)
        verdicts.append(verdict)
    return state.accepted_match(), verdicts
