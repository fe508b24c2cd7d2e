"""Feature encoding and label construction for decision calibration.

Each decision is encoded as a 4-vector: the reported confidence, the time
spent on the decision, the cross-matcher consensus for the pair, and an
algorithmic similarity score for the pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import (
    DecisionHistory,
    DecisionRecord,
    Match,
    ReferenceMatch,
    fmeasure,
    precision,
)
from ..matchers import SimilarityMatrix


@dataclass(frozen=True)
class FeatureVector:
    """One encoded decision: (confidence, seconds spent, consensus, similarity)."""

    c: float
    delta_t: float
    a_e: float
    m_tilde: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.c <= 1.0:
            raise ValueError(f"confidence {self.c} outside [0, 1]")
        if self.delta_t < 0.0:
            raise ValueError(f"delta_t {self.delta_t} must be >= 0")
        if not 0.0 <= self.a_e <= 1.0:
            raise ValueError(f"consensus {self.a_e} outside [0, 1]")
        if not 0.0 <= self.m_tilde <= 1.0:
            raise ValueError(f"similarity {self.m_tilde} outside [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.c, self.delta_t, self.a_e, self.m_tilde], dtype=np.float64)


class ConsensusMatrix:
    """Per-pair counts of how many matchers decided on each correspondence."""

    __slots__ = ("counts", "matcher_total")

    def __init__(self, counts: np.ndarray, matcher_total: int):
        arr = np.asarray(counts, dtype=np.int64).copy()
        if arr.ndim != 2:
            raise ValueError(f"consensus counts must be 2-dimensional, got shape {arr.shape}")
        if matcher_total < 0:
            raise ValueError("matcher_total must be >= 0")
        if arr.size and (arr.min() < 0 or arr.max() > matcher_total):
            raise ValueError("counts must lie in [0, matcher_total]")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)
        object.__setattr__(self, "matcher_total", int(matcher_total))

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("ConsensusMatrix is immutable")

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @property
    def m(self) -> int:
        return self.counts.shape[1]

    def share(self, row: int, col: int) -> float:
        """Fraction of matchers that decided on (row, col)."""
        if self.matcher_total == 0:
            return 0.0
        return float(self.counts[row, col]) / self.matcher_total

    @classmethod
    def zeros(cls, n: int, m: int) -> "ConsensusMatrix":
        return cls(np.zeros((n, m), dtype=np.int64), 0)


def build_consensus(histories: Sequence[DecisionHistory], n: int, m: int) -> ConsensusMatrix:
    """Count, per pair, the histories that touch it at least once."""
    counts = np.zeros((n, m), dtype=np.int64)
    for history in histories:
        for i, j in history.touched_pairs():
            if not (0 <= i < n and 0 <= j < m):
                raise ValueError(f"pair ({i}, {j}) out of bounds for {n}x{m} task")
            counts[i, j] += 1
    return ConsensusMatrix(counts, len(histories))


@dataclass(frozen=True)
class FeatureContext:
    """Everything needed to encode a decision besides the decision itself."""

    consensus: ConsensusMatrix
    algorithmic: SimilarityMatrix
    session_start: float = 0.0

    def __post_init__(self) -> None:
        if (self.consensus.n, self.consensus.m) != (self.algorithmic.n, self.algorithmic.m):
            raise ValueError(
                f"consensus is {self.consensus.n}x{self.consensus.m} but similarity matrix "
                f"is {self.algorithmic.n}x{self.algorithmic.m}"
            )


def encode_decision(
    record: DecisionRecord, prev_timestamp: float, ctx: FeatureContext
) -> FeatureVector:
    """Encode one decision; prev_timestamp is the previous record's timestamp
    (the session start for the first decision)."""
    delta = record.timestamp - prev_timestamp
    if delta < 0.0:
        raise ValueError(
            f"negative time delta: record at {record.timestamp} after {prev_timestamp}"
        )
    i, j = record.pair
    return FeatureVector(
        c=record.confidence,
        delta_t=delta,
        a_e=ctx.consensus.share(i, j),
        m_tilde=float(ctx.algorithmic.values[i, j]),
    )


def encode_history(history: DecisionHistory, ctx: FeatureContext) -> np.ndarray:
    """Encode a whole history as a (T, 4) feature array."""
    rows = []
    prev = ctx.session_start
    for rec in history.records:
        rows.append(encode_decision(rec, prev, ctx).as_array())
        prev = rec.timestamp
    if not rows:
        return np.zeros((0, 4), dtype=np.float64)
    return np.stack(rows)


@dataclass(frozen=True)
class LabelTriple:
    """Supervision for one decision: correctness plus prefix-match quality."""

    correct: int
    p_prefix: float
    f_prefix: float

    def __post_init__(self) -> None:
        if self.correct not in (0, 1):
            raise ValueError(f"correct must be 0 or 1, got {self.correct}")
        if not 0.0 <= self.p_prefix <= 1.0 or not 0.0 <= self.f_prefix <= 1.0:
            raise ValueError("prefix measures must lie in [0, 1]")


def make_labels(history: DecisionHistory, ref: ReferenceMatch) -> list[LabelTriple]:
    """Label each decision with its correctness and the quality of the match
    formed by all distinct previously decided pairs (empty prefix scores 0)."""
    labels: list[LabelTriple] = []
    prefix: set[tuple[int, int]] = set()
    for rec in history.records:
        prefix_match = Match.of(prefix)
        labels.append(
            LabelTriple(
                correct=int(rec.pair in ref),
                p_prefix=precision(prefix_match, ref),
                f_prefix=fmeasure(prefix_match, ref),
            )
        )
        prefix.add(rec.pair)
    return labels


def labels_array(history: DecisionHistory, ref: ReferenceMatch) -> np.ndarray:
    """Stack :func:`make_labels` into a (T, 3) float array."""
    labels = make_labels(history, ref)
    if not labels:
        return np.zeros((0, 3), dtype=np.float64)
    return np.array([[lab.correct, lab.p_prefix, lab.f_prefix] for lab in labels])
