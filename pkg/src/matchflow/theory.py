"""Monotonicity conditions and expectation estimators for match growth.

Implements the membership tests for the match-pair subsets over which
precision and f-measure are guaranteed not to decrease, their probabilistic
counterparts over expected values, and an exhaustive-enumeration oracle that
recomputes the expectations from first principles.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import Match, Pair, ReferenceMatch

BRUTE_FORCE_CAP = 20


class MeasureKind(enum.Enum):
    RECALL = "r"
    PRECISION = "p"
    FMEASURE = "f"


@dataclass(frozen=True)
class ConfidenceMatch:
    """An ordered match in which every correspondence carries a confidence."""

    entries: tuple[tuple[Pair, float], ...] = ()

    def __post_init__(self) -> None:
        seen: set[Pair] = set()
        for pair, conf in self.entries:
            if not 0.0 <= conf <= 1.0:
                raise ValueError(f"confidence {conf} for pair {pair} outside [0, 1]")
            if pair in seen:
                raise ValueError(f"duplicate pair {pair} in confidence match")
            seen.add(pair)

    @classmethod
    def of(cls, entries: Iterable[tuple[Pair, float]]) -> "ConfidenceMatch":
        return cls(tuple(((int(r), int(c)), float(v)) for (r, c), v in entries))

    def __len__(self) -> int:
        return len(self.entries)

    def confidences(self) -> tuple[float, ...]:
        return tuple(conf for _, conf in self.entries)

    def pairs(self) -> frozenset[Pair]:
        return frozenset(pair for pair, _ in self.entries)

    def with_entry(self, pair: Pair, conf: float) -> "ConfidenceMatch":
        if pair in self.pairs():
            raise ValueError(f"pair {pair} already present")
        return ConfidenceMatch(self.entries + ((pair, conf),))


def in_sigma_p(sigma: Match, delta: Match, ref: ReferenceMatch) -> bool:
    """Is P(sigma) <= P(delta)?  Membership in the precision-monotone subset.

    Empty-set conventions follow the proofs: an empty sigma inherits delta's
    precision and an empty delta inherits sigma's, so either way membership
    holds.  The comparison is exact (integer cross-multiplication), keeping
    tie cases faithful to the "<=" in the condition.
    """
    if sigma.pairs & delta.pairs:
        raise ValueError("sigma and delta must be disjoint")
    if len(sigma) == 0 or len(delta) == 0:
        return True
    ts = len(sigma.pairs & ref.pairs)
    td = len(delta.pairs & ref.pairs)
    return ts * len(delta) <= td * len(sigma)


def in_sigma_f(sigma: Match, delta: Match, ref: ReferenceMatch) -> bool:
    """Is 0.5 * F(sigma) <= P(delta)?  Membership in the f-measure-monotone
    subset, compared exactly via integer cross-multiplication."""
    if sigma.pairs & delta.pairs:
        raise ValueError("sigma and delta must be disjoint")
    if len(delta) == 0:
        # P(delta) inherits P(sigma), and 0.5*F(sigma) <= P(sigma) always holds.
        return True
    ts = len(sigma.pairs & ref.pairs)
    td = len(delta.pairs & ref.pairs)
    # 0.5 * 2*ts/(|sigma| + |ref|) <= td/|delta|
    return ts * len(delta) <= td * (len(sigma) + len(ref))


def is_miem_pair(kind: MeasureKind, sigma: Match, sigma2: Match, ref: ReferenceMatch) -> bool:
    """Did the chosen measure not decrease from sigma to its superset sigma2?
    Exact comparisons; precision over empty matches uses the proof conventions."""
    if not sigma.issubset(sigma2):
        raise ValueError("sigma must be a subset of sigma2")
    ts = len(sigma.pairs & ref.pairs)
    t2 = len(sigma2.pairs & ref.pairs)
    if kind is MeasureKind.RECALL:
        return ts <= t2
    if kind is MeasureKind.PRECISION:
        if len(sigma) == 0 or len(sigma2) == len(sigma):
            return True  # P inherited from the other side; values coincide
        return ts * len(sigma2) <= t2 * len(sigma)
    # F(sigma) = 2*ts/(|sigma| + |ref|); empty ref makes both sides 0.
    return ts * (len(sigma2) + len(ref)) <= t2 * (len(sigma) + len(ref))


def expected_precision(cm: ConfidenceMatch) -> float:
    """Expected precision of a confidence match: the mean confidence (0 if empty)."""
    if len(cm) == 0:
        return 0.0
    return float(sum(cm.confidences())) / len(cm)


def expected_fmeasure(cm: ConfidenceMatch, ref_size: int) -> float:
    """Expected f-measure: 2 * sum(confidences) / (|sigma| + ref_size)."""
    if ref_size < 1:
        raise ValueError(f"ref_size must be >= 1, got {ref_size}")
    return 2.0 * float(sum(cm.confidences())) / (len(cm) + ref_size)


def prob_annealer_condition(
    kind: MeasureKind, cm: ConfidenceMatch, delta_prob: float, ref_size: int
) -> bool:
    """Does adding a correspondence of correctness probability delta_prob keep
    the expected measure from decreasing?

    Recall always qualifies; precision requires E(P) <= delta_prob; f-measure
    requires 0.5 * E(F) <= delta_prob.  Ties accept.
    """
    if not 0.0 <= delta_prob <= 1.0:
        raise ValueError(f"delta_prob {delta_prob} outside [0, 1]")
    if kind is MeasureKind.RECALL:
        return True
    if kind is MeasureKind.PRECISION:
        return expected_precision(cm) <= delta_prob
    return 0.5 * expected_fmeasure(cm, ref_size) <= delta_prob


def brute_force_expectations(cm: ConfidenceMatch, ref_size: int) -> tuple[float, float]:
    """Exact (E(P), E(F)) by enumerating every correctness outcome.

    Each correspondence is treated as an independent Bernoulli draw with its
    confidence as the success probability and |sigma*| held at ref_size.
    Enumeration is capped at 2^20 outcomes.
    """
    if ref_size < 1:
        raise ValueError(f"ref_size must be >= 1, got {ref_size}")
    k = len(cm)
    if k > BRUTE_FORCE_CAP:
        raise ValueError(f"confidence match of size {k} exceeds enumeration cap {BRUTE_FORCE_CAP}")
    if k == 0:
        return 0.0, 0.0

    confs = np.asarray(cm.confidences(), dtype=np.float64)
    # outcomes[o, i] is 1 when correspondence i is correct in outcome o
    outcomes = ((np.arange(2**k)[:, None] >> np.arange(k)[None, :]) & 1).astype(np.float64)
    probs = np.prod(np.where(outcomes == 1.0, confs, 1.0 - confs), axis=1)
    n_correct = outcomes.sum(axis=1)
    e_p = float(np.dot(probs, n_correct / k))
    e_f = float(np.dot(probs, 2.0 * n_correct / (k + ref_size)))
    return e_p, e_f
