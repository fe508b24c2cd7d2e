"""Core matching model: schemata, matrices, matches, decision histories.

All types are immutable values; every operation here is a pure function,
so anything in this module is safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

Pair = tuple[int, int]


@dataclass(frozen=True)
class Attribute:
    """A single schema attribute (a leaf of the schema tree)."""

    id: int
    name: str
    path: tuple[str, ...]
    datatype: Optional[str] = None
    instances: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.path:
            raise ValueError(f"attribute {self.name!r}: path must be non-empty")


@dataclass(frozen=True)
class Schema:
    """An ordered collection of attributes; one side of a matching task."""

    name: str
    attributes: tuple[Attribute, ...]

    def __post_init__(self) -> None:
        if len(self.attributes) < 1:
            raise ValueError(f"schema {self.name!r}: needs at least one attribute")
        ids = [a.id for a in self.attributes]
        if ids != list(range(len(ids))):
            raise ValueError(
                f"schema {self.name!r}: attribute ids must be contiguous 0..{len(ids) - 1}, got {ids}"
            )

    def __len__(self) -> int:
        return len(self.attributes)


class MatchingMatrix:
    """An n x m grid of confidence values in [0, 1]; unassigned cells hold NaN.

    The backing array is read-only; construct a new matrix to change values.
    """

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray):
        arr = np.asarray(values, dtype=np.float64).copy()
        if arr.ndim != 2:
            raise ValueError(f"matrix must be 2-dimensional, got shape {arr.shape}")
        assigned = arr[~np.isnan(arr)]
        if assigned.size and (assigned.min() < 0.0 or assigned.max() > 1.0):
            raise ValueError("assigned matrix entries must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("MatchingMatrix is immutable")

    @classmethod
    def empty(cls, n: int, m: int) -> "MatchingMatrix":
        return cls(np.full((n, m), np.nan))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def value(self, row: int, col: int) -> Optional[float]:
        v = self.values[row, col]
        return None if math.isnan(v) else float(v)

    def assigned_pairs(self) -> frozenset[Pair]:
        rows, cols = np.nonzero(~np.isnan(self.values))
        return frozenset(zip(rows.tolist(), cols.tolist()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MatchingMatrix):
            return NotImplemented
        if self.values.shape != other.values.shape:
            return False
        both_nan = np.isnan(self.values) & np.isnan(other.values)
        return bool(np.all(both_nan | (self.values == other.values)))


@dataclass(frozen=True)
class Correspondence:
    """One candidate attribute pair, optionally carrying a confidence value."""

    row: int
    col: int
    value: Optional[float] = None

    def __post_init__(self) -> None:
        if self.row < 0 or self.col < 0:
            raise ValueError(f"correspondence indices must be non-negative, got ({self.row}, {self.col})")
        if self.value is not None and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"correspondence value {self.value} outside [0, 1]")

    @property
    def pair(self) -> Pair:
        return (self.row, self.col)


@dataclass(frozen=True)
class Match:
    """A selected set of correspondences, identified by their (row, col) pairs."""

    pairs: frozenset[Pair] = field(default_factory=frozenset)

    @classmethod
    def of(cls, pairs: Iterable[Pair]) -> "Match":
        return cls(frozenset((int(r), int(c)) for r, c in pairs))

    @classmethod
    def from_correspondences(cls, corrs: Iterable[Correspondence]) -> "Match":
        return cls(frozenset(c.pair for c in corrs))

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair: Pair) -> bool:
        return pair in self.pairs

    def __or__(self, other: "Match") -> "Match":
        return Match(self.pairs | other.pairs)

    def __and__(self, other: "Match") -> "Match":
        return Match(self.pairs & other.pairs)

    def __sub__(self, other: "Match") -> "Match":
        return Match(self.pairs - other.pairs)

    def issubset(self, other: "Match") -> bool:
        return self.pairs <= other.pairs


@dataclass(frozen=True)
class ReferenceMatch:
    """The binary ground-truth match."""

    pairs: frozenset[Pair]

    @classmethod
    def of(cls, pairs: Iterable[Pair]) -> "ReferenceMatch":
        return cls(frozenset((int(r), int(c)) for r, c in pairs))

    @property
    def known_size(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair: Pair) -> bool:
        return pair in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class DecisionRecord:
    """One human matching decision: a pair, a confidence, a timestamp."""

    pair: Pair
    confidence: float
    timestamp: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.timestamp < 0.0:
            raise ValueError(f"timestamp {self.timestamp} must be >= 0")


@dataclass(frozen=True)
class DecisionHistory:
    """A timestamp-ordered sequence of decisions.

    The container itself stays permissive so that malformed histories can be
    inspected; use :func:`validate_history` to obtain the list of violations.
    """

    records: tuple[DecisionRecord, ...] = ()

    @classmethod
    def of(cls, records: Iterable[DecisionRecord]) -> "DecisionHistory":
        return cls(tuple(records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def touched_pairs(self) -> frozenset[Pair]:
        return frozenset(r.pair for r in self.records)


def validate_history(history: DecisionHistory, n: int, m: int) -> list[str]:
    """Check a history against its invariants; returns human-readable violations."""
    violations: list[str] = []
    prev_t: Optional[float] = None
    for idx, rec in enumerate(history.records):
        i, j = rec.pair
        if not (0 <= i < n and 0 <= j < m):
            violations.append(f"record {idx}: pair ({i}, {j}) out of bounds for {n}x{m} task")
        if not 0.0 <= rec.confidence <= 1.0:
            violations.append(f"record {idx}: confidence out of range ({rec.confidence})")
        if rec.timestamp < 0.0:
            violations.append(f"record {idx}: negative timestamp ({rec.timestamp})")
        if prev_t is not None and rec.timestamp <= prev_t:
            violations.append(
                f"record {idx}: non-increasing timestamp ({rec.timestamp} after {prev_t})"
            )
        prev_t = rec.timestamp
    return violations


def history_to_matrix(history: DecisionHistory, n: int, m: int) -> MatchingMatrix:
    """Project a history onto a matrix, keeping the latest confidence per pair."""
    values = np.full((n, m), np.nan)
    for idx, rec in enumerate(history.records):
        i, j = rec.pair
        if not (0 <= i < n and 0 <= j < m):
            raise ValueError(
                f"record {idx}: pair ({i}, {j}) out of bounds for {n}x{m} matrix"
            )
        values[i, j] = rec.confidence
    return MatchingMatrix(values)


def precision(match: Match, ref: ReferenceMatch) -> float:
    """|sigma ∩ sigma*| / |sigma|, with the empty match reported as 0."""
    if len(match) == 0:
        return 0.0
    return len(match.pairs & ref.pairs) / len(match)


def recall(match: Match, ref: ReferenceMatch) -> float:
    """|sigma ∩ sigma*| / |sigma*|, with an empty reference reported as 0."""
    if len(ref) == 0:
        return 0.0
    return len(match.pairs & ref.pairs) / len(ref)


def fmeasure(match: Match, ref: ReferenceMatch) -> float:
    """Harmonic mean of precision and recall; 0 when both vanish."""
    p = precision(match, ref)
    r = recall(match, ref)
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def prf(match: Match, ref: ReferenceMatch) -> tuple[float, float, float]:
    return precision(match, ref), recall(match, ref), fmeasure(match, ref)
