"""Algorithmic matchers.

First-line matchers turn a schema pair into a fully assigned similarity
matrix (name-based, lexicon-based, and path-based); second-line decision
makers turn a similarity matrix into a match.  The string-similarity
definitions here are deterministic stand-ins documented below, not
reproductions of any particular system.
"""

from __future__ import annotations

import re
from typing import Literal, Mapping, Sequence

import numpy as np

from .core import Match, Schema

# Name tokenization: split on case transitions, digit runs, "_", "-", "."
# and lower-case everything.  Digit runs act as separators and are dropped.
_TOKEN_SPLIT = re.compile(r"[_\-.\s]+|[0-9]+")
_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")


class SimilarityMatrix:
    """A fully assigned n x m grid of similarities in [0, 1]."""

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray):
        arr = np.asarray(values, dtype=np.float64).copy()
        if arr.ndim != 2:
            raise ValueError(f"similarity matrix must be 2-dimensional, got shape {arr.shape}")
        if np.isnan(arr).any():
            raise ValueError("similarity matrix must be fully assigned")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("similarity values must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("SimilarityMatrix is immutable")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


class Lexicon:
    """A symmetric token-relatedness map (token -> related tokens).

    The symmetric closure is taken on construction and every token is
    implicitly related to itself.
    """

    def __init__(self, relations: Mapping[str, set[str]] | None = None):
        table: dict[str, set[str]] = {}
        for token, related in (relations or {}).items():
            t = token.lower()
            for other in related:
                o = other.lower()
                table.setdefault(t, set()).add(o)
                table.setdefault(o, set()).add(t)
        self._table = {k: frozenset(v) for k, v in table.items()}

    def related(self, token: str) -> frozenset[str]:
        return self._table.get(token.lower(), frozenset())

    def relates(self, a: str, b: str) -> bool:
        a, b = a.lower(), b.lower()
        return a == b or b in self._table.get(a, frozenset())

    def expand(self, tokens: Sequence[str]) -> frozenset[str]:
        out = set(t.lower() for t in tokens)
        for t in tokens:
            out |= self.related(t)
        return frozenset(out)

    def __len__(self) -> int:
        return len(self._table)


def tokenize(name: str) -> list[str]:
    """Split an attribute name into lower-cased word tokens."""
    spaced = _CAMEL_BOUNDARY.sub(" ", name)
    return [t.lower() for t in _TOKEN_SPLIT.split(spaced) if t]


def levenshtein(a: str, b: str) -> int:
    """Classic dynamic-programming edit distance."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def trigrams(s: str) -> frozenset[str]:
    if len(s) < 3:
        return frozenset((s,)) if s else frozenset()
    return frozenset(s[i : i + 3] for i in range(len(s) - 2))


def _jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 0.0
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def name_similarity(a: str, b: str) -> float:
    """max(normalized edit similarity, trigram Jaccard) over tokenized names.

    The empty-name convention is 0: a nameless attribute resembles nothing.
    """
    ca = " ".join(tokenize(a))
    cb = " ".join(tokenize(b))
    if not ca or not cb:
        return 0.0
    edit = 1.0 - levenshtein(ca, cb) / max(len(ca), len(cb))
    return max(edit, _jaccard(trigrams(ca), trigrams(cb)))


def path_tokens(path: Sequence[str]) -> frozenset[str]:
    out: set[str] = set()
    for segment in path:
        out.update(tokenize(segment))
    return frozenset(out)


def term_match(s: Schema, s2: Schema) -> SimilarityMatrix:
    """Name-based matcher: entry (i, j) = name_similarity of the two names."""
    values = np.empty((len(s), len(s2)))
    for i, a in enumerate(s.attributes):
        for j, b in enumerate(s2.attributes):
            values[i, j] = name_similarity(a.name, b.name)
    return SimilarityMatrix(values)


def token_path_match(s: Schema, s2: Schema) -> SimilarityMatrix:
    """Structure-aware matcher: mean of path token-set Jaccard and name similarity."""
    values = np.empty((len(s), len(s2)))
    for i, a in enumerate(s.attributes):
        ta = path_tokens(a.path)
        for j, b in enumerate(s2.attributes):
            pj = _jaccard(ta, path_tokens(b.path))
            values[i, j] = 0.5 * (pj + name_similarity(a.name, b.name))
    return SimilarityMatrix(values)


def lexicon_match(s: Schema, s2: Schema, lex: Lexicon) -> SimilarityMatrix:
    """Synonym-aware matcher.

    Entry (i, j) is 1 when any name token of one side relates to a name token
    of the other via the lexicon; otherwise the name similarity of the
    lexicon-expanded token sets (sorted, space-joined).
    """
    values = np.empty((len(s), len(s2)))
    for i, a in enumerate(s.attributes):
        ta = tokenize(a.name)
        ea = " ".join(sorted(lex.expand(ta)))
        for j, b in enumerate(s2.attributes):
            tb = tokenize(b.name)
            if any(lex.relates(x, y) for x in ta for y in tb):
                values[i, j] = 1.0
            else:
                eb = " ".join(sorted(lex.expand(tb)))
                values[i, j] = name_similarity(ea, eb)
    return SimilarityMatrix(values)


def ensemble(mats: Sequence[SimilarityMatrix], weights: Sequence[float]) -> SimilarityMatrix:
    """Entry-wise weighted mean of equally shaped similarity matrices."""
    if not mats:
        raise ValueError("ensemble needs at least one matrix")
    if len(mats) != len(weights):
        raise ValueError(f"{len(mats)} matrices but {len(weights)} weights")
    w = np.asarray(weights, dtype=np.float64)
    if (w < 0).any() or w.sum() <= 0.0:
        raise ValueError("weights must be non-negative with positive sum")
    shape = mats[0].values.shape
    for k, mat in enumerate(mats):
        if mat.values.shape != shape:
            raise ValueError(f"matrix {k} has shape {mat.values.shape}, expected {shape}")
    stacked = np.stack([mat.values for mat in mats])
    combined = np.tensordot(w / w.sum(), stacked, axes=1)
    return SimilarityMatrix(np.clip(combined, 0.0, 1.0))


def slm_threshold(mat: SimilarityMatrix, nu: float) -> Match:
    """Select every entry with value >= nu."""
    if not 0.0 <= nu <= 1.0:
        raise ValueError(f"threshold {nu} outside [0, 1]")
    rows, cols = np.nonzero(mat.values >= nu)
    return Match.of(zip(rows.tolist(), cols.tolist()))


def slm_max_delta(
    mat: SimilarityMatrix, delta: float, axis: Literal["row", "column"] = "row"
) -> Match:
    """Select entries within delta of the maximum along the chosen axis."""
    if delta < 0.0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    if axis == "row":
        best = mat.values.max(axis=1, keepdims=True)
    elif axis == "column":
        best = mat.values.max(axis=0, keepdims=True)
    else:
        raise ValueError(f"axis must be 'row' or 'column', got {axis!r}")
    rows, cols = np.nonzero(mat.values + delta >= best)
    return Match.of(zip(rows.tolist(), cols.tolist()))


def slm_dominants(mat: SimilarityMatrix) -> Match:
    """Select entries that strictly dominate their whole row and column."""
    v = mat.values
    pairs = []
    for i in range(mat.n):
        for j in range(mat.m):
            row_ok = all(v[i, j] > v[i, jj] for jj in range(mat.m) if jj != j)
            col_ok = all(v[i, j] > v[ii, j] for ii in range(mat.n) if ii != i)
            if row_ok and col_ok:
                pairs.append((i, j))
    return Match.of(pairs)
