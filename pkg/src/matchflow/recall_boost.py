"""Recall boosting: algorithmic selection over human-unassigned matrix entries.

The algorithmic similarity matrix is restricted to the pairs no history
record ever touched; a threshold rule then picks correspondences from that
partial matrix, and the result is unioned with the history-processing match.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DecisionHistory, Match, Pair, ReferenceMatch, fmeasure
from .matchers import SimilarityMatrix


class RBVariant(enum.Enum):
    UNIFORM = "uniform"
    MAX_DELTA_ROW = "max_delta_row"
    MAX_DELTA_COL = "max_delta_col"
    DOMINANTS = "dominants"


@dataclass(frozen=True)
class RBConfig:
    """Selection rule over the partial matrix.

    `param` is the uniform threshold for the uniform variant and the window
    width for the others; `epsilon` guards the strict inequalities.
    """

    variant: RBVariant = RBVariant.UNIFORM
    param: float = 0.9
    epsilon: float = 1e-9

    def __post_init__(self) -> None:
        if not 0.0 <= self.param <= 1.0:
            raise ValueError(f"param {self.param} outside [0, 1]")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")


class PartialMatrix:
    """Similarity values only at pairs untouched by the history (NaN elsewhere)."""

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray):
        arr = np.asarray(values, dtype=np.float64).copy()
        if arr.ndim != 2:
            raise ValueError(f"partial matrix must be 2-dimensional, got shape {arr.shape}")
        assigned = arr[~np.isnan(arr)]
        if assigned.size and (assigned.min() < 0.0 or assigned.max() > 1.0):
            raise ValueError("assigned entries must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("PartialMatrix is immutable")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def present_pairs(self) -> frozenset[Pair]:
        rows, cols = np.nonzero(~np.isnan(self.values))
        return frozenset(zip(rows.tolist(), cols.tolist()))


def partial_matrix(algorithmic: SimilarityMatrix, history: DecisionHistory) -> PartialMatrix:
    """Mask out every pair the history touched (confidence-0 records included)."""
    values = algorithmic.values.copy()
    for i, j in history.touched_pairs():
        if not (0 <= i < algorithmic.n and 0 <= j < algorithmic.m):
            raise ValueError(
                f"history pair ({i}, {j}) out of bounds for "
                f"{algorithmic.n}x{algorithmic.m} matrix"
            )
        values[i, j] = np.nan
    return PartialMatrix(values)


def _strictly_above(value: float, bound: float, epsilon: float) -> bool:
    return value > bound + epsilon


def rb_select(partial: PartialMatrix, cfg: RBConfig, sigma_hp: Match) -> Match:
    """Apply the configured selection rule to the partial matrix.

    For the max-delta variants, rows (columns) already holding an accepted
    correspondence demand near-maximal similarity (value > 1 - param); rows
    without one accept any strictly positive value.  The dominants variant
    additionally requires the value to sit within `param` of both its row and
    column maxima when neither is occupied.
    """
    present = partial.present_pairs()
    overlap = sigma_hp.pairs & present
    if overlap:
        raise ValueError(f"sigma_hp overlaps the partial matrix at {sorted(overlap)[:3]}")

    v = partial.values
    hp_rows = {i for i, _ in sigma_hp.pairs}
    hp_cols = {j for _, j in sigma_hp.pairs}
    selected: list[Pair] = []

    if cfg.variant is RBVariant.UNIFORM:
        rows, cols = np.nonzero(~np.isnan(v) & (v >= cfg.param))
        return Match.of(zip(rows.tolist(), cols.tolist()))

    with np.errstate(all="ignore"):
        row_max = np.nanmax(v, axis=1, initial=-np.inf)
        col_max = np.nanmax(v, axis=0, initial=-np.inf)

    for i, j in sorted(present):
        value = float(v[i, j])
        if cfg.variant is RBVariant.MAX_DELTA_ROW:
            bound = 1.0 - cfg.param if i in hp_rows else 0.0
            take = _strictly_above(value, bound, cfg.epsilon)
        elif cfg.variant is RBVariant.MAX_DELTA_COL:
            bound = 1.0 - cfg.param if j in hp_cols else 0.0
            take = _strictly_above(value, bound, cfg.epsilon)
        else:  # DOMINANTS
            if i in hp_rows or j in hp_cols:
                take = _strictly_above(value, 1.0 - cfg.param, cfg.epsilon)
            else:
                take = (
                    _strictly_above(value, 0.0, cfg.epsilon)
                    and value >= row_max[i] - cfg.param
                    and value >= col_max[j] - cfg.param
                )
        if take:
            selected.append((i, j))
    return Match.of(selected)


def finalize(sigma_hp: Match, sigma_rb: Match) -> Match:
    """Union the two component matches; they must be disjoint by construction."""
    overlap = sigma_hp.pairs & sigma_rb.pairs
    if overlap:
        raise ValueError(f"component matches overlap at {sorted(overlap)[:3]}")
    return sigma_hp | sigma_rb


def sweep_rb_threshold(
    cases: Sequence[tuple[Match, PartialMatrix]],
    ref: ReferenceMatch,
    grid: Sequence[float],
    variant: RBVariant = RBVariant.UNIFORM,
    epsilon: float = 1e-9,
) -> float:
    """Pick the grid value maximizing mean F of the finalized matches.

    `cases` pairs each matcher's history-processing match with its partial
    matrix.  Ties go to the smaller threshold.
    """
    if not grid:
        raise ValueError("threshold grid is empty")
    best_nu = None
    best_f = -1.0
    for nu in sorted(grid):
        cfg = RBConfig(variant=variant, param=nu, epsilon=epsilon)
        mean_f = float(
            np.mean([fmeasure(finalize(hp, rb_select(pm, cfg, hp)), ref) for hp, pm in cases])
        ) if cases else 0.0
        if mean_f > best_f + 1e-12:
            best_f = mean_f
            best_nu = nu
    assert best_nu is not None
    return best_nu


def sweep_curve(
    cases: Sequence[tuple[Match, PartialMatrix]],
    ref: ReferenceMatch,
    grid: Sequence[float],
    variant: RBVariant = RBVariant.UNIFORM,
    epsilon: float = 1e-9,
) -> list[tuple[float, float, float, float]]:
    """Per grid point: (threshold, mean P, mean R, mean F) of finalized matches."""
    from .core import precision, recall

    out = []
    for nu in sorted(grid):
        cfg = RBConfig(variant=variant, param=nu, epsilon=epsilon)
        finals = [finalize(hp, rb_select(pm, cfg, hp)) for hp, pm in cases]
        out.append(
            (
                nu,
                float(np.mean([precision(s, ref) for s in finals])) if finals else 0.0,
                float(np.mean([recall(s, ref) for s in finals])) if finals else 0.0,
                float(np.mean([fmeasure(s, ref) for s in finals])) if finals else 0.0,
            )
        )
    return out
