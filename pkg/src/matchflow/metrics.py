"""Bias and calibration measures: Pearson r, Kendall tau, RMSE, MAE.

Correlations can be undefined (zero variance, all pairs tied); that state is
reported as None, never coerced to 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ReferenceMatch
from .theory import ConfidenceMatch


@dataclass(frozen=True)
class PairedSeries:
    """Two aligned real-valued series (estimates against truths)."""

    estimates: tuple[float, ...]
    truths: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.estimates) != len(self.truths):
            raise ValueError(
                f"series lengths differ: {len(self.estimates)} vs {len(self.truths)}"
            )

    @classmethod
    def of(cls, estimates: Sequence[float], truths: Sequence[float]) -> "PairedSeries":
        return cls(tuple(float(x) for x in estimates), tuple(float(y) for y in truths))

    def __len__(self) -> int:
        return len(self.estimates)


def _pearson(xs: np.ndarray, ys: np.ndarray) -> Optional[float]:
    """Shared Pearson kernel; None when either side has zero variance."""
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sx = math.sqrt(float(np.dot(dx, dx)))
    sy = math.sqrt(float(np.dot(dy, dy)))
    if sx == 0.0 or sy == 0.0:
        return None
    return float(np.dot(dx, dy)) / (sx * sy)


def _indicators(match: ConfidenceMatch, ref: ReferenceMatch) -> np.ndarray:
    return np.array([1.0 if pair in ref else 0.0 for pair, _ in match.entries])


def pearson_match(match: ConfidenceMatch, ref: ReferenceMatch) -> Optional[float]:
    """Linear correlation between confidences and correctness indicators."""
    if len(match) < 2:
        raise ValueError(f"need at least 2 correspondences, got {len(match)}")
    return _pearson(np.array(match.confidences()), _indicators(match, ref))


def pearson_measure(estimates: Sequence[float], truths: Sequence[float]) -> Optional[float]:
    """Linear correlation between estimated and true measure values."""
    series = PairedSeries.of(estimates, truths)
    if len(series) < 2:
        raise ValueError(f"need at least 2 observations, got {len(series)}")
    return _pearson(np.array(series.estimates), np.array(series.truths))


def kendall_tau(series: PairedSeries) -> Optional[float]:
    """(C - D) / (C + D) over concordant/discordant pairs; ties on either
    side are excluded from both counts.  None when every pair is tied."""
    xs = np.asarray(series.estimates)
    ys = np.asarray(series.truths)
    sx = np.sign(xs[:, None] - xs[None, :])
    sy = np.sign(ys[:, None] - ys[None, :])
    prod = np.triu(sx * sy, k=1)
    concordant = int((prod > 0).sum())
    discordant = int((prod < 0).sum())
    if concordant + discordant == 0:
        return None
    return (concordant - discordant) / (concordant + discordant)


def rmse_mae(estimates: Sequence[float], truths: Sequence[float]) -> tuple[float, float]:
    series = PairedSeries.of(estimates, truths)
    if len(series) == 0:
        raise ValueError("cannot compute errors over an empty series")
    diff = np.asarray(series.estimates) - np.asarray(series.truths)
    rmse = float(np.sqrt(np.mean(diff**2)))
    mae = float(np.mean(np.abs(diff)))
    # Power-mean inequality; stripped under -O.
    assert rmse >= mae - 1e-12
    return rmse, mae


def rmse_mae_match(match: ConfidenceMatch, ref: ReferenceMatch) -> tuple[float, float]:
    """Errors of confidences against correctness indicators."""
    if len(match) == 0:
        raise ValueError("cannot compute errors over an empty match")
    return rmse_mae(match.confidences(), _indicators(match, ref).tolist())


def rmse_mae_measure(
    estimates: Sequence[float], truths: Sequence[float]
) -> tuple[float, float]:
    """Errors of estimated measure values against the true ones."""
    return rmse_mae(estimates, truths)
