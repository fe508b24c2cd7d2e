"""Training loop for the calibration network: Adam over padded mini-batches."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .network import (
    PARAM_FIELDS,
    CalibratorParams,
    init_params,
    loss_and_gradients,
)


@dataclass(frozen=True)
class SequenceExample:
    """One matcher's history: raw features (T, 4) and labels (T, 3)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        if self.features.ndim != 2 or self.features.shape[1] != 4:
            raise ValueError(f"features must be (T, 4), got {self.features.shape}")
        if self.labels.shape != (self.features.shape[0], 3):
            raise ValueError(
                f"labels must be ({self.features.shape[0]}, 3), got {self.labels.shape}"
            )


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 50
    batch_size: int = 16
    seed: int = 0
    patience: int = 5
    hidden_size: int = 64
    fc_size: int = 128
    val_fraction: float = 0.1
    delta_clip_percentile: float = 99.0
    # (classifier, precision head, f-measure head) loss weights; zero two of
    # them to train a single-task network instead of the shared one.
    head_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)


def _pad_batch(examples: Sequence[SequenceExample]):
    max_t = max(ex.features.shape[0] for ex in examples)
    bsz = len(examples)
    inputs = np.zeros((bsz, max_t, 4))
    labels = np.zeros((bsz, max_t, 3))
    mask = np.zeros((bsz, max_t))
    for k, ex in enumerate(examples):
        t = ex.features.shape[0]
        inputs[k, :t] = ex.features
        labels[k, :t] = ex.labels
        mask[k, :t] = 1.0
    return inputs, labels, mask


def _mean_loss(
    params: CalibratorParams,
    examples: Sequence[SequenceExample],
    head_weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> float:
    if not examples:
        return math.inf
    inputs, labels, mask = _pad_batch(examples)
    loss, _ = loss_and_gradients(params, inputs, labels, mask, head_weights)
    return loss


class _Adam:
    def __init__(self, params: CalibratorParams, cfg: TrainConfig):
        self.cfg = cfg
        self.m = {n: np.zeros_like(getattr(params, n)) for n in PARAM_FIELDS}
        self.v = {n: np.zeros_like(getattr(params, n)) for n in PARAM_FIELDS}
        self.t = 0

    def step(self, params: CalibratorParams, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c = self.cfg
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for name in PARAM_FIELDS:
            g = grads[name]
            self.m[name] = c.beta1 * self.m[name] + (1.0 - c.beta1) * g
            self.v[name] = c.beta2 * self.v[name] + (1.0 - c.beta2) * g**2
            update = c.lr * (self.m[name] / bc1) / (np.sqrt(self.v[name] / bc2) + c.eps)
            getattr(params, name)[...] -= update


def train(
    dataset: Sequence[SequenceExample],
    cfg: TrainConfig = TrainConfig(),
    on_epoch: Optional[Callable[[int, float], None]] = None,
) -> CalibratorParams:
    """Train a calibrator on per-matcher sequences; returns best-validation params.

    Deterministic given cfg.seed.  Zero epochs returns the initialization
    unchanged (with scaling constants still fitted from the data).
    `on_epoch` receives (epoch, tracked score) after every epoch.
    """
    if not dataset:
        raise ValueError("training dataset is empty")

    deltas = np.concatenate([ex.features[:, 1] for ex in dataset if len(ex.features)])
    delta_clip = float(np.percentile(deltas, cfg.delta_clip_percentile)) if deltas.size else 1.0
    delta_clip = max(delta_clip, 1e-9)

    params = init_params(cfg.hidden_size, cfg.fc_size, seed=cfg.seed, delta_clip=delta_clip)
    if cfg.epochs == 0:
        return params

    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(dataset))
    n_val = int(round(cfg.val_fraction * len(dataset)))
    n_val = min(max(n_val, 1), len(dataset) - 1) if len(dataset) > 1 else 0
    val = [dataset[i] for i in order[:n_val]]
    tr = [dataset[i] for i in order[n_val:]]

    optimizer = _Adam(params, cfg)
    best = params.copy()
    best_val = _mean_loss(params, val, cfg.head_weights) if val else math.inf
    stale = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(tr))
        for start in range(0, len(tr), cfg.batch_size):
            batch = [tr[i] for i in perm[start : start + cfg.batch_size]]
            inputs, labels, mask = _pad_batch(batch)
            loss, grads = loss_and_gradients(params, inputs, labels, mask, cfg.head_weights)
            if not math.isfinite(loss):
                raise RuntimeError(
                    f"non-finite training loss {loss} at epoch {epoch}, "
                    f"batch starting {start} (batch of {len(batch)})"
                )
            optimizer.step(params, grads)
        score = (
            _mean_loss(params, val, cfg.head_weights)
            if val
            else _mean_loss(params, tr, cfg.head_weights)
        )
        if on_epoch is not None:
            on_epoch(epoch, score)
        if score < best_val - 1e-12:
            best_val = score
            best = params.copy()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best
