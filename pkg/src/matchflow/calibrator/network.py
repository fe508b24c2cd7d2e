"""Recurrent calibration network, implemented directly on numpy.

A single LSTM layer reads the 4-feature decision encoding; a tanh is applied
to its hidden state, followed by a shared fully connected layer and three
heads: a 2-way correctness classifier (softmax) and two quality regressors
(sigmoid).  The backward pass is hand-derived backpropagation through time,
validated against central finite differences by :func:`gradient_check`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

INPUT_DIM = 4

# Gate order inside the stacked LSTM matrices.
_GATES = ("input", "forget", "cell", "output")

PARAM_FIELDS = (
    "wx",
    "wh",
    "b",
    "fc_w",
    "fc_b",
    "cls_w",
    "cls_b",
    "p_w",
    "p_b",
    "f_w",
    "f_b",
)


@dataclass(frozen=True)
class PredictionTriple:
    """Network output at one step: correctness probability and quality estimates."""

    pr_correct: float
    p_hat: float
    f_hat: float


@dataclass
class CalibratorParams:
    """All learnable weights plus the persisted feature-scaling constant.

    Shapes (H = hidden size, F = fully connected width, D = 4 input features):
    wx (4H, D), wh (4H, H), b (4H,), fc_w (F, H), fc_b (F,),
    cls_w (2, F), cls_b (2,), p_w (F,), p_b (1,), f_w (F,), f_b (1,).
    """

    wx: np.ndarray
    wh: np.ndarray
    b: np.ndarray
    fc_w: np.ndarray
    fc_b: np.ndarray
    cls_w: np.ndarray
    cls_b: np.ndarray
    p_w: np.ndarray
    p_b: np.ndarray
    f_w: np.ndarray
    f_b: np.ndarray
    delta_clip: float = 1.0

    @property
    def hidden_size(self) -> int:
        return self.wh.shape[1]

    @property
    def fc_size(self) -> int:
        return self.fc_w.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_FIELDS}

    def copy(self) -> "CalibratorParams":
        return replace(self, **{name: getattr(self, name).copy() for name in PARAM_FIELDS})

    def validate(self) -> None:
        h, f = self.hidden_size, self.fc_size
        expected = {
            "wx": (4 * h, INPUT_DIM),
            "wh": (4 * h, h),
            "b": (4 * h,),
            "fc_w": (f, h),
            "fc_b": (f,),
            "cls_w": (2, f),
            "cls_b": (2,),
            "p_w": (f,),
            "p_b": (1,),
            "f_w": (f,),
            "f_b": (1,),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"parameter {name} has shape {arr.shape}, expected {shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"parameter {name} contains non-finite values")
        if self.delta_clip <= 0.0:
            raise ValueError("delta_clip must be positive")


def init_params(
    hidden_size: int = 64,
    fc_size: int = 128,
    seed: int = 0,
    delta_clip: float = 1.0,
) -> CalibratorParams:
    """Seeded uniform(-1/sqrt(H), 1/sqrt(H)) weights; forget-gate bias starts at +1."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(hidden_size)
    u = lambda *shape: rng.uniform(-bound, bound, size=shape)
    b = np.zeros(4 * hidden_size)
    b[hidden_size : 2 * hidden_size] = 1.0  # forget gate
    return CalibratorParams(
        wx=u(4 * hidden_size, INPUT_DIM),
        wh=u(4 * hidden_size, hidden_size),
        b=b,
        fc_w=u(fc_size, hidden_size),
        fc_b=np.zeros(fc_size),
        cls_w=u(2, fc_size),
        cls_b=np.zeros(2),
        p_w=u(fc_size),
        p_b=np.zeros(1),
        f_w=u(fc_size),
        f_b=np.zeros(1),
        delta_clip=delta_clip,
    )


def zero_params(hidden_size: int = 64, fc_size: int = 128) -> CalibratorParams:
    p = init_params(hidden_size, fc_size, seed=0)
    return replace(p, **{name: np.zeros_like(getattr(p, name)) for name in PARAM_FIELDS})


def scale_features(params: CalibratorParams, raw: np.ndarray) -> np.ndarray:
    """Clip and min-max scale the time feature; the rest are already in [0, 1]."""
    out = np.array(raw, dtype=np.float64, copy=True)
    clip = max(params.delta_clip, 1e-9)
    out[..., 1] = np.minimum(out[..., 1], clip) / clip
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


@dataclass
class LstmState:
    """Carried recurrent state for incremental (per-decision) inference."""

    h: np.ndarray
    c: np.ndarray


def init_state(params: CalibratorParams) -> LstmState:
    h = params.hidden_size
    return LstmState(h=np.zeros(h), c=np.zeros(h))


def _cell(params: CalibratorParams, x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray):
    """One LSTM step over a batch; returns gates and new state (all cached for BPTT)."""
    hs = params.hidden_size
    z = x_t @ params.wx.T + h_prev @ params.wh.T + params.b
    i = _sigmoid(z[..., :hs])
    f = _sigmoid(z[..., hs : 2 * hs])
    g = np.tanh(z[..., 2 * hs : 3 * hs])
    o = _sigmoid(z[..., 3 * hs :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return i, f, g, o, c, h


def _heads(params: CalibratorParams, h: np.ndarray):
    """Trunk tanh, shared fc layer, and the three heads; returns the cache too."""
    r = np.tanh(h)
    upre = r @ params.fc_w.T + params.fc_b
    u = np.tanh(upre)
    cls_logits = u @ params.cls_w.T + params.cls_b
    p_logit = u @ params.p_w + params.p_b[0]
    f_logit = u @ params.f_w + params.f_b[0]
    log_probs = _log_softmax(cls_logits)
    return r, u, log_probs, p_logit, f_logit


def forward_step(
    params: CalibratorParams, state: LstmState, feature_raw: np.ndarray
) -> tuple[LstmState, PredictionTriple]:
    """Advance the recurrence by one decision and predict for it."""
    x = scale_features(params, np.asarray(feature_raw, dtype=np.float64))
    if x.shape != (INPUT_DIM,):
        raise ValueError(f"feature vector must have shape ({INPUT_DIM},), got {x.shape}")
    *_, c, h = _cell(params, x[None, :], state.h[None, :], state.c[None, :])
    _, _, log_probs, p_logit, f_logit = _heads(params, h)
    triple = PredictionTriple(
        pr_correct=float(np.exp(log_probs[0, 1])),
        p_hat=float(_sigmoid(p_logit)[0]),
        f_hat=float(_sigmoid(f_logit)[0]),
    )
    return LstmState(h=h[0], c=c[0]), triple


def lstm_forward(params: CalibratorParams, features: Sequence) -> list[PredictionTriple]:
    """Run the network over one decision sequence (features raw, not scaled)."""
    params.validate()
    state = init_state(params)
    out: list[PredictionTriple] = []
    for fv in features:
        raw = fv.as_array() if hasattr(fv, "as_array") else np.asarray(fv, dtype=np.float64)
        state, triple = forward_step(params, state, raw)
        out.append(triple)
    return out


def loss_and_gradients(
    params: CalibratorParams,
    inputs: np.ndarray,
    labels: np.ndarray,
    mask: Optional[np.ndarray] = None,
    head_weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean per-step loss (cross entropy + two squared errors) and its gradients.

    inputs: (B, T, 4) raw features; labels: (B, T, 3) as (correct, p, f);
    mask: (B, T) with 1.0 on real steps.  Gradients are exact BPTT.
    `head_weights` scales the per-head loss terms; zeroing two of them trains
    a single-task network instead of the shared multi-task one.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if inputs.ndim != 3 or inputs.shape[-1] != INPUT_DIM:
        raise ValueError(f"inputs must be (B, T, {INPUT_DIM}), got {inputs.shape}")
    if labels.shape[:2] != inputs.shape[:2] or labels.shape[-1] != 3:
        raise ValueError(f"labels must be (B, T, 3) matching inputs, got {labels.shape}")
    bsz, steps, _ = inputs.shape
    if mask is None:
        mask = np.ones((bsz, steps))
    mask = np.asarray(mask, dtype=np.float64)

    x = scale_features(params, inputs)
    hs = params.hidden_size
    total = mask.sum()
    grads = {name: np.zeros_like(getattr(params, name)) for name in PARAM_FIELDS}
    if total == 0.0:
        return 0.0, grads

    h = np.zeros((bsz, hs))
    c = np.zeros((bsz, hs))
    cache = []
    loss = 0.0
    for t in range(steps):
        h_prev, c_prev = h, c
        i, f, g, o, c, h = _cell(params, x[:, t], h_prev, c_prev)
        r, u, log_probs, p_logit, f_logit = _heads(params, h)
        y_cls = labels[:, t, 0].astype(np.int64)
        p_hat = _sigmoid(p_logit)
        f_hat = _sigmoid(f_logit)
        m = mask[:, t]
        ce = head_weights[0] * -log_probs[np.arange(bsz), y_cls]
        sq = (
            head_weights[1] * (p_hat - labels[:, t, 1]) ** 2
            + head_weights[2] * (f_hat - labels[:, t, 2]) ** 2
        )
        loss += float(np.dot(m, ce + sq))
        cache.append((h_prev, c_prev, i, f, g, o, c, h, r, u, log_probs, p_hat, f_hat))
    loss /= total

    dh_carry = np.zeros((bsz, hs))
    dc_carry = np.zeros((bsz, hs))
    for t in reversed(range(steps)):
        h_prev, c_prev, i, f, g, o, c_t, h_t, r, u, log_probs, p_hat, f_hat = cache[t]
        m = mask[:, t][:, None] / total
        y_cls = labels[:, t, 0].astype(np.int64)

        probs = np.exp(log_probs)
        dlogits = probs.copy()
        dlogits[np.arange(bsz), y_cls] -= 1.0
        dlogits *= head_weights[0] * m
        dp = head_weights[1] * 2.0 * (p_hat - labels[:, t, 1]) * p_hat * (1.0 - p_hat) * m[:, 0]
        df = head_weights[2] * 2.0 * (f_hat - labels[:, t, 2]) * f_hat * (1.0 - f_hat) * m[:, 0]

        grads["cls_w"] += dlogits.T @ u
        grads["cls_b"] += dlogits.sum(axis=0)
        grads["p_w"] += dp @ u
        grads["p_b"] += dp.sum(keepdims=True)
        grads["f_w"] += df @ u
        grads["f_b"] += df.sum(keepdims=True)

        du = dlogits @ params.cls_w + np.outer(dp, params.p_w) + np.outer(df, params.f_w)
        dupre = du * (1.0 - u**2)
        grads["fc_w"] += dupre.T @ r
        grads["fc_b"] += dupre.sum(axis=0)
        dr = dupre @ params.fc_w
        dh = dr * (1.0 - r**2) + dh_carry

        tanh_c = np.tanh(c_t)
        do = dh * tanh_c
        dc = dh * o * (1.0 - tanh_c**2) + dc_carry
        di = dc * g
        dfg = dc * c_prev
        dg = dc * i
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                dfg * f * (1.0 - f),
                dg * (1.0 - g**2),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        grads["wx"] += dz.T @ x[:, t]
        grads["wh"] += dz.T @ h_prev
        grads["b"] += dz.sum(axis=0)
        dh_carry = dz @ params.wh
        dc_carry = dc * f

    return loss, grads


GradientFn = Callable[[CalibratorParams, np.ndarray, np.ndarray, np.ndarray], tuple[float, dict]]


def gradient_check(
    params: CalibratorParams,
    sample: tuple[np.ndarray, np.ndarray],
    seed: int = 0,
    fraction: float = 0.01,
    step: float = 1e-5,
    gradient_fn: GradientFn = loss_and_gradients,
) -> float:
    """Max relative error between analytic and central-difference gradients
    over a random subset of the weights (about `fraction` of them)."""
    features, labels = sample
    inputs = np.asarray(features, dtype=np.float64)[None, :, :]
    targets = np.asarray(labels, dtype=np.float64)[None, :, :]
    mask = np.ones(inputs.shape[:2])
    _, grads = gradient_fn(params, inputs, targets, mask)

    rng = np.random.default_rng(seed)
    worst = 0.0
    work = params.copy()
    for name in PARAM_FIELDS:
        arr = getattr(work, name)
        size = arr.size
        n_pick = max(1, int(round(fraction * size)))
        for flat in rng.choice(size, size=min(n_pick, size), replace=False):
            idx = np.unravel_index(flat, arr.shape)
            orig = arr[idx]
            arr[idx] = orig + step
            lo_plus, _ = loss_and_gradients(work, inputs, targets, mask)
            arr[idx] = orig - step
            lo_minus, _ = loss_and_gradients(work, inputs, targets, mask)
            arr[idx] = orig
            numeric = (lo_plus - lo_minus) / (2.0 * step)
            analytic = grads[name][idx]
            denom = max(abs(numeric) + abs(analytic), 1e-8)
            worst = max(worst, abs(numeric - analytic) / denom)
    return worst
