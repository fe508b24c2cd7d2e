from __future__ import annotations

import math

import numpy as np
import pytest

from matchflow.calibrator import (
    ConsensusMatrix,
    FeatureContext,
    SequenceExample,
    TrainConfig,
    build_consensus,
    encode_decision,
    encode_history,
    gradient_check,
    init_params,
    loss_and_gradients,
    lstm_forward,
    make_labels,
    train,
    zero_params,
)
from matchflow.core import DecisionHistory, DecisionRecord, ReferenceMatch
from matchflow.matchers import SimilarityMatrix
from matchflow.simulate import BiasProfile, simulate_matcher, synthetic_task


@pytest.fixture
def ctx(mini_bundle):
    consensus = ConsensusMatrix(np.array([[3, 0, 0, 0], [1, 2, 0, 0], [0, 0, 0, 3]]), 3)
    return FeatureContext(consensus=consensus, algorithmic=mini_bundle.algorithmic)


# --- consensus -----------------------------------------------------------------


def test_build_consensus_unanimous():
    hists = [
        DecisionHistory.of([DecisionRecord(pair=(1, 1), confidence=0.5, timestamp=1.0)])
        for _ in range(3)
    ]
    consensus = build_consensus(hists, 2, 2)
    assert consensus.counts[1, 1] == 3
    assert consensus.matcher_total == 3


def test_build_consensus_dedupes_within_history():
    hist = DecisionHistory.of(
        [
            DecisionRecord(pair=(0, 0), confidence=0.5, timestamp=1.0),
            DecisionRecord(pair=(0, 0), confidence=0.9, timestamp=2.0),
        ]
    )
    consensus = build_consensus([hist], 1, 1)
    assert consensus.counts[0, 0] == 1


def test_build_consensus_matches_naive_recount():
    schema_a, schema_b, ref, _ = synthetic_task(6, 7, seed=2)
    hists = [
        simulate_matcher(
            (schema_a, schema_b), ref, BiasProfile(skill=0.6, decisions_mean=12, seed=k)
        )
        for k in range(50)
    ]
    consensus = build_consensus(hists, 6, 7)
    for i in range(6):
        for j in range(7):
            expected = sum(1 for h in hists if (i, j) in h.touched_pairs())
            assert consensus.counts[i, j] == expected


# --- feature encoding ------------------------------------------------------------


def test_encode_decision_deltas(ctx):
    rec2 = DecisionRecord(pair=(1, 1), confidence=0.15, timestamp=15.0)
    fv = encode_decision(rec2, 5.0, ctx)
    assert fv.delta_t == 10.0
    rec1 = DecisionRecord(pair=(0, 0), confidence=0.9, timestamp=5.0)
    first = encode_decision(rec1, ctx.session_start, ctx)
    assert first.delta_t == 5.0
    assert first.a_e == 1.0  # 3 of 3 matchers
    assert first.m_tilde == pytest.approx(0.35)


def test_encode_decision_zero_context(mini_bundle):
    ctx0 = FeatureContext(
        consensus=ConsensusMatrix(np.zeros((3, 4), dtype=int), 0),
        algorithmic=SimilarityMatrix(np.zeros((3, 4))),
    )
    rec = DecisionRecord(pair=(1, 2), confidence=0.7, timestamp=2.0)
    fv = encode_decision(rec, 0.0, ctx0)
    assert (fv.c, fv.delta_t, fv.a_e, fv.m_tilde) == (0.7, 2.0, 0.0, 0.0)


def test_encode_decision_negative_delta(ctx):
    rec = DecisionRecord(pair=(0, 0), confidence=0.5, timestamp=1.0)
    with pytest.raises(ValueError, match="negative"):
        encode_decision(rec, 5.0, ctx)


def test_encode_history_shape(example_history, ctx):
    feats = encode_history(example_history, ctx)
    assert feats.shape == (5, 4)
    assert feats[1, 1] == 10.0  # delta between first two records


# --- labels ------------------------------------------------------------------------


def test_make_labels_example(example_history, example_ref):
    labels = make_labels(example_history, example_ref)
    assert labels[0].correct == 1 and labels[0].p_prefix == 0.0 and labels[0].f_prefix == 0.0
    # Step 4: prefix {M11, M22, M12}; two of three correct.
    assert labels[3].correct == 1
    assert labels[3].p_prefix == pytest.approx(2 / 3)
    assert labels[3].f_prefix == pytest.approx(4 / 7)


def test_make_labels_all_incorrect():
    ref = ReferenceMatch.of([(9, 9)])
    hist = DecisionHistory.of(
        [DecisionRecord(pair=(0, k), confidence=0.5, timestamp=float(k + 1)) for k in range(4)]
    )
    for lab in make_labels(hist, ref):
        assert lab.correct == 0 and lab.p_prefix == 0.0 and lab.f_prefix == 0.0


def test_f_prefix_identity_against_count_formula(example_history, example_ref):
    labels = make_labels(example_history, example_ref)
    prefix: set = set()
    for rec, lab in zip(example_history.records, labels):
        inter = len(prefix & example_ref.pairs)
        denom = len(prefix) + len(example_ref)
        assert lab.f_prefix == pytest.approx(2 * inter / denom if denom else 0.0, abs=1e-12)
        prefix.add(rec.pair)


# --- forward pass -------------------------------------------------------------------


def _random_features(rng, steps):
    feats = rng.random((steps, 4))
    feats[:, 1] *= 30.0  # seconds
    return feats


def test_zero_params_give_half_everywhere():
    params = zero_params(hidden_size=8, fc_size=12)
    triples = lstm_forward(params, _random_features(np.random.default_rng(0), 4))
    for t in triples:
        assert t.pr_correct == pytest.approx(0.5)
        assert t.p_hat == pytest.approx(0.5)
        assert t.f_hat == pytest.approx(0.5)


def test_outputs_in_unit_interval():
    params = init_params(hidden_size=16, fc_size=24, seed=3)
    triples = lstm_forward(params, _random_features(np.random.default_rng(1), 6))
    for t in triples:
        assert 0.0 < t.pr_correct < 1.0
        assert 0.0 < t.p_hat < 1.0
        assert 0.0 < t.f_hat < 1.0


def oracle_forward(params, feats):
    """Step-by-step recurrence recomputation with explicit per-gate loops."""

    def sig(x):
        return 1.0 / (1.0 + math.exp(-x))

    hs = params.hidden_size
    clip = max(params.delta_clip, 1e-9)
    h = [0.0] * hs
    c = [0.0] * hs
    out = []
    for row in feats:
        x = [row[0], min(row[1], clip) / clip, row[2], row[3]]
        z = []
        for k in range(4 * hs):
            acc = params.b[k]
            for d in range(4):
                acc += params.wx[k, d] * x[d]
            for d in range(hs):
                acc += params.wh[k, d] * h[d]
            z.append(acc)
        i = [sig(z[k]) for k in range(hs)]
        f = [sig(z[hs + k]) for k in range(hs)]
        g = [math.tanh(z[2 * hs + k]) for k in range(hs)]
        o = [sig(z[3 * hs + k]) for k in range(hs)]
        c = [f[k] * c[k] + i[k] * g[k] for k in range(hs)]
        h = [o[k] * math.tanh(c[k]) for k in range(hs)]
        r = [math.tanh(v) for v in h]
        u = [
            math.tanh(sum(params.fc_w[q, k] * r[k] for k in range(hs)) + params.fc_b[q])
            for q in range(params.fc_size)
        ]
        logits = [
            sum(params.cls_w[cidx, q] * u[q] for q in range(params.fc_size)) + params.cls_b[cidx]
            for cidx in range(2)
        ]
        mx = max(logits)
        exps = [math.exp(v - mx) for v in logits]
        pr = exps[1] / sum(exps)
        p_hat = sig(sum(params.p_w[q] * u[q] for q in range(params.fc_size)) + params.p_b[0])
        f_hat = sig(sum(params.f_w[q] * u[q] for q in range(params.fc_size)) + params.f_b[0])
        out.append((pr, p_hat, f_hat))
    return out


def test_forward_matches_hand_rolled_oracle():
    params = init_params(hidden_size=6, fc_size=9, seed=7, delta_clip=20.0)
    feats = _random_features(np.random.default_rng(2), 3)
    got = lstm_forward(params, feats)
    expected = oracle_forward(params, feats)
    for triple, (pr, p_hat, f_hat) in zip(got, expected):
        assert triple.pr_correct == pytest.approx(pr, abs=1e-12)
        assert triple.p_hat == pytest.approx(p_hat, abs=1e-12)
        assert triple.f_hat == pytest.approx(f_hat, abs=1e-12)


def test_prediction_determinism():
    params = init_params(hidden_size=12, fc_size=16, seed=5)
    feats = _random_features(np.random.default_rng(4), 8)
    a = lstm_forward(params, feats)
    b = lstm_forward(params, feats)
    assert a == b  # bit-identical


def test_causality_truncation_equivalence():
    params = init_params(hidden_size=12, fc_size=16, seed=6)
    feats = _random_features(np.random.default_rng(5), 9)
    full = lstm_forward(params, feats)
    corrupted = feats.copy()
    corrupted[6:] = np.random.default_rng(6).random((3, 4))
    altered = lstm_forward(params, corrupted)
    assert full[:6] == altered[:6]
    assert full[6:] != altered[6:]


def test_softmax_two_logit_identity():
    from matchflow.calibrator.network import _cell, _heads, init_state, scale_features

    params = init_params(hidden_size=10, fc_size=14, seed=8)
    feats = scale_features(params, _random_features(np.random.default_rng(7), 5))
    state = init_state(params)
    h, c = state.h[None, :], state.c[None, :]
    for t in range(feats.shape[0]):
        *_, c, h = _cell(params, feats[None, t], h, c)
        _, _, log_probs, _, _ = _heads(params, h)
        probs = np.exp(log_probs)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)


# --- gradients -------------------------------------------------------------------


def _random_sample(rng, steps):
    feats = _random_features(rng, steps)
    labels = np.column_stack(
        [rng.integers(0, 2, steps).astype(float), rng.random(steps), rng.random(steps)]
    )
    return feats, labels


def test_gradient_check_passes():
    rng = np.random.default_rng(21)
    params = init_params(hidden_size=10, fc_size=14, seed=9, delta_clip=25.0)
    err = gradient_check(params, _random_sample(rng, 6), seed=0, fraction=0.05)
    assert err < 1e-4


def test_gradient_check_detects_perturbation():
    rng = np.random.default_rng(22)
    params = init_params(hidden_size=10, fc_size=14, seed=10, delta_clip=25.0)

    def crooked(params_, inputs, labels, mask):
        loss, grads = loss_and_gradients(params_, inputs, labels, mask)
        grads = {k: v * (1.10 if k == "wh" else 1.0) for k, v in grads.items()}
        return loss, grads

    err = gradient_check(
        params, _random_sample(rng, 6), seed=0, fraction=0.05, gradient_fn=crooked
    )
    assert err > 1e-2


def test_gradient_check_zero_inputs_finite():
    params = init_params(hidden_size=8, fc_size=10, seed=11)
    feats = np.zeros((4, 4))
    labels = np.zeros((4, 3))
    err = gradient_check(params, (feats, labels), seed=1, fraction=0.05)
    assert math.isfinite(err)


# --- training -----------------------------------------------------------------------


def test_train_zero_epochs_returns_init():
    rng = np.random.default_rng(30)
    data = [SequenceExample(*_random_sample(rng, 5)) for _ in range(4)]
    cfg = TrainConfig(epochs=0, hidden_size=8, fc_size=10, seed=3)
    params = train(data, cfg)
    reference = init_params(8, 10, seed=3, delta_clip=params.delta_clip)
    for name in ("wx", "wh", "b", "fc_w", "cls_w"):
        assert np.array_equal(getattr(params, name), getattr(reference, name))


def test_train_loss_decreases_on_separable_sequence():
    # The confidence feature carries the label exactly.
    rng = np.random.default_rng(31)
    steps = 30
    correct = rng.integers(0, 2, steps).astype(float)
    feats = np.column_stack([correct, rng.random(steps) * 5, rng.random(steps), correct])
    labels = np.column_stack([correct, correct * 0.5, correct * 0.5])
    data = [SequenceExample(feats, labels)]
    losses: list[float] = []
    cfg = TrainConfig(epochs=10, hidden_size=8, fc_size=10, seed=4, batch_size=1, patience=100)
    train(data, cfg, on_epoch=lambda _, score: losses.append(score))
    assert len(losses) == 10
    drops = sum(1 for a, b in zip(losses, losses[1:]) if b <= a + 1e-6)
    assert drops >= 8  # monotone within tolerance
    assert losses[-1] < losses[0]


def test_train_is_deterministic():
    rng = np.random.default_rng(32)
    data = [SequenceExample(*_random_sample(rng, 6)) for _ in range(6)]
    cfg = TrainConfig(epochs=3, hidden_size=8, fc_size=10, seed=5)
    a = train(data, cfg)
    b = train(data, cfg)
    for name in ("wx", "wh", "b", "fc_w", "cls_w", "p_w", "f_w"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_head_weight_isolation():
    # Zeroing the regressor losses must leave their heads at initialization
    # while the classifier still trains.
    rng = np.random.default_rng(33)
    steps = 20
    correct = rng.integers(0, 2, steps).astype(float)
    feats = np.column_stack([correct, rng.random(steps), rng.random(steps), correct])
    labels = np.column_stack([correct, rng.random(steps), rng.random(steps)])
    data = [SequenceExample(feats, labels)]
    cfg = TrainConfig(
        epochs=3, hidden_size=8, fc_size=10, seed=6, batch_size=1,
        head_weights=(1.0, 0.0, 0.0),
    )
    params = train(data, cfg)
    reference = init_params(8, 10, seed=6, delta_clip=params.delta_clip)
    assert np.array_equal(params.p_w, reference.p_w)
    assert np.array_equal(params.f_w, reference.f_w)
    assert not np.array_equal(params.cls_w, reference.cls_w)
