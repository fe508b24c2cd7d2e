from __future__ import annotations

import itertools

import numpy as np
import pytest

from matchflow.core import Match, ReferenceMatch, fmeasure
from matchflow.theory import (
    ConfidenceMatch,
    MeasureKind,
    brute_force_expectations,
    expected_fmeasure,
    expected_precision,
    in_sigma_f,
    in_sigma_p,
    is_miem_pair,
    prob_annealer_condition,
)

UNIVERSE = [(0, i) for i in range(6)]


def subsets(pool, max_size=None):
    limit = len(pool) if max_size is None else max_size
    for size in range(limit + 1):
        yield from itertools.combinations(pool, size)


def test_in_sigma_p_empty_sigma_is_true():
    ref = ReferenceMatch.of([(0, 0)])
    assert in_sigma_p(Match(), Match.of([(0, 5)]), ref)
    assert in_sigma_p(Match(), Match(), ref)


def test_in_sigma_p_simple():
    ref = ReferenceMatch.of([(0, 0), (0, 1)])
    sigma = Match.of([(0, 0), (0, 5)])  # P = 0.5
    delta = Match.of([(0, 1)])  # P = 1
    assert in_sigma_p(sigma, delta, ref)
    assert not in_sigma_p(Match.of([(0, 0)]), Match.of([(0, 5)]), ref)


def test_in_sigma_p_rejects_overlap():
    ref = ReferenceMatch.of([(0, 0)])
    with pytest.raises(ValueError, match="disjoint"):
        in_sigma_p(Match.of([(0, 0)]), Match.of([(0, 0)]), ref)


def test_in_sigma_f_empty_sigma():
    ref = ReferenceMatch.of([(0, 0)])
    assert in_sigma_f(Match(), Match.of([(0, 5)]), ref)


def test_in_sigma_f_worked_case():
    # 9 correct + 1 incorrect in a reference of 12: F = 18/22 = 0.818...,
    # so the condition threshold on P(delta) is about 0.41.
    ref = ReferenceMatch.of([(1, i) for i in range(12)])
    sigma = Match.of([(1, i) for i in range(9)] + [(9, 9)])
    f = fmeasure(sigma, ref)
    assert f == pytest.approx(0.82, abs=0.005)
    good = Match.of([(1, 10)])  # P(delta) = 1 >= 0.41
    bad = Match.of([(8, 8)])  # P(delta) = 0 < 0.41
    assert in_sigma_f(sigma, good, ref)
    assert not in_sigma_f(sigma, bad, ref)


def test_is_miem_pair_recall_always(example_ref):
    sigma = Match.of([(0, 0)])
    sigma2 = Match.of([(0, 0), (9, 9), (1, 2)])
    assert is_miem_pair(MeasureKind.RECALL, sigma, sigma2, example_ref)


def test_is_miem_pair_f_drop(example_ref):
    # Adding the incorrect final decision drops F from 6/7.
    sigma = Match.of([(0, 0), (0, 1), (2, 3)])
    sigma2 = Match.of([(0, 0), (0, 1), (2, 3), (1, 0)])
    assert fmeasure(sigma, example_ref) == pytest.approx(6 / 7)
    assert not is_miem_pair(MeasureKind.FMEASURE, sigma, sigma2, example_ref)
    assert is_miem_pair(MeasureKind.FMEASURE, sigma, sigma, example_ref)


def test_is_miem_pair_rejects_non_subset(example_ref):
    with pytest.raises(ValueError, match="subset"):
        is_miem_pair(MeasureKind.RECALL, Match.of([(1, 1)]), Match.of([(0, 0)]), example_ref)


def test_expected_precision_values():
    assert expected_precision(ConfidenceMatch.of([((0, 0), 0.9)])) == pytest.approx(0.9)
    cm = ConfidenceMatch.of([((0, 0), 0.9), ((2, 3), 1.0)])
    assert expected_precision(cm) == pytest.approx(0.95)
    assert expected_precision(ConfidenceMatch()) == 0.0


def test_expected_fmeasure_values():
    cm1 = ConfidenceMatch.of([((0, 0), 0.9)])
    assert expected_fmeasure(cm1, 4) == pytest.approx(0.36)
    cm3 = ConfidenceMatch.of([((0, 0), 0.9), ((0, 1), 0.25), ((2, 3), 1.0)])
    assert 0.5 * expected_fmeasure(cm3, 4) == pytest.approx(2.15 / 7, abs=1e-12)
    assert round(0.5 * expected_fmeasure(cm3, 4), 2) == 0.31
    assert expected_fmeasure(ConfidenceMatch(), 4) == 0.0
    with pytest.raises(ValueError, match="ref_size"):
        expected_fmeasure(cm1, 0)


def test_prob_annealer_condition_worked_cases():
    # A match of 9 correct and 1 incorrect with truthful confidences:
    # E(P) = 0.9, E(F) = 2*9.1/(10+12).
    cm = ConfidenceMatch.of([((1, i), 1.0) for i in range(9)] + [((9, 9), 0.1)])
    assert expected_precision(cm) == pytest.approx(0.91)
    assert prob_annealer_condition(MeasureKind.PRECISION, cm, 0.95, 12)
    assert not prob_annealer_condition(MeasureKind.PRECISION, cm, 0.5, 12)
    threshold = 0.5 * expected_fmeasure(cm, 12)
    assert prob_annealer_condition(MeasureKind.FMEASURE, cm, threshold, 12)  # tie accepts
    assert not prob_annealer_condition(MeasureKind.FMEASURE, cm, threshold - 1e-9, 12)
    assert prob_annealer_condition(MeasureKind.RECALL, cm, 0.0, 12)


def test_brute_force_matches_trivial_cases():
    assert brute_force_expectations(ConfidenceMatch.of([((0, 0), 0.9)]), 4) == (
        pytest.approx(0.9),
        pytest.approx(0.36),
    )
    cm = ConfidenceMatch.of([((0, i), 1.0) for i in range(3)])
    ep, ef = brute_force_expectations(cm, 5)
    assert ep == pytest.approx(1.0)
    assert ef == pytest.approx(2 * 3 / (3 + 5))


def test_brute_force_cap():
    cm = ConfidenceMatch.of([((0, i), 0.5) for i in range(21)])
    with pytest.raises(ValueError, match="cap"):
        brute_force_expectations(cm, 4)


def test_brute_force_equals_closed_form_random():
    rng = np.random.default_rng(11)
    for _ in range(200):
        k = int(rng.integers(0, 7))
        cm = ConfidenceMatch.of([((0, i), float(rng.random())) for i in range(k)])
        ref_size = int(rng.integers(1, 9))
        ep, ef = brute_force_expectations(cm, ref_size)
        assert ep == pytest.approx(expected_precision(cm), abs=1e-12)
        assert ef == pytest.approx(expected_fmeasure(cm, ref_size), abs=1e-12)


# ---------------------------------------------------------------------------
# Exhaustive monotonicity oracle over a 6-correspondence universe, with the
# observed side recomputed in exact rational arithmetic.


def _exact_measures(sigma: Match, ref: ReferenceMatch):
    from fractions import Fraction

    tp = len(sigma.pairs & ref.pairs)
    p = Fraction(tp, len(sigma)) if len(sigma) else None
    r = Fraction(tp, len(ref))
    f = Fraction(2 * tp, len(sigma) + len(ref))
    return p, r, f


def test_exhaustive_monotonicity_conditions():
    from fractions import Fraction

    refs = [
        ReferenceMatch.of(r)
        for size in range(1, 5)
        for r in itertools.combinations(UNIVERSE, size)
    ]
    checked = 0
    for sigma2_t in subsets(UNIVERSE):
        sigma2 = Match.of(sigma2_t)
        for sigma_t in subsets(sigma2_t):
            sigma = Match.of(sigma_t)
            delta = sigma2 - sigma
            for ref in refs:
                checked += 1
                ps, rs, fs = _exact_measures(sigma, ref)
                p2, r2, f2 = _exact_measures(sigma2, ref)
                tp_d = len(delta.pairs & ref.pairs)
                pd = Fraction(tp_d, len(delta)) if len(delta) else None

                # Recall is monotone unconditionally.
                assert rs <= r2

                # Precision condition <-> observed monotonicity, both ways,
                # with the proof conventions for undefined precision.
                ps_c = pd if ps is None else ps
                pd_c = ps if pd is None else pd
                if ps_c is None and pd_c is None:  # both empty
                    observed_p = True
                    cond_should = True
                else:
                    cond_should = ps_c <= pd_c
                    p2_c = ps_c if p2 is None else p2
                    observed_p = ps_c <= p2_c
                assert in_sigma_p(sigma, delta, ref) == cond_should
                assert cond_should == observed_p

                # F-measure condition <-> observed monotonicity.
                cond_f = in_sigma_f(sigma, delta, ref)
                if pd is None:
                    expected_cond_f = True
                else:
                    expected_cond_f = Fraction(1, 2) * fs <= pd
                assert cond_f == expected_cond_f
                assert cond_f == (fs <= f2)
    assert checked == 729 * 56
