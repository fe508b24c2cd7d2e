"""Synthetic human matchers with controllable bias knobs.

Not a cognitive model: a seeded test-data generator.  Each simulated decision
draws an internal correctness probability, realizes correctness from it, and
emits a confidence that equals that probability plus configurable bias and
noise.  Temporal relaxation lowers the internal acceptance criterion over the
course of a session; consensus coupling occasionally copies a pair that is
popular in a pre-generated seed pool.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .calibrator import ConsensusMatrix, build_consensus
from .core import Attribute, DecisionHistory, DecisionRecord, ReferenceMatch, Schema
from .matchers import SimilarityMatrix

_BETA_CONCENTRATION = 5.0


@dataclass(frozen=True)
class BiasProfile:
    """Knobs for one simulated matcher.

    skill: mean internal correctness probability.
    confidence_bias: additive offset applied to emitted confidences.
    confidence_noise: Gaussian noise scale on emitted confidences.
    temporal_relaxation: initial height of the internal acceptance criterion,
        decaying linearly to zero over the session.
    consensus_coupling: probability of copying a popular pair instead.
    decisions_mean: target number of decisions.
    guessing: probability a wrong pick ignores name similarity entirely
        (haphazard errors instead of tempting ones).
    """

    skill: float = 0.6
    confidence_bias: float = 0.0
    confidence_noise: float = 0.0
    temporal_relaxation: float = 0.0
    consensus_coupling: float = 0.0
    decisions_mean: int = 20
    guessing: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.skill <= 1.0:
            raise ValueError(f"skill {self.skill} outside [0, 1]")
        if self.confidence_noise < 0.0 or self.temporal_relaxation < 0.0:
            raise ValueError("noise and relaxation scales must be >= 0")
        if not 0.0 <= self.consensus_coupling <= 1.0:
            raise ValueError(f"consensus_coupling {self.consensus_coupling} outside [0, 1]")
        if not 0.0 <= self.guessing <= 1.0:
            raise ValueError(f"guessing {self.guessing} outside [0, 1]")
        if self.decisions_mean < 1:
            raise ValueError("decisions_mean must be >= 1")


@dataclass(frozen=True)
class Cohort:
    """A set of simulated matchers over one shared task."""

    entries: tuple[tuple[str, DecisionHistory], ...]
    ref: ReferenceMatch
    schema_a: Schema
    schema_b: Schema

    def __len__(self) -> int:
        return len(self.entries)

    def histories(self) -> list[DecisionHistory]:
        return [h for _, h in self.entries]


def _draw_q(rng: np.random.Generator, skill: float) -> float:
    if skill >= 1.0:
        return 1.0
    if skill <= 0.0:
        return 0.0
    a = skill * _BETA_CONCENTRATION
    b = (1.0 - skill) * _BETA_CONCENTRATION
    return float(rng.beta(a, b))


def simulate_matcher(
    schemas: tuple[Schema, Schema],
    ref: ReferenceMatch,
    profile: BiasProfile,
    popularity: Optional[ConsensusMatrix] = None,
    confusability: Optional[SimilarityMatrix] = None,
) -> DecisionHistory:
    """Generate one decision history, deterministic given profile.seed.

    When a confusability matrix is supplied, wrong picks concentrate on
    high-similarity pairs, so errors correlate across matchers the way
    consensuality bias predicts instead of spreading uniformly.
    """
    if len(ref) == 0:
        raise ValueError("reference match must be non-empty")
    n, m = len(schemas[0]), len(schemas[1])
    if profile.decisions_mean > n * m:
        raise ValueError(
            f"decisions_mean {profile.decisions_mean} exceeds the {n * m} available pairs"
        )
    rng = np.random.default_rng(profile.seed)
    k = int(np.clip(round(rng.normal(profile.decisions_mean, profile.decisions_mean / 6.0)), 1, n * m))

    correct_pool = [p for p in sorted(ref.pairs) if p[0] < n and p[1] < m]
    incorrect_pool = [(i, j) for i in range(n) for j in range(m) if (i, j) not in ref.pairs]
    incorrect_weights = correct_weights = None
    if confusability is not None:
        if (confusability.n, confusability.m) != (n, m):
            raise ValueError("confusability matrix does not fit the schema pair")
        # Sharpen so temptation concentrates on the most similar wrong pairs;
        # findable reference pairs are the string-similar ones too.
        incorrect_weights = np.array(
            [confusability.values[p] ** 8 + 1e-6 for p in incorrect_pool]
        )
        correct_weights = np.array(
            [confusability.values[p] ** 4 + 1e-4 for p in correct_pool]
        )
    used: set[tuple[int, int]] = set()

    if popularity is not None and popularity.matcher_total > 0:
        pop_flat = popularity.counts.astype(np.float64).ravel()
    else:
        pop_flat = None

    records: list[DecisionRecord] = []
    t = 0.0
    for step_idx in range(k):
        frac = step_idx / max(1, k - 1)
        floor = profile.temporal_relaxation * (1.0 - frac)

        pair: Optional[tuple[int, int]] = None
        q = 0.0
        if pop_flat is not None and rng.random() < profile.consensus_coupling:
            weights = pop_flat.copy()
            for (ui, uj) in used:
                weights[ui * m + uj] = 0.0
            if weights.sum() > 0:
                flat = int(rng.choice(weights.size, p=weights / weights.sum()))
                pair = (flat // m, flat % m)
                q = float(popularity.share(*pair))
        if pair is None:
            # Internal criterion: redraw until the judgment clears the floor.
            q = _draw_q(rng, profile.skill)
            for _ in range(200):
                if q >= floor:
                    break
                q = max(q, _draw_q(rng, profile.skill))
            correct = bool(rng.random() < q)
            pool = correct_pool if correct else incorrect_pool
            weights = correct_weights if correct else incorrect_weights
            if not correct and rng.random() < profile.guessing:
                weights = None
            free = [idx for idx, p in enumerate(pool) if p not in used]
            if not free:
                # Ending the session here keeps emitted decisions calibrated;
                # resampling conditioned on availability would not.
                break
            if weights is not None:
                w = weights[free]
                pair = pool[free[int(rng.choice(len(free), p=w / w.sum()))]]
            else:
                pair = pool[free[int(rng.integers(len(free)))]]

        conf = q + profile.confidence_bias
        if profile.confidence_noise > 0.0:
            conf += profile.confidence_noise * rng.standard_normal()
        conf = float(np.clip(conf, 0.0, 1.0))

        t += max(1e-3, float(rng.gamma(2.0, 4.0 * (1.0 + profile.temporal_relaxation * frac))))
        records.append(DecisionRecord(pair=pair, confidence=conf, timestamp=t))
        used.add(pair)
    return DecisionHistory.of(records)


ProfileSampler = Callable[[np.random.Generator], BiasProfile]


def unbiased_sampler(decisions_mean: int = 25, skill_range=(0.35, 0.85)) -> ProfileSampler:
    """Profiles whose confidences equal the internal correctness probability."""

    def sample(rng: np.random.Generator) -> BiasProfile:
        return BiasProfile(
            skill=float(rng.uniform(*skill_range)),
            decisions_mean=int(rng.integers(max(5, decisions_mean // 2), decisions_mean * 2)),
        )

    return sample


def biased_sampler(decisions_mean: int = 25, novice_share: float = 0.25) -> ProfileSampler:
    """Mixed-quality matchers with confidence bias, noise, temporal relaxation
    and consensus coupling all active.  A `novice_share` fraction are
    overconfident low-skill matchers whose errors are haphazard."""

    def sample(rng: np.random.Generator) -> BiasProfile:
        if rng.random() < novice_share:
            return BiasProfile(
                skill=float(rng.uniform(0.12, 0.35)),
                confidence_bias=float(rng.uniform(0.0, 0.5)),
                confidence_noise=float(rng.uniform(0.1, 0.3)),
                temporal_relaxation=float(rng.uniform(0.0, 0.5)),
                consensus_coupling=float(rng.uniform(0.0, 0.2)),
                decisions_mean=int(rng.integers(max(4, decisions_mean // 3), decisions_mean)),
                guessing=0.85,
            )
        return BiasProfile(
            skill=float(rng.uniform(0.35, 0.9)),
            confidence_bias=float(rng.uniform(-0.3, 0.5)),
            confidence_noise=float(rng.uniform(0.05, 0.25)),
            temporal_relaxation=float(rng.uniform(0.0, 0.5)),
            consensus_coupling=float(rng.uniform(0.0, 0.4)),
            decisions_mean=int(rng.integers(max(5, decisions_mean // 2), decisions_mean * 2)),
            guessing=0.1,
        )

    return sample


def seed_popularity(
    schemas: tuple[Schema, Schema],
    ref: ReferenceMatch,
    seed: int,
    pool_size: int = 50,
    decisions_mean: int = 25,
    confusability: Optional[SimilarityMatrix] = None,
) -> ConsensusMatrix:
    """Consensus counts from an auxiliary pool of uncoupled seed matchers."""
    seeds = np.random.SeedSequence(seed).spawn(pool_size)
    rng = np.random.default_rng(seed)
    histories = []
    for child in seeds:
        profile = BiasProfile(
            skill=float(rng.uniform(0.4, 0.9)),
            decisions_mean=decisions_mean,
            seed=int(child.generate_state(1)[0]),
        )
        histories.append(simulate_matcher(schemas, ref, profile, confusability=confusability))
    return build_consensus(histories, len(schemas[0]), len(schemas[1]))


def simulate_cohort(
    count: int,
    profile_sampler: ProfileSampler,
    schemas: tuple[Schema, Schema],
    ref: ReferenceMatch,
    seed: int,
    popularity: Optional[ConsensusMatrix] = None,
    confusability: Optional[SimilarityMatrix] = None,
) -> Cohort:
    """Independent matchers with sampled profiles; reproducible given seed."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    children = np.random.SeedSequence(seed).spawn(count)
    if popularity is None:
        popularity = seed_popularity(schemas, ref, seed=seed + 1, confusability=confusability)
    entries = []
    for idx, child in enumerate(children):
        profile = replace(profile_sampler(rng), seed=int(child.generate_state(1)[0]))
        history = simulate_matcher(
            schemas, ref, profile, popularity=popularity, confusability=confusability
        )
        entries.append((f"m{idx:03d}", history))
    return Cohort(entries=tuple(entries), ref=ref, schema_a=schemas[0], schema_b=schemas[1])


_NAME_STEMS = (
    "order", "ship", "bill", "customer", "item", "price", "date", "code",
    "city", "street", "zip", "name", "phone", "mail", "total", "tax",
    "unit", "qty", "status", "carrier", "account", "invoice", "line", "ref",
)


def synthetic_task(
    n: int,
    m: int,
    seed: int,
    ref_size: Optional[int] = None,
    correct_beta: tuple[float, float] = (3.5, 2.2),
    incorrect_beta: tuple[float, float] = (1.2, 6.0),
    trap_count: int = 0,
) -> tuple[Schema, Schema, ReferenceMatch, SimilarityMatrix]:
    """A random matching task: two flat schemata, a partial 1:1 reference, and
    an algorithmic similarity matrix correlated with the reference.

    The beta parameters control how well the matrix separates reference from
    non-reference pairs; the defaults overlap substantially, as real matchers
    do.  `trap_count` plants non-reference cells with near-reference
    similarity: the systematically tempting wrong answers.
    """
    rng = np.random.default_rng(seed)
    if ref_size is None:
        ref_size = min(n, m)
    if ref_size > min(n, m):
        raise ValueError(f"ref_size {ref_size} exceeds min({n}, {m})")

    def make_schema(name: str, size: int) -> Schema:
        attrs = []
        for i in range(size):
            stem = _NAME_STEMS[int(rng.integers(len(_NAME_STEMS)))]
            suffix = _NAME_STEMS[int(rng.integers(len(_NAME_STEMS)))]
            attrs.append(
                Attribute(id=i, name=f"{stem}_{suffix}_{i}", path=(name, f"{stem}_{suffix}_{i}"))
            )
        return Schema(name=name, attributes=tuple(attrs))

    schema_a = make_schema("left", n)
    schema_b = make_schema("right", m)
    rows = rng.permutation(n)[:ref_size]
    cols = rng.permutation(m)[:ref_size]
    ref = ReferenceMatch.of((int(r), int(c)) for r, c in zip(rows, cols))

    values = rng.beta(*incorrect_beta, size=(n, m))  # background: low similarity
    for i, j in ref.pairs:
        values[i, j] = rng.beta(*correct_beta)  # reference pairs: higher similarity
    non_ref = [(i, j) for i in range(n) for j in range(m) if (i, j) not in ref.pairs]
    for idx in rng.permutation(len(non_ref))[:trap_count]:
        values[non_ref[int(idx)]] = rng.uniform(0.6, 0.85)
    return schema_a, schema_b, ref, SimilarityMatrix(np.clip(values, 0.0, 1.0))
