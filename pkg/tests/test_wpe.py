import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pvwpe.wpe import (
    ContractError,
    EmbeddingConfig,
    OrdinalPattern,
    ShortWindowWarning,
    embedding_codes,
    embedding_weights,
    entropy_from_histogram,
    ordinal_pattern,
    pattern_code,
    pattern_from_code,
    vector_weight,
    weighted_distribution,
    wpe,
)

# frozen from oracles.exact_wpe([1, 2, 3, 2, 1], 3, 1) at 40 digits
GOLDEN_NORM = 0.5604783958455846317319673
GOLDEN_BITS = 1.448815635725184523338765


class TestEmbeddingConfig:
    def test_defaults(self):
        cfg = EmbeddingConfig()
        assert (cfg.d, cfg.tau) == (6, 3)
        assert cfg.span == 16
        assert cfg.n_patterns == 720
        assert cfg.recommended_length == 3601

    @pytest.mark.parametrize("d", [2, 8, 0, -1])
    def test_dimension_range(self, d):
        with pytest.raises(ContractError):
            EmbeddingConfig(d, 1)

    @pytest.mark.parametrize("tau", [0, -3])
    def test_delay_positive(self, tau):
        with pytest.raises(ContractError):
            EmbeddingConfig(3, tau)

    def test_non_integer_rejected(self):
        with pytest.raises(ContractError):
            EmbeddingConfig(3.0, 1)

    def test_short_window_warns(self):
        with pytest.warns(ShortWindowWarning):
            wpe(np.arange(30.0), EmbeddingConfig(3, 1))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            wpe(np.arange(31.0), EmbeddingConfig(3, 1))
            wpe(np.arange(30.0), EmbeddingConfig(3, 1), warn=False)


class TestOrdinalPattern:
    def test_worked_example(self):
        assert ordinal_pattern([4, 3, 7]).ranks == (2, 1, 3)
        assert str(ordinal_pattern([4, 3, 7])) == "2-1-3"

    def test_sorted(self):
        assert ordinal_pattern([1, 2, 3]).ranks == (1, 2, 3)

    def test_tie_goes_to_first_index(self):
        assert ordinal_pattern([2, 3, 2]).ranks == (1, 3, 2)

    def test_exhaustive_small_integer_vectors(self):
        for vec in itertools.product([1, 2, 3], repeat=3):
            assert ordinal_pattern(vec).ranks == oracles.ranks(vec)

    def test_length_contract(self):
        with pytest.raises(ContractError):
            ordinal_pattern([1, 2, 3], d=4)

    def test_invalid_permutation(self):
        with pytest.raises(ContractError):
            OrdinalPattern((1, 1, 2))


class TestLehmer:
    @pytest.mark.parametrize("d", [3, 4, 5])
    def test_matches_lexicographic_rank(self, d):
        for perm in itertools.permutations(range(1, d + 1)):
            assert pattern_code(OrdinalPattern(perm)) == oracles.lehmer(perm)

    @pytest.mark.parametrize("d", [3, 4, 5, 6, 7])
    def test_round_trip(self, d):
        codes = range(math.factorial(d)) if d < 7 else range(0, 5040, 7)
        for c in codes:
            assert pattern_from_code(c, d).code == c

    def test_dense_range(self):
        assert pattern_code(OrdinalPattern((1, 2, 3))) == 0
        assert pattern_code(OrdinalPattern((3, 2, 1))) == 5

    def test_out_of_range(self):
        with pytest.raises(ContractError):
            pattern_from_code(6, 3)

    def test_vectorised_codes_agree(self):
        rng = np.random.default_rng(3)
        x = rng.integers(0, 4, 400).astype(float)  # plenty of ties
        for d, tau in [(3, 1), (4, 2), (5, 3)]:
            cfg = EmbeddingConfig(d, tau)
            codes = embedding_codes(x, cfg)
            for t in range(0, len(codes), 17):
                vec = [x[t + k * tau] for k in range(d)]
                assert codes[t] == oracles.lehmer(oracles.ranks(vec))


class TestVectorWeight:
    def test_constant(self):
        assert vector_weight([5, 5, 5]) == 0.0

    def test_ramp(self):
        assert vector_weight([1, 2, 3]) == pytest.approx(2 / 3, abs=1e-15)

    def test_pair(self):
        assert vector_weight([0, 6], d=2) == 9.0

    def test_length_contract(self):
        with pytest.raises(ContractError):
            vector_weight([1, 2, 3], d=2)


class TestDistribution:
    def test_worked_example(self):
        dist = weighted_distribution([1, 2, 3, 2, 1], EmbeddingConfig(3, 1))
        assert dist.total_weight == pytest.approx(2 / 3 + 2 / 9 + 2 / 3, abs=1e-15)
        expect = {(1, 2, 3): 3 / 7, (1, 3, 2): 1 / 7, (3, 2, 1): 3 / 7}
        for perm in itertools.permutations((1, 2, 3)):
            got = dist.probs[pattern_code(OrdinalPattern(perm))]
            assert got == pytest.approx(expect.get(perm, 0.0), abs=1e-15)

    def test_exact_rationals(self):
        probs, total = oracles.exact_distribution([1, 2, 3, 2, 1], 3, 1)
        assert total == oracles.Fraction(14, 9)
        assert sorted(probs.values()) == [oracles.Fraction(1, 7), oracles.Fraction(3, 7),
                                          oracles.Fraction(3, 7)]

    def test_constant_window(self):
        dist = weighted_distribution([2.0] * 10, EmbeddingConfig(3, 1))
        assert dist.total_weight == 0
        assert not dist.defined
        assert not dist.probs.any()

    def test_monotone_all_mass_on_ascending(self):
        dist = weighted_distribution(np.arange(1, 101), EmbeddingConfig(4, 2))
        assert dist.probs[0] == 1.0
        assert dist.probs[1:].sum() == 0.0

    def test_too_short(self):
        with pytest.raises(ContractError):
            weighted_distribution([1, 2, 3, 4], EmbeddingConfig(3, 2))

    def test_non_finite(self):
        with pytest.raises(ContractError):
            weighted_distribution([1, 2, np.nan, 4, 5], EmbeddingConfig(3, 1))


class TestWpe:
    def test_golden(self):
        v = wpe([1, 2, 3, 2, 1], EmbeddingConfig(3, 1), warn=False)
        assert v.normalized == pytest.approx(GOLDEN_NORM, abs=1e-15)
        assert v.raw_bits == pytest.approx(GOLDEN_BITS, abs=1e-15)
        norm, raw = oracles.exact_wpe([1, 2, 3, 2, 1], 3, 1)
        assert float(norm) == pytest.approx(GOLDEN_NORM, abs=1e-24)
        assert float(raw) == pytest.approx(GOLDEN_BITS, abs=1e-24)

    def test_closed_form(self):
        raw = -(2 * (3 / 7) * math.log2(3 / 7) + (1 / 7) * math.log2(1 / 7))
        v = wpe([1, 2, 3, 2, 1], EmbeddingConfig(3, 1), warn=False)
        assert v.raw_bits == pytest.approx(raw, abs=1e-14)
        assert v.normalized == pytest.approx(raw / math.log2(6), abs=1e-14)

    @pytest.mark.parametrize("d,tau", [(3, 1), (4, 2), (6, 3), (7, 1)])
    def test_monotone_is_zero(self, d, tau):
        for x in (np.arange(200.0), -np.arange(200.0) ** 1.5):
            v = wpe(x, EmbeddingConfig(d, tau), warn=False)
            assert v.normalized == 0.0
            assert math.copysign(1.0, v.normalized) == 1.0

    def test_constant_is_undefined(self):
        v = wpe(np.full(500, 0.3), EmbeddingConfig(3, 1))
        assert not v.defined
        assert math.isnan(v.normalized)

    def test_iid_uniform_near_one(self):
        x = np.random.Generator(np.random.PCG64(11)).random(50_000)
        assert wpe(x, EmbeddingConfig(3, 1)).normalized > 0.99

    def test_matches_naive_reference(self):
        rng = np.random.default_rng(5)
        for _ in range(60):
            n = int(rng.integers(50, 200))
            d, tau = int(rng.integers(3, 5)), int(rng.integers(1, 4))
            x = rng.normal(size=n).round(1)  # rounding forces ties
            got = wpe(x, EmbeddingConfig(d, tau), warn=False).normalized
            ref = oracles.naive_wpe(list(x), d, tau)
            assert got == pytest.approx(ref, abs=1e-12)

    def test_histogram_entropy_empty(self):
        assert not entropy_from_histogram(np.zeros(6), 3).defined

    def test_single_pattern_entropy(self):
        h = np.zeros(24)
        h[5] = 2.5
        assert entropy_from_histogram(h, 4).normalized == 0.0


windows = st.lists(st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False),
                   min_size=20, max_size=120)
cfgs = st.builds(EmbeddingConfig, st.integers(3, 5), st.integers(1, 3))


@settings(max_examples=150, deadline=None)
@given(windows, cfgs)
def test_normalised_in_unit_interval(x, cfg):
    if len(x) < cfg.span:
        return
    v = wpe(x, cfg, warn=False)
    if v.defined:
        assert 0.0 <= v.normalized <= 1.0
        assert v.raw_bits >= 0.0


@settings(max_examples=150, deadline=None)
@given(windows, cfgs)
def test_probabilities_sum_to_one(x, cfg):
    if len(x) < cfg.span:
        return
    dist = weighted_distribution(x, cfg)
    assert dist.probs.size == cfg.n_patterns
    assert (dist.probs >= 0).all()
    if dist.defined:
        assert abs(dist.probs.sum() - 1.0) < 1e-9


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=20, max_size=80), st.integers(1, 3))
def test_ties_match_naive(x, tau):
    cfg = EmbeddingConfig(3, tau)
    if len(x) < cfg.span:
        return
    got = wpe(x, cfg, warn=False)
    ref = oracles.naive_wpe(x, 3, tau)
    if ref is None:
        assert not got.defined
    else:
        assert got.normalized == pytest.approx(ref, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 3.0, -2.0]), st.sampled_from([-1.0, 0.0, 10.0]))
def test_affine_invariance(seed, a, b):
    x = np.random.default_rng(seed).permutation(200).astype(float)  # tie-free
    cfg = EmbeddingConfig(4, 2)
    assert wpe(a * x + b, cfg, warn=False).normalized == pytest.approx(
        wpe(x, cfg, warn=False).normalized, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e6, 1e6, allow_nan=False), cfgs)
def test_any_constant_is_undefined(c, cfg):
    assert not wpe(np.full(200, c), cfg, warn=False).defined
    assert not embedding_weights(np.full(200, c), cfg).any()
