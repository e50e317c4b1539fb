from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sensikit import (
    CURRENT,
    IA,
    DegenerateSampleError,
    FactorGroup,
    PickFreezeBlock,
    asymptotic_variance,
    build_design,
    estimate_block,
    evaluate_design,
    ia_gap,
    run_replicates,
    ExperimentConfig,
    s_first_ia,
    s_first_saltelli,
    singletons,
    st_total_ia,
    st_total_jansen,
    variance_normalizer,
)
from sensikit.estimators import IA_FIRST, IA_TOTAL, SJ_TOTAL, SS_FIRST
from sensikit.testfuncs import AdditivePolynomial, Ishigami


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# exact rational oracles, written straight from the estimator formulas

def oracle_ss(yA, yB, yAu):
    F = [list(map(Fraction, v)) for v in (yA, yB, yAu)]
    a, b, au = F
    num = 2 * sum(a[k] * (au[k] - b[k]) for k in range(len(a)))
    return num / sum((a[k] - b[k]) ** 2 for k in range(len(a)))


def oracle_sj(yA, yB, yAu):
    a, b, au = [list(map(Fraction, v)) for v in (yA, yB, yAu)]
    return sum((au[k] - b[k]) ** 2 for k in range(len(a))) / sum((a[k] - b[k]) ** 2 for k in range(len(a)))


def _ia_den(a, b, au, bu):
    return sum((a[k] - b[k]) ** 2 + (au[k] - bu[k]) ** 2 for k in range(len(a)))


def oracle_ia_total(yA, yB, yAu, yBu):
    a, b, au, bu = [list(map(Fraction, v)) for v in (yA, yB, yAu, yBu)]
    num = sum((b[k] - au[k]) ** 2 + (a[k] - bu[k]) ** 2 for k in range(len(a)))
    return num / _ia_den(a, b, au, bu)


def oracle_ia_first(yA, yB, yAu, yBu):
    a, b, au, bu = [list(map(Fraction, v)) for v in (yA, yB, yAu, yBu)]
    num = 2 * sum((au[k] - b[k]) * (a[k] - bu[k]) for k in range(len(a)))
    return num / _ia_den(a, b, au, bu)


def random_block(rng, n=None, kind="normal"):
    n = n or int(rng.integers(2, 40))
    if kind == "int":
        arrs = rng.integers(-8, 9, size=(4, n)).astype(float)
    else:
        arrs = rng.normal(size=(4, n)) * rng.uniform(0.1, 10)
    return PickFreezeBlock(FactorGroup.of(0), *arrs)


class TestHandBlock:
    def test_saltelli(self, hand_block):
        assert s_first_saltelli(hand_block) == 0.25

    def test_jansen(self, hand_block):
        assert st_total_jansen(hand_block) == 0.25

    def test_ia_total(self, hand_block):
        assert _rel(st_total_ia(hand_block), 1 / 3) <= 1e-15

    def test_ia_first_negative(self, hand_block):
        assert _rel(s_first_ia(hand_block), -2 / 7) <= 1e-15

    def test_gap(self, hand_block):
        assert _rel(ia_gap(hand_block), 13 / 21) <= 1e-15

    def test_normalizer_current(self, hand_block_current):
        assert variance_normalizer(hand_block_current, CURRENT) == 2.0

    def test_normalizer_ia(self, hand_block):
        # (8 + 4 + 9) / (4 * 2)
        assert variance_normalizer(hand_block, IA) == 21 / 8


class TestDegenerateGroups:
    def test_empty_group_current(self):
        yA, yB = [1.0, 4.0, 2.0], [0.0, 3.0, 5.0]
        b = PickFreezeBlock(FactorGroup(), yA, yB, yB)
        assert s_first_saltelli(b) == 0.0
        assert st_total_jansen(b) == 0.0

    def test_full_group_current(self):
        yA, yB = [1.0, 4.0, 2.0], [0.0, 3.0, 5.0]
        assert st_total_jansen(PickFreezeBlock(FactorGroup.of(0), yA, yB, yA)) == 1.0

    def test_full_group_ia(self):
        yA, yB = [1.0, 4.0, 2.0], [0.0, 3.0, 5.0]
        b = PickFreezeBlock(FactorGroup.of(0), yA, yB, yA, yB)
        assert st_total_ia(b) == 1.0
        assert s_first_ia(b) == 1.0

    def test_empty_group_ia(self):
        yA, yB = [1.0, 4.0, 2.0], [0.0, 3.0, 5.0]
        b = PickFreezeBlock(FactorGroup(), yA, yB, yB, yA)
        assert st_total_ia(b) == 0.0

    @pytest.mark.parametrize("fn", [s_first_saltelli, st_total_jansen, s_first_ia, st_total_ia])
    def test_zero_denominator(self, fn):
        b = PickFreezeBlock(FactorGroup.of(0), [2.0, 2.0], [2.0, 2.0], [2.0, 2.0], [2.0, 2.0])
        with pytest.raises(DegenerateSampleError):
            fn(b)

    def test_ia_needs_bu(self, hand_block_current):
        with pytest.raises(ValueError):
            st_total_ia(hand_block_current)


class TestOracleEquivalence:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_small_integer_blocks(self, n):
        rng = np.random.default_rng(n)
        checked = 0
        while checked < 200:
            b = random_block(rng, n, kind="int")
            if not np.any(b.yA != b.yB):
                continue
            args3 = (b.yA, b.yB, b.yAu)
            args4 = (b.yA, b.yB, b.yAu, b.yBu)
            assert _rel(s_first_saltelli(b), float(oracle_ss(*args3))) <= 1e-15
            assert _rel(st_total_jansen(b), float(oracle_sj(*args3))) <= 1e-15
            assert _rel(st_total_ia(b), float(oracle_ia_total(*args4))) <= 1e-15
            assert _rel(s_first_ia(b), float(oracle_ia_first(*args4))) <= 1e-15
            checked += 1

    def test_real_blocks(self, rng):
        for _ in range(200):
            b = random_block(rng, int(rng.integers(2, 5)))
            args4 = (b.yA, b.yB, b.yAu, b.yBu)
            assert st_total_ia(b) == pytest.approx(float(oracle_ia_total(*args4)), rel=1e-12)
            assert st_total_jansen(b) == pytest.approx(float(oracle_sj(*args4[:3])), rel=1e-12)


class TestIAProperties:
    @settings(max_examples=300)
    @given(st.integers(0, 2**32), st.integers(2, 50))
    def test_ordering_and_gap(self, seed, n):
        b = random_block(np.random.default_rng(seed), n)
        first, total, gap = s_first_ia(b), st_total_ia(b), ia_gap(b)
        assert total - first >= -1e-12
        assert gap >= 0
        assert total - first == pytest.approx(gap, rel=1e-12, abs=1e-14)

    @settings(max_examples=200)
    @given(st.integers(0, 2**32), st.integers(2, 50))
    def test_ab_symmetry(self, seed, n):
        b = random_block(np.random.default_rng(seed), n)
        s = b.swap_ab()
        assert s_first_ia(s) == pytest.approx(s_first_ia(b), rel=1e-14, abs=1e-15)
        assert st_total_ia(s) == pytest.approx(st_total_ia(b), rel=1e-14, abs=1e-15)

    @settings(max_examples=200)
    @given(st.integers(0, 2**32), st.integers(2, 50))
    def test_complement_identity(self, seed, n):
        b = random_block(np.random.default_rng(seed), n)
        assert s_first_ia(b) + st_total_ia(b.swap_mixed()) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("n", [2, 7, 64])
    def test_additive_equality_any_n(self, n):
        model = AdditivePolynomial((1.0, 1.0))
        for seed in range(5):
            for b in evaluate_design(model, build_design(IA, n, 2, singletons(2), "mc", seed)):
                assert s_first_ia(b) == pytest.approx(st_total_ia(b), rel=1e-12)


class TestShiftInvariance:
    @settings(max_examples=100)
    @given(st.integers(0, 2**32), st.floats(-1e6, 1e6))
    def test_difference_based_estimators(self, seed, c):
        b = random_block(np.random.default_rng(seed), 30)
        s = b.shifted(c)
        for fn in (st_total_jansen, s_first_ia, st_total_ia):
            assert fn(s) == pytest.approx(fn(b), rel=1e-9, abs=1e-9)

    def test_saltelli_not_shift_invariant(self, rng):
        # the shift adds 2c * sum(yAu - yB) to the numerator
        b = random_block(rng, 10)
        assert abs(np.sum(b.yAu - b.yB)) > 1e-6
        assert s_first_saltelli(b.shifted(100.0)) != pytest.approx(s_first_saltelli(b))


def test_current_pair_can_violate_ordering():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        b = random_block(rng, 8)
        if st_total_jansen(b) < s_first_saltelli(b):
            break
    else:
        pytest.fail("no violating block found")


def _delta_method_oracle(kind, b, est, v_hat):
    """Variance via g Gamma g^T with the sample covariance of the sums' terms."""
    yA, yB, yAu, yBu = b.yA, b.yB, b.yAu, b.yBu
    if kind in (SS_FIRST, SJ_TOTAL):
        alpha = 2 * yA * (yAu - yB) if kind == SS_FIRST else (yAu - yB) ** 2
        beta = (yA - yB) ** 2
        gamma_ = np.cov(np.vstack([alpha, beta]), ddof=1)
        g = np.array([1 / (2 * v_hat), -est / (2 * v_hat)])
    else:
        if kind == IA_FIRST:
            alpha = 2 * (yBu - yA) * (yB - yAu)
        else:
            alpha = (yA - yBu) ** 2 + (yB - yAu) ** 2
        beta, gam = (yA - yB) ** 2, (yAu - yBu) ** 2
        gamma_ = np.cov(np.vstack([alpha, beta, gam]), ddof=1)
        g = np.array([1, -est, -est]) / (4 * v_hat)
    return g @ gamma_ @ g / b.n


class TestAsymptoticVariance:
    @pytest.mark.parametrize("kind", [SS_FIRST, SJ_TOTAL, IA_FIRST, IA_TOTAL])
    def test_matches_delta_method(self, kind, rng):
        strategy = CURRENT if kind in (SS_FIRST, SJ_TOTAL) else IA
        fn = {SS_FIRST: s_first_saltelli, SJ_TOTAL: st_total_jansen, IA_FIRST: s_first_ia, IA_TOTAL: st_total_ia}[kind]
        for _ in range(20):
            b = random_block(rng)
            est = fn(b)
            v_hat = variance_normalizer(b, strategy)
            got = asymptotic_variance(kind, b, est, v_hat)
            assert got == pytest.approx(_delta_method_oracle(kind, b, est, v_hat), rel=1e-9)
            assert got >= 0

    def test_empty_group_jansen_zero(self):
        yA, yB = [1.0, 4.0, 2.0], [0.0, 3.0, 5.0]
        b = PickFreezeBlock(FactorGroup(), yA, yB, yB)
        assert asymptotic_variance(SJ_TOTAL, b, 0.0, variance_normalizer(b, CURRENT)) == 0.0

    def test_constant_model_raises(self):
        b = PickFreezeBlock(FactorGroup.of(0), [1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0])
        v_hat = variance_normalizer(b, IA)
        assert v_hat == 0.0
        with pytest.raises(DegenerateSampleError):
            asymptotic_variance(IA_TOTAL, b, 0.5, v_hat)

    def test_estimate_block_plugin_order(self, hand_block):
        first, total = estimate_block(hand_block, IA)
        v_hat = variance_normalizer(hand_block, IA)
        assert first.value == s_first_ia(hand_block)
        assert first.asym_variance == asymptotic_variance(IA_FIRST, hand_block, first.value, v_hat)
        assert total.asym_variance == asymptotic_variance(IA_TOTAL, hand_block, total.value, v_hat)
        assert (first.kind, total.kind, first.strategy) == ("first", "total", "IA")


@pytest.mark.slow
def test_variance_scales_as_one_over_n():
    # 200 MC replicates at N and 4N: variance ratio near 4
    def variances(n):
        cfg = ExperimentConfig("ishigami", strategy="ia", sampler="mc", n=n, replicates=200, seed=99)
        table = run_replicates(cfg)
        out = {}
        for g in singletons(3):
            for kind in ("first", "total"):
                out[(g, kind)] = np.var(table.values("IA", kind, g), ddof=1)
        return out

    lo, hi = variances(256), variances(1024)
    for key in lo:
        assert 2.5 <= lo[key] / hi[key] <= 6, key


def test_ishigami_saltelli_mean():
    cfg = ExperimentConfig("ishigami", strategy="current", sampler="lhs", n=128, replicates=100, seed=3)
    table = run_replicates(cfg)
    est = table.values("SS", "first", FactorGroup.of(1))
    ref = Ishigami().analytic().S[1]
    assert abs(est.mean() - ref) <= 3 * est.std(ddof=1) / np.sqrt(len(est))


def test_ishigami_normalizer_mean():
    vals = []
    for r in range(100):
        blocks = evaluate_design(Ishigami(), build_design(CURRENT, 128, 3, [FactorGroup.of(0)], "lhs", 8, r))
        vals.append(variance_normalizer(blocks[0], CURRENT))
    vals = np.array(vals)
    assert abs(vals.mean() - 13.8446) <= 3 * vals.std(ddof=1) / np.sqrt(len(vals))
