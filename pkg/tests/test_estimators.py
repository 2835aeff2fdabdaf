import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from byzsense import estimators as est
from byzsense.errors import DegenerateSampleError, InvalidInputError

import oracles


# -- worked examples -------------------------------------------------------


@pytest.mark.parametrize(
    "sample, expected",
    [([5, 5, 5], 0.0), ([0, 2], 1.0), ([1, 2, 4], 4 / 3)],
)
def test_mean_difference_examples(sample, expected):
    assert est.mean_difference(sample) == pytest.approx(expected, rel=1e-15)


def test_mean_difference_counts_the_diagonal():
    # double loop over all N^2 ordered pairs, zero diagonal included
    x = [1.0, 2.0, 4.0]
    total = sum(abs(a - b) for a in x for b in x)
    assert est.mean_difference(x) == total / 9


@pytest.mark.parametrize(
    "sample, expected",
    [([7.5] * 4, 0.0), ([1, 2, 3, 4, 5], 1.0), ([1, 2, 3, 4, 100], 1.0)],
)
def test_mad_examples(sample, expected):
    assert est.mad(sample) == expected


@pytest.mark.parametrize(
    "sample, expected",
    [([3.0, 3.0, 3.0], 0.0), ([1, 2, 3], 1.192 * 1.5), ([1, 2, 3, 100], 1.192 * 2)],
)
def test_sn_examples(sample, expected):
    assert est.sn_estimator(sample) == pytest.approx(expected, rel=1e-15)
    assert est.sn_estimator(sample) == pytest.approx(oracles.sn(sample), rel=1e-15)


@pytest.mark.parametrize(
    "sample, expected",
    [([4.0, 4.0], 0.0), ([0, 1, 2], 2.2), ([0, 1, 2, 3], 2.2)],
)
def test_qn_examples(sample, expected):
    assert est.qn_estimator(sample) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize(
    "sample, expected",
    [([1, 2, 3], (1.5, 2.5)), ([0, 0, 0, 0], (0.0, 0.0)), ([1, 2, 3, 4, 5], (2.0, 4.0))],
)
def test_quartile_examples(sample, expected):
    assert est.quartiles(sample) == expected


@pytest.mark.parametrize(
    "sample, expected",
    [([1, 2, 3], 0.0), ([1, 2, 10], 7 / 9), ([-10, -2, -1], -7 / 9)],
)
def test_medcouple_examples(sample, expected):
    assert est.medcouple(sample) == pytest.approx(expected, abs=1e-15)


def test_fence_factors_at_hypothetical_mc():
    h_l, h_r = est.fence_factors(0.2)
    # reference values from 30-digit mpmath evaluation
    assert h_l == pytest.approx(0.744877955687114222, rel=1e-14)
    assert h_r == pytest.approx(3.338311392738701555, rel=1e-14)


def test_adjusted_fences_composed_example():
    f = est.adjusted_fences([1, 2, 10])
    assert f.mc == pytest.approx(7 / 9)
    assert (f.q1, f.q3, f.iqr) == (1.5, 6.0, 4.5)
    # 30-digit mpmath: 1.5 exp(-3.5*7/9), 1.5 exp(28/9), and both fences
    assert f.h_l == pytest.approx(0.0985927929247957247, rel=1e-13)
    assert f.h_r == pytest.approx(33.6689557763714996, rel=1e-13)
    assert f.lower_fence == pytest.approx(1.05633243183841924, rel=1e-13)
    assert f.upper_fence == pytest.approx(157.510300993671748, rel=1e-13)


def test_symmetric_sample_gives_classical_boxplot():
    x = [-3.0, -1.0, 0.0, 1.0, 3.0]
    f = est.adjusted_fences(x)
    assert f.mc == 0.0
    assert f.h_l == f.h_r == 1.5
    assert f.lower_fence == f.q1 - 1.5 * f.iqr
    assert f.upper_fence == f.q3 + 1.5 * f.iqr


# -- errors ----------------------------------------------------------------


@pytest.mark.parametrize("fn", [est.mean_difference, est.mad, est.median])
def test_empty_sample_is_invalid(fn):
    with pytest.raises(InvalidInputError):
        fn([])


@pytest.mark.parametrize("fn", [est.sn_estimator, est.qn_estimator, est.quartiles])
def test_pairwise_estimators_need_two_values(fn):
    with pytest.raises(InvalidInputError):
        fn([1.0])


def test_medcouple_needs_three_values():
    with pytest.raises(InvalidInputError):
        est.medcouple([1.0, 2.0])


@pytest.mark.parametrize("bad", [[1.0, np.nan, 2.0], [1.0, np.inf, 3.0]])
def test_non_finite_values_are_invalid(bad):
    with pytest.raises(InvalidInputError):
        est.mad(bad)


def test_medcouple_degenerate_is_distinct_from_invalid():
    with pytest.raises(DegenerateSampleError):
        est.medcouple([2.0, 2.0, 2.0, 2.0, 5.0])
    with pytest.raises(DegenerateSampleError):
        est.adjusted_fences([4.0, 4.0, 4.0])
    assert not issubclass(DegenerateSampleError, InvalidInputError)


# -- oracle equivalence ----------------------------------------------------


def _random_sample(rng):
    n = int(rng.integers(3, 121))
    kind = rng.integers(3)
    if kind == 0:
        return rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 3), n)
    if kind == 1:
        return rng.lognormal(0.0, rng.uniform(0.2, 1.5), n)
    x = rng.normal(1.1, 0.05, n)
    m = int(rng.integers(0, n // 2 + 1))
    x[:m] = rng.normal(0.5, 0.02, m)
    return x


@pytest.mark.parametrize("seed", range(5))
def test_estimators_match_definitional_oracles(seed):
    rng = np.random.default_rng(seed)
    for _ in range(40):
        x = _random_sample(rng)
        assert oracles.within_ulps(est.mean_difference(x), oracles.mean_difference(x), 4)
        assert oracles.within_ulps(est.mad(x), oracles.mad(list(x)), 4)
        assert oracles.within_ulps(est.sn_estimator(x), oracles.sn(x), 4)
        assert oracles.within_ulps(est.qn_estimator(x), oracles.qn(x), 4)
        assert oracles.within_ulps(est.medcouple(x), oracles.medcouple(list(x)), 4)
        q1, q3 = est.quartiles(x)
        o1, o3 = oracles.quartiles(x)
        assert oracles.within_ulps(q1, o1, 4) and oracles.within_ulps(q3, o3, 4)


def test_sn_qn_with_heavy_ties_match_oracles():
    rng = np.random.default_rng(11)
    for _ in range(50):
        x = np.round(rng.normal(size=int(rng.integers(2, 80))), 1)
        assert oracles.within_ulps(est.sn_estimator(x), oracles.sn(x), 4)
        assert oracles.within_ulps(est.qn_estimator(x), oracles.qn(x), 4)


def test_mean_difference_large_sample_path():
    # above the all-pairs cutoff the order-statistic identity is used
    rng = np.random.default_rng(3)
    x = rng.normal(size=1500)
    assert est.mean_difference(x) == pytest.approx(oracles.mean_difference(x), rel=1e-12)


# -- invariants ------------------------------------------------------------

# Dyadic data with few significant bits: shifts and dyadic scalings are exact
# in binary floating point, so equivariance can be checked at the ulp level.
dyadic_samples = st.lists(st.integers(-(2**16), 2**16), min_size=3, max_size=60).map(
    lambda v: np.array(v, dtype=float) / 1024.0
)
shifts = st.integers(-1000, 1000).map(float)
scales = st.sampled_from([-4.0, -1.5, -0.75, -0.5, 0.25, 0.625, 1.0, 3.0, 12.0])

SCALE_ESTIMATORS = [est.mean_difference, est.mad, est.sn_estimator, est.qn_estimator]


@pytest.mark.parametrize("fn", SCALE_ESTIMATORS)
@given(x=dyadic_samples, c=shifts)
@settings(max_examples=60, deadline=None)
def test_location_invariance(fn, x, c):
    assert oracles.within_ulps(fn(x + c), fn(x), 8)


@pytest.mark.parametrize("fn", SCALE_ESTIMATORS)
@given(x=dyadic_samples, a=scales)
@settings(max_examples=60, deadline=None)
def test_scale_equivariance(fn, x, a):
    assert oracles.within_ulps(fn(a * x), abs(a) * fn(x), 8)


@given(x=dyadic_samples, a=scales, c=shifts)
@settings(max_examples=100, deadline=None)
def test_medcouple_affine_invariance_and_range(x, a, c):
    try:
        mc = est.medcouple(x)
    except DegenerateSampleError:
        return
    assert -1.0 <= mc <= 1.0
    assert est.medcouple(a * x + c) == pytest.approx(math.copysign(1.0, a) * mc, abs=1e-15)
    assert est.medcouple(-x) == -mc


@pytest.mark.parametrize("fn", SCALE_ESTIMATORS)
@given(v=st.floats(-1e6, 1e6), n=st.integers(2, 40))
@settings(max_examples=30, deadline=None)
def test_constant_samples_give_exact_zero(fn, v, n):
    assert fn([v] * n) == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_breakdown_bounded_for_robust_estimators(seed):
    rng = np.random.default_rng(seed)
    clean = rng.normal(size=50)
    dirty = clean.copy()
    idx = rng.choice(50, 10, replace=False)
    dirty[idx] = rng.uniform(1e6, 1e9, 10)
    kept = np.delete(clean, idx)
    spread = kept.max() - kept.min()
    assert est.mad(dirty) <= spread
    assert est.sn_estimator(dirty) / est.SN_CONSTANT <= spread
    assert est.qn_estimator(dirty) / est.QN_CONSTANT <= spread
    # the mean difference has no such bound: it follows the planted values
    assert est.mean_difference(dirty) > 1e5


def test_gaussian_consistency_tight_bands():
    hits = {"mad": 0, "md": 0, "sn": 0, "qn": 0}
    for seed in range(20):
        x = np.random.default_rng(seed).standard_normal(10_000)
        hits["mad"] += 0.95 <= 1.4826 * est.mad(x) <= 1.05
        hits["md"] += 0.95 <= math.sqrt(math.pi) / 2 * est.mean_difference(x) <= 1.05
        hits["sn"] += 0.9 <= est.sn_estimator(x) <= 1.1
        hits["qn"] += 0.9 <= est.qn_estimator(x) <= 1.1
    assert hits == {"mad": 20, "md": 20, "sn": 20, "qn": 20}
