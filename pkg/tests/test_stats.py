import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from brochette.env import BoundedPower, Environment, ShiftedWeibull
from brochette.stats import (
    Ecdf,
    WeibullLaw,
    dkw_epsilon,
    fit_exponent,
    ks_distance,
    medians_by_n,
    scaled_min_sample,
    slope_bounds,
    weibull_cdf,
)


@pytest.mark.parametrize("beta", [0.3, 1.0, 2.0, 7.0])
def test_weibull_cdf_at_one(beta):
    assert weibull_cdf(beta, 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-15)


def test_weibull_cdf_examples():
    assert weibull_cdf(1.0, 0.0) == 0.0
    assert weibull_cdf(2.0, -3.0) == 0.0
    assert weibull_cdf(2.0, 2.0) == pytest.approx(0.98168, abs=1e-5)
    with pytest.raises(ValueError):
        weibull_cdf(0.0, 1.0)
    with pytest.raises(ValueError):
        WeibullLaw(-1.0)


@pytest.mark.parametrize("beta", [0.5, 1.0, 3.0])
def test_weibull_cdf_monotone(beta):
    grid = np.linspace(-1, 6, 2001)
    vals = weibull_cdf(beta, grid)
    assert np.all(np.diff(vals) >= 0)
    assert vals[0] == 0 and vals[-1] <= 1


def test_ecdf_is_right_continuous_step():
    e = Ecdf.of([3.0, 1.0, 2.0, 2.0])
    assert e.values.tolist() == [1.0, 2.0, 2.0, 3.0]
    assert e(0.5) == 0 and e(1.0) == 0.25 and e(2.0) == 0.75 and e(10) == 1.0


def test_ks_single_point_at_median():
    median = math.log(2.0)
    assert ks_distance(Ecdf.of([median]), WeibullLaw(1.0)) == pytest.approx(0.5, abs=1e-15)


def test_ks_empty_sample():
    with pytest.raises(ValueError):
        ks_distance(Ecdf.of([]), WeibullLaw(1.0))


def test_ks_exact_sample_is_small():
    rng = np.random.default_rng(0)
    x = rng.weibull(1.5, size=10_000)
    assert ks_distance(Ecdf.of(x), WeibullLaw(1.5)) < 0.02
    assert dkw_epsilon(10_000, 0.01) < 0.02


def test_ks_shifted_sample():
    rng = np.random.default_rng(1)
    x = rng.weibull(2.0, size=5000) + 1.0
    assert ks_distance(Ecdf.of(x), WeibullLaw(2.0)) >= weibull_cdf(2.0, 1.0)


@given(st.lists(st.floats(-1.0, 20.0), min_size=1, max_size=60), st.floats(0.2, 4.0))
def test_ks_matches_scipy(xs, beta):
    ours = ks_distance(Ecdf.of(xs), WeibullLaw(beta))
    ref = sps.kstest(xs, lambda t: weibull_cdf(beta, t)).statistic
    assert 0 <= ours <= 1
    assert ours == pytest.approx(ref, abs=1e-12)


def test_scaled_min_of_one_line_is_centred_draw():
    dist = ShiftedWeibull(1, 1, 1)
    s = scaled_min_sample(dist, 1, 50, seed=3)
    raw = Environment(2, dist, 3).line_times(1, [np.arange(50)])
    assert np.array_equal(s, raw - 1.0)


def test_scaled_min_exponential_case():
    s = scaled_min_sample(ShiftedWeibull(1, 1, 1), 1000, 4000, seed=11)
    assert s.min() >= 0
    assert ks_distance(Ecdf.of(s), WeibullLaw(1.0)) < dkw_epsilon(4000, 1e-3)


def test_scaled_min_power_case():
    s = scaled_min_sample(BoundedPower(1, 2), 1000, 4000, seed=12)
    assert ks_distance(Ecdf.of(s), WeibullLaw(2.0)) < 0.04


def test_scaled_min_validation():
    with pytest.raises(ValueError):
        scaled_min_sample(ShiftedWeibull(), 0, 10)
    with pytest.raises(ValueError):
        scaled_min_sample(ShiftedWeibull(), 10, 0)


def test_fit_exact_power_law():
    fit = fit_exponent([(n, 7 * n**0.5) for n in (64, 128, 256, 512)])
    assert fit.slope == pytest.approx(0.5, rel=1e-12)
    assert fit.r_squared == pytest.approx(1.0, rel=1e-12)
    assert math.exp(fit.intercept) == pytest.approx(7.0, rel=1e-12)


@given(st.floats(-2, 2), st.floats(0.01, 100))
def test_fit_recovers_any_exact_slope(k, c):
    fit = fit_exponent([(n, c * n**k) for n in (8, 16, 32, 64, 128)])
    assert fit.slope == pytest.approx(k, rel=1e-12, abs=1e-12)


def test_fit_flat():
    assert fit_exponent([(n, 3.0) for n in (10, 20, 40)]).slope == pytest.approx(0.0, abs=1e-15)


def test_fit_with_noise():
    rng = np.random.default_rng(5)
    for _ in range(50):
        pairs = [(n, n**0.5 * rng.uniform(0.9, 1.1)) for n in (64, 128, 256, 512, 1024, 2048, 4096)]
        assert 0.4 <= fit_exponent(pairs).slope <= 0.6


@pytest.mark.parametrize(
    "pairs",
    [
        [(1, 1.0), (2, 2.0)],
        [(1, 1.0), (2, 0.0), (4, 2.0)],
        [(1, 1.0), (2, -1.0), (4, 2.0)],
        [(1, 1.0), (1, 2.0), (4, 2.0)],
    ],
)
def test_fit_errors(pairs):
    with pytest.raises(ValueError):
        fit_exponent(pairs)


def test_medians_by_n():
    assert medians_by_n([(2, 1.0), (1, 5.0), (2, 3.0), (2, 10.0)]) == [(1, 5.0), (2, 3.0)]


@given(st.lists(st.floats(0.1, 100.0), min_size=3, max_size=8))
def test_slope_bounds_of_points_is_the_fit(vals):
    pairs = [(2**k, v) for k, v in enumerate(vals, start=4)]
    lo, hi = slope_bounds(pairs, pairs)
    assert lo == pytest.approx(hi, abs=1e-12)
    assert lo == pytest.approx(fit_exponent(pairs).slope, abs=1e-9)


@given(
    st.lists(st.tuples(st.floats(0.1, 100.0), st.floats(1.0, 3.0), st.floats(0.0, 1.0)), min_size=3, max_size=8)
)
def test_slope_bounds_contain_every_fit_inside_the_intervals(cells):
    ns = [2**k for k in range(4, 4 + len(cells))]
    lower = [(n, a) for n, (a, _, _) in zip(ns, cells)]
    upper = [(n, a * w) for n, (a, w, _) in zip(ns, cells)]
    inside = [(n, a * w**t) for n, (a, w, t) in zip(ns, cells)]
    lo, hi = slope_bounds(lower, upper)
    s = fit_exponent(inside).slope
    assert lo - 1e-9 <= s <= hi + 1e-9


def test_slope_bounds_unknown_values():
    lower = [(16, 2.0), (64, 4.0), (256, 0.0)]
    upper = [(16, 2.0), (64, 4.0), (256, math.inf)]
    assert slope_bounds(lower, upper) == (-math.inf, math.inf)
    upper = [(16, 2.0), (64, 4.0), (256, 8.0)]
    assert slope_bounds(lower, upper)[1] == pytest.approx(fit_exponent(upper).slope)


@pytest.mark.parametrize(
    "lower, upper",
    [
        ([(1, 1.0), (2, 1.0)], [(1, 1.0), (2, 1.0)]),
        ([(1, 1.0), (2, 1.0), (4, 1.0)], [(1, 1.0), (2, 1.0), (8, 1.0)]),
        ([(1, 2.0), (2, 1.0), (4, 1.0)], [(1, 1.0), (2, 1.0), (4, 1.0)]),
        ([(1, 1.0), (1, 1.0), (4, 1.0)], [(1, 1.0), (1, 1.0), (4, 1.0)]),
    ],
)
def test_slope_bounds_errors(lower, upper):
    with pytest.raises(ValueError):
        slope_bounds(lower, upper)
