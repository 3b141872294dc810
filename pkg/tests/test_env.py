import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st
from scipy import stats as sps

from brochette.env import (
    BoundedPower,
    Constant,
    Environment,
    LineId,
    LineTable,
    ShiftedWeibull,
    distribution_from_spec,
    edge_time,
    line_of_edge,
    mix_seed,
    tau,
    uniform_from_hash,
)

coord = st.integers(-10**6, 10**6)


@pytest.mark.parametrize(
    "u, v, expected",
    [
        ((0, 0), (1, 0), LineId(1, (0,))),
        ((3, 5), (3, 6), LineId(2, (3,))),
        ((1, 2, 3), (1, 2, 4), LineId(3, (1, 2))),
    ],
)
def test_line_of_edge_examples(u, v, expected):
    assert line_of_edge(u, v) == expected
    assert line_of_edge(v, u) == expected


@pytest.mark.parametrize("u, v", [((0, 0), (1, 1)), ((0, 0), (2, 0)), ((0, 0), (0, 0)), ((0, 0), (0, 0, 1))])
def test_line_of_edge_rejects_non_neighbours(u, v):
    with pytest.raises(ValueError):
        line_of_edge(u, v)


def test_line_id_axis_range():
    with pytest.raises(ValueError):
        LineId(3, (0,))
    with pytest.raises(ValueError):
        LineId(0, (0,))


def test_shifted_weibull_quantile_example():
    d = ShiftedWeibull(a=1, beta=1, lam=1)
    assert d.quantile(1 - math.exp(-1)) == pytest.approx(2.0, rel=1e-15)


def test_bounded_power_quantile_example():
    assert BoundedPower(b=1, beta=2).quantile(0.25) == pytest.approx(0.5, rel=1e-15)


@given(st.floats(1e-12, 1 - 1e-12), st.floats(0.0, 5.0), st.floats(0.2, 5.0), st.floats(0.1, 5.0))
@example(u=1.192092896e-07, a=1.0, beta=0.5, lam=1.4140625)
def test_weibull_quantile_inverts_cdf(u, a, beta, lam):
    d = ShiftedWeibull(a, beta, lam)
    t = float(d.quantile(u))
    assert t >= a
    # t - a cancels when the shift dominates, so bracket u by the cdf two ulps either side of t
    lo, hi = np.nextafter(np.nextafter(t, -np.inf), -np.inf), np.nextafter(np.nextafter(t, np.inf), np.inf)
    assert d.cdf(lo) <= u * (1 + 1e-9) + 1e-12
    assert d.cdf(hi) >= u * (1 - 1e-9) - 1e-12
    if a == 0:
        assert d.cdf(t) == pytest.approx(u, rel=1e-9, abs=1e-12)


@given(st.floats(1e-12, 1 - 1e-12), st.floats(0.1, 5.0), st.floats(0.2, 5.0))
def test_power_quantile_inverts_cdf(u, b, beta):
    d = BoundedPower(b, beta)
    t = d.quantile(u)
    assert 0 <= t <= b
    assert d.cdf(t) == pytest.approx(u, rel=1e-9, abs=1e-12)


def test_tail_constants():
    assert ShiftedWeibull(1, 2, 0.5).c == pytest.approx(4.0)
    assert BoundedPower(2, 3).c == pytest.approx(1 / 8)
    d = ShiftedWeibull(1, 2, 0.5)
    assert d.cdf(1 - 1e-9) == 0
    # F(a + t) ~ c t^beta
    t = 1e-4
    assert d.cdf(1 + t) / (d.c * t**2) == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize(
    "spec",
    [
        {"family": "shifted_weibull", "a": -1},
        {"family": "shifted_weibull", "beta": 0},
        {"family": "bounded_power", "b": 0},
        {"family": "nope"},
        {"family": "bounded_power", "beta": "x"},
    ],
)
def test_bad_distribution_specs(spec):
    with pytest.raises(ValueError):
        distribution_from_spec(spec)


def test_distribution_spec_round_trip():
    for d in (ShiftedWeibull(0.5, 1.5, 2.0), BoundedPower(3.0, 0.5), Constant(2.0)):
        assert distribution_from_spec(d.to_spec()) == d


def test_tau_is_pure_and_order_independent():
    env = Environment(3, ShiftedWeibull(1, 1, 1), master_seed=123)
    lines = [LineId(ax, (i, -j)) for ax in (1, 2, 3) for i in range(-3, 4) for j in range(3)]
    first = [tau(env, ln) for ln in lines]
    again = [tau(env, ln) for ln in reversed(lines)][::-1]
    assert first == again
    vec = env.line_times(2, [np.arange(-3, 4), np.zeros(7, dtype=int)])
    assert vec.tolist() == [tau(env, LineId(2, (i, 0))) for i in range(-3, 4)]


def test_seeds_change_the_environment():
    a = Environment(2, ShiftedWeibull(), 1).line_times(1, [np.arange(100)])
    b = Environment(2, ShiftedWeibull(), 2).line_times(1, [np.arange(100)])
    assert not np.any(a == b)


def test_marginal_law_matches_cdf():
    for dist in (ShiftedWeibull(1, 1, 1), BoundedPower(1, 2), ShiftedWeibull(0, 0.5, 2)):
        env = Environment(2, dist, master_seed=99)
        x = env.line_times(1, [np.arange(100_000)])
        ks = sps.kstest(x, dist.cdf).statistic
        assert ks < 0.01
        assert x.min() >= dist.infimum


def test_support_bounds():
    env = Environment(2, BoundedPower(2.0, 0.3), master_seed=5)
    x = env.line_times(2, [np.arange(-50_000, 50_000)])
    assert x.min() >= 0 and x.max() <= 2.0


def test_uniforms_are_open_interval():
    h = np.array([0, 2**64 - 1], dtype=np.uint64)
    u = uniform_from_hash(h)
    assert 0 < u[0] < 1e-15 and 1 - 1e-15 < u[1] < 1
    assert np.isfinite(ShiftedWeibull().quantile(u)).all()


def test_line_sharing_in_brochette_mode():
    env = Environment(2, ShiftedWeibull(), master_seed=4)
    times = {edge_time(env, (x, 0), (x + 1, 0)) for x in range(-20, 20)}
    assert len(times) == 1
    assert edge_time(env, (5, 3), (5, 4)) == edge_time(env, (5, -10), (5, -11))


def test_iid_mode_edges_are_distinct():
    env = Environment(2, ShiftedWeibull(), master_seed=4, mode="iid")
    times = [edge_time(env, (x, 0), (x + 1, 0)) for x in range(200)]
    assert len(set(times)) == 200


@given(st.tuples(coord, coord, coord), st.integers(0, 2), st.sampled_from([-1, 1]), st.sampled_from(["brochette", "iid"]))
def test_edge_time_symmetric(x, k, s, mode):
    env = Environment(3, BoundedPower(1, 2), master_seed=7, mode=mode)
    y = list(x)
    y[k] += s
    assert edge_time(env, x, tuple(y)) == edge_time(env, tuple(y), x)


@given(st.integers(0, 2**64 - 1), st.integers(0, 10**6), st.integers(0, 10**4))
def test_mix_seed_is_stable_and_in_range(master, n, rep):
    s = mix_seed(master, n, rep)
    assert 0 <= s < 2**64
    assert s == mix_seed(master, n, rep)


def test_mix_seed_children_are_distinct():
    seeds = {mix_seed(0, n, r) for n in (64, 128, 256) for r in range(1000)}
    assert len(seeds) == 3000


def test_environment_validation():
    with pytest.raises(ValueError):
        Environment(1, ShiftedWeibull())
    with pytest.raises(ValueError):
        Environment(2, ShiftedWeibull(), mode="other")
    with pytest.raises(ValueError):
        Environment(2, ShiftedWeibull(), master_seed=-1)
    with pytest.raises(ValueError):
        tau(Environment(2, ShiftedWeibull()), LineId(1, (0, 0)))


def test_line_table():
    env = LineTable.from_pairs(2, [(1, (1,), 0.25)], default=1.0)
    assert edge_time(env, (0, 1), (1, 1)) == 0.25
    assert edge_time(env, (0, 0), (1, 0)) == 1.0
    assert env.infimum == 0.25
    assert env.line_times(1, [np.array([0, 1, 2])]).tolist() == [1.0, 0.25, 1.0]
