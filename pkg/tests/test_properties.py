"""Property tests for the structural invariants."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superhedge import (Payoff, ShockAtom, closed_form_asian_call,
                        closed_form_asian_put, closed_form_call,
                        closed_form_put, delta_split, enumerate_paths,
                        psi_weights)
from superhedge._rng import SplitMix64
from superhedge.estimation import (PriceSample, StatisticSpec, estimate_a,
                                   order_statistics, statistic_values)

from _corpus import random_model, two_point_model

finite = dict(allow_nan=False, allow_infinity=False)

sigmas = st.floats(min_value=0.05, max_value=4.0, **finite)
eps_neg = st.floats(min_value=-8.0, max_value=-1e-3, **finite)
eps_pos = st.floats(min_value=1e-3, max_value=8.0, **finite)
exposures = st.floats(min_value=1e-3, max_value=1.0, **finite)
prices = st.floats(min_value=0.01, max_value=1e4, **finite)
a_lists = st.lists(exposures, min_size=1, max_size=6)


@given(sigmas, eps_neg, eps_pos, exposures, prices)
def test_psi_weights_form_a_probability(sigma, down, up, a, s0):
    m = two_point_model(s0, a, sigma, 0.5)
    pd, pu = psi_weights(m, (), down, up)
    assert 0.0 < pd < 1.0 and 0.0 < pu < 1.0
    assert pd + pu == pytest.approx(1.0, abs=1e-14)


@given(sigmas, eps_neg, eps_pos, exposures, prices)
def test_psi_weights_kill_the_drift(sigma, down, up, a, s0):
    m = two_point_model(s0, a, sigma, 0.5)
    pd, pu = psi_weights(m, (), down, up)
    d_dn, _, _ = delta_split(m, (), ShockAtom(down, 0.5))
    d_up, _, _ = delta_split(m, (), ShockAtom(up, 0.5))
    assert pd * d_dn + pu * d_up == pytest.approx(0.0, abs=1e-11 * s0)


@given(st.floats(min_value=-5, max_value=5, **finite), sigmas, exposures,
       prices)
def test_delta_split_reconstruction_is_exact(eps, sigma, a, s0):
    m = two_point_model(s0, a, sigma, 0.5)
    d, dm, dp = delta_split(m, (), ShockAtom(eps, 0.5))
    assert d == dp - dm
    assert dm >= 0.0 and dp >= 0.0
    assert dm == 0.0 or dp == 0.0


@given(st.integers(min_value=0, max_value=2000))
@settings(max_examples=40)
def test_base_measure_and_sigma_floor(seed):
    m = random_model(seed, n_max=3)
    total = 0.0
    for _, path in enumerate_paths(m):
        total += path.base_prob
        assert all(p > 0 for p in path.price_seq)
        floors = [s.vol.sigma if s.vol.kind == "constant" else s.vol.floor
                  for s in m.steps]
        assert all(sig >= f for sig, f in zip(path.sigma_seq, floors))
    assert total == pytest.approx(1.0, abs=1e-12)


@given(prices, a_lists, st.floats(min_value=0.01, max_value=2e4, **finite))
def test_closed_form_ranges(s0, a_list, strike):
    call = closed_form_call(s0, a_list, strike)
    put = closed_form_put(s0, a_list, strike)
    acall = closed_form_asian_call(s0, a_list, strike)
    aput = closed_form_asian_put(s0, a_list, strike)
    assert max(s0 - strike, 0.0) <= call <= s0
    assert 0.0 <= put <= strike
    assert max(s0 - strike, 0.0) - 1e-12 * s0 <= acall <= s0
    assert 0.0 <= aput <= strike
    # super-hedging an Asian claim never costs more than the terminal claim
    assert acall <= call + 1e-12 * max(s0, strike)
    assert aput <= put + 1e-12 * max(s0, strike)


@given(prices, a_lists, st.floats(min_value=0.01, max_value=2e4, **finite))
def test_asian_put_call_parity(s0, a_list, strike):
    acall = closed_form_asian_call(s0, a_list, strike)
    aput = closed_form_asian_put(s0, a_list, strike)
    total = 1.0
    prod = 1.0
    for a in a_list:
        prod *= 1.0 - a
        total += prod
    mean = s0 * total / (len(a_list) + 1)
    if mean < strike:
        assert acall - aput == pytest.approx(s0 - strike,
                                             abs=1e-12 * max(s0, strike))


@st.composite
def samples(draw):
    s0 = draw(prices)
    n = draw(st.integers(min_value=1, max_value=8))
    obs = [draw(st.floats(min_value=0.01, max_value=1e4, **finite))
           for _ in range(n)]
    return PriceSample(s0, tuple(obs))


@given(samples(), st.floats(min_value=0.01, max_value=1.0, **finite))
@settings(max_examples=150)
def test_estimation_identity_and_ranges(sample, tau0):
    stats = order_statistics(sample)
    for spec in (StatisticSpec("constant_one", tau0=tau0),
                 StatisticSpec("capped_ratio", tau0=tau0),
                 StatisticSpec("identity_tail", tau0=tau0,
                               tail_k=sample.n - 1)):
        g = statistic_values(spec, stats, sample.s0)
        assert all(x >= y for x, y in zip(g, g[1:]))
        params = estimate_a(sample, spec)
        assert all(0.0 <= a < 1.0 for a in params.a)
        prod = 1.0
        for a in params.a:
            prod *= 1.0 - a
        assert sample.s0 * prod == pytest.approx(tau0 * stats[0] * g[-1],
                                                 rel=1e-10)


@given(st.integers(min_value=0, max_value=10**9))
@settings(max_examples=60)
def test_splitmix_uniform_range(seed):
    rng = SplitMix64(seed)
    for _ in range(50):
        u = rng.uniform()
        assert 0.0 <= u < 1.0


@given(st.lists(st.floats(min_value=0.01, max_value=100.0, **finite),
                min_size=1, max_size=6),
       st.floats(min_value=0.05, max_value=3.0, **finite))
def test_payoff_convexity_detection(xs, slope):
    knots = [(0.0, 5.0)]
    x = 0.0
    y = 5.0
    s = -3.0
    for dx in sorted(set(xs)):
        x += dx
        y = max(0.0, y + s * dx)
        knots.append((x, y))
        s += slope  # slopes increase: convex by construction
    payoff = Payoff.piecewise_linear(knots, abs(s) + slope)
    assert payoff.is_convex
