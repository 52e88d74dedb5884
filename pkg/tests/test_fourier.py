import math

import numpy as np
import pytest
from scipy import integrate, stats

from hedgelab import constants, fourier, levy, payoffs
from hedgelab.fourier import QuadratureSpec
from hedgelab.montecarlo import SimConfig, simulate_increments


def bs_call(S, K, tau, a):
    d1 = (math.log(S / K) + 0.5 * a * a * tau) / (a * math.sqrt(tau))
    d2 = d1 - a * math.sqrt(tau)
    return S * stats.norm.cdf(d1) - K * stats.norm.cdf(d2), stats.norm.cdf(d1)


def bs_digital(S, K, tau, a):
    d2 = (math.log(S / K) - 0.5 * a * a * tau) / (a * math.sqrt(tau))
    return stats.norm.cdf(d2), stats.norm.pdf(d2) / (S * a * math.sqrt(tau))


@pytest.mark.parametrize("t, S", [(0.0, 1.0), (0.5, 0.8), (0.9, 1.2), (0.99, 1.01)])
def test_black_scholes_prices_and_deltas(bs_pair, t, S):
    c, d = bs_call(S, 1.0, 1.0 - t, 0.2)
    g, gd = bs_digital(S, 1.0, 1.0 - t, 0.2)
    assert abs(fourier.price(bs_pair, payoffs.call(1.0), t, S) - c) < 1e-7
    assert abs(fourier.price(bs_pair, payoffs.digital(1.0), t, S) - g) < 1e-7
    assert abs(fourier.delta_strategy(bs_pair, payoffs.call(1.0), t, S) - d) < 1e-7
    assert abs(fourier.delta_strategy(bs_pair, payoffs.digital(1.0), t, S) - gd) < 1e-6


@pytest.mark.parametrize("kind", ["call", "digital"])
def test_quadratic_equals_delta_without_jumps(bs_pair, kind):
    pay = payoffs.Payoff(kind, 1.1)
    for t, S in [(0.0, 1.0), (0.3, 0.7), (0.8, 1.3)]:
        d = fourier.delta_strategy(bs_pair, pay, t, S)
        q = fourier.quad_strategy(bs_pair, pay, t, S)
        assert abs(d - q) < 1e-8


@pytest.mark.parametrize("pair_name", ["merton_pair", "cgmy15_pair", "vg_pair"])
def test_digital_price_bounds_and_monotone_in_strike(pair_name, request):
    pair = request.getfixturevalue(pair_name)
    Ks = np.linspace(0.8, 1.2, 5)
    vals = [fourier.price(pair, payoffs.digital(K), 0.0, 1.0) for K in Ks]
    assert all(0.0 <= v <= 1.0 for v in vals)
    assert np.all(np.diff(vals) <= 1e-12)


@pytest.mark.parametrize("pair_name", ["merton_pair", "cgmy15_pair", "vg_pair"])
def test_call_price_convex_in_strike(pair_name, request):
    pair = request.getfixturevalue(pair_name)
    Ks = np.linspace(0.8, 1.2, 5)
    vals = np.array([fourier.price(pair, payoffs.call(K), 0.0, 1.0) for K in Ks])
    assert np.all(np.diff(vals, 2) >= -1e-12)
    assert np.all(np.diff(vals) < 0)


def test_merton_call_matches_simulation(merton_pair):
    x = simulate_increments(merton_pair.q_model, 1.0, 1, SimConfig(n_paths=1_000_000, seed=21))[:, 0]
    pay = np.maximum(np.exp(x) - 1.0, 0.0)
    v = fourier.price(merton_pair, payoffs.call(1.0), 0.0, 1.0)
    assert abs(pay.mean() - v) < 3 * pay.std() / math.sqrt(pay.size)


@pytest.mark.parametrize("kind, Rs", [("call", (1.5, 3.0)), ("digital", (0.5, 2.0))])
@pytest.mark.parametrize("strategy", [None, "delta", "quadratic"])
def test_contour_shift_invariance(cgmy15_pair, kind, Rs, strategy):
    pay = payoffs.Payoff(kind, 1.05)
    v = [fourier._strip_value(cgmy15_pair, pay, strategy and fourier.strategy_kind(strategy), 0.6, 0.97, R, fourier.DEFAULT_QUAD) for R in Rs]
    assert abs(v[0] - v[1]) < 1e-6 * max(abs(v[1]), 1e-3)


def test_upsilon_identities(bs_pair, rng):
    q = bs_pair.q_model
    assert abs(fourier.upsilon(q, 0.0, 0.0)) < 1e-15
    u = rng.uniform(-100, 100, 50)
    assert np.max(np.abs(fourier.upsilon(q, u) - (-1j * u))) < 1e-12
    assert abs(fourier.upsilon(levy.cgmy(0.5, 5.0, 10.0, 1.5), 0.0, 0.0)) < 1e-12


def test_upsilon_stable_asymptotics(cgmy15_pair):
    q = cgmy15_pair.q_model
    sc = constants.stable_coeffs(q)
    for u, g in [(1e4, sc.gamma_plus), (-1e4, sc.gamma_minus)]:
        ratio = fourier.upsilon(q, u, 1.0) / abs(u) ** 0.5
        target = g / cgmy15_pair.A_bar
        assert abs(ratio - target) < 0.02 * abs(target)
    # the approach is monotone: 1e3 is farther than 1e4
    r3 = fourier.upsilon(q, 1e3, 1.0) / 1e3**0.5
    r4 = fourier.upsilon(q, 1e4, 1.0) / 1e4**0.5
    target = sc.gamma_plus / cgmy15_pair.A_bar
    assert abs(r4 - target) < abs(r3 - target)


def test_quadratic_digital_vanishes_deep_in_the_money(merton_pair, cgmy15_pair):
    for pair in (merton_pair, cgmy15_pair):
        assert abs(fourier.quad_strategy(pair, payoffs.digital(1.0), 0.0, math.exp(5.0))) < 1e-3


def test_merton_quadratic_digital_matches_covariation_ratio(merton_pair):
    # d<C,S>/d<S,S> at t=0, S=1 from one short step of Q-paths
    pay = payoffs.digital(1.0)
    dt = 1e-3
    x = simulate_increments(merton_pair.q_model, dt, 1, SimConfig(n_paths=1_000_000, seed=5))[:, 0]
    surf = fourier.StrategySurface(merton_pair, pay, None, n_grid=2**15, length=16.0)
    c0 = fourier.price(merton_pair, pay, 0.0, 1.0)
    dC = surf.evaluate(1.0 - dt, x) - c0
    dS = np.expm1(x)
    r = np.mean(dC * dS) / np.mean(dS * dS)
    z = (dC * dS - r * dS * dS) / np.mean(dS * dS)
    se = z.std() / math.sqrt(z.size)
    F = fourier.quad_strategy(merton_pair, pay, 0.0, 1.0)
    assert 0.0 <= F <= 5.0
    assert abs(r - F) < 3 * se


@pytest.mark.parametrize("strategy", [None, "delta", "quadratic"])
def test_imaginary_residue_is_negligible(cgmy15_pair, strategy):
    kind = strategy and fourier.strategy_kind(strategy)
    for S in (0.9, 1.0, 1.1):
        assert abs(fourier.imag_residue(cgmy15_pair, payoffs.digital(1.0), kind, 0.5, S)) < 1e-12


def test_quadrature_self_consistency(cgmy15_pair, merton_pair):
    tight = QuadratureSpec(rel_tol=5e-10)
    for pair in (cgmy15_pair, merton_pair):
        for pay in (payoffs.call(1.0), payoffs.digital(1.0)):
            for fn in (fourier.price, fourier.delta_strategy, fourier.quad_strategy):
                a = fn(pair, pay, 0.5, 0.95)
                b = fn(pair, pay, 0.5, 0.95, quad=tight)
                assert abs(a - b) <= 1e-9 * abs(b) + 1e-12


def test_variance_gamma_digital_delta_refused_near_expiry(vg_pair):
    with pytest.raises(fourier.IntegrabilityError, match="power-law"):
        fourier.delta_strategy(vg_pair, payoffs.digital(1.0), 0.95, 1.0)
    # far from expiry the power-law decay is sufficient
    assert fourier.delta_strategy(vg_pair, payoffs.digital(1.0), 0.0, 1.0) > 0


def test_density_black_scholes():
    m = levy.black_scholes(0.2, gamma=0.0)
    x = np.linspace(-0.6, 0.6, 13)
    ref = stats.norm.pdf(x, scale=0.2)
    assert np.max(np.abs(fourier.density(m, 1.0, x) - ref)) < 1e-8


@pytest.mark.parametrize("model", [levy.cgmy(0.5, 5.0, 10.0, 1.5), levy.nig(15.0, -4.0, 0.5), levy.black_scholes(0.3)])
def test_density_normalization(model):
    lo, hi = fourier.log_price_bounds(model, 1.0, prob=1e-9)
    total = integrate.quad(lambda x: fourier.density(model, 1.0, x), lo, hi, limit=200, epsabs=1e-10)[0]
    assert abs(total - 1.0) < 1e-6


def test_density_nig_matches_kernel_estimate():
    m = levy.nig(15.0, -4.0, 0.5)
    x = simulate_increments(m, 1.0, 1, SimConfig(n_paths=1_000_000, seed=9))[:, 0]
    grid = np.linspace(-1.5, 1.5, 1201)
    cdf = integrate.cumulative_trapezoid(fourier.density(m, 1.0, grid), grid, initial=0.0)
    assert stats.kstest(x, lambda y: np.interp(y, grid, cdf)).pvalue > 0.01
    bw = 0.01
    for x0 in (-0.2, 0.0, 0.2):
        k = stats.norm.pdf((x - x0) / bw) / bw
        est, se = k.mean(), k.std() / math.sqrt(k.size)
        # the kernel estimate targets the density smoothed at scale bw
        ref = integrate.quad(lambda y: fourier.density(m, 1.0, y) * stats.norm.pdf((y - x0) / bw) / bw, x0 - 8 * bw, x0 + 8 * bw)[0]
        assert abs(est - ref) < 3 * se
        assert abs(ref - fourier.density(m, 1.0, x0)) < 0.01 * ref


def test_density_refused_for_weak_decay():
    vg = levy.variance_gamma(5.0, 13.5, 18.5)
    with pytest.raises(fourier.IntegrabilityError):
        fourier.density(vg, 0.1, 0.0)
    assert fourier.density(vg, 1.0, 0.0) > 0


def test_surface_matches_pointwise_quadrature(cgmy15_pair, merton_pair):
    for pair in (cgmy15_pair, merton_pair):
        for strategy in ("delta", "quadratic"):
            pay = payoffs.digital(1.0)
            surf = fourier.StrategySurface(pair, pay, strategy, n_grid=2**15, length=16.0)
            tau = 0.3
            xq = np.array([-0.3, -0.05, 0.0, 0.07, 0.4])
            got = surf.evaluate(tau, xq)
            ref = [fourier.strategy_value(pair, pay, strategy, 1.0 - tau, math.exp(x)) for x in xq]
            assert np.max(np.abs(got - ref)) < 1e-6


def test_table_black_scholes_call(bs_pair, rng):
    times = np.linspace(0.0, 0.98, 64)
    x = np.linspace(-1.0, 1.0, 512)
    tab = fourier.build_strategy_table(bs_pair, payoffs.call(1.0), "delta", times, x)
    # nodes are reproduced exactly
    assert np.array_equal(tab(times[10], x[100]), tab.values[10, 100])
    tq = rng.uniform(0.0, 0.98, 100)
    xq = rng.uniform(-1.0, 1.0, 100)
    ref = np.array([bs_call(math.exp(b), 1.0, 1.0 - a, 0.2)[1] for a, b in zip(tq, xq)])
    assert np.max(np.abs(tab(tq, xq) - ref)) < 1e-4
    assert np.all(np.diff(tab.values, axis=1) >= -1e-12)


def test_table_rejects_bad_grids(bs_pair):
    with pytest.raises(ValueError):
        fourier.build_strategy_table(bs_pair, payoffs.call(1.0), "delta", [0.0, 1.0], np.linspace(-1, 1, 8))
    with pytest.raises(ValueError):
        fourier.build_strategy_table(bs_pair, payoffs.call(1.0), "delta", [0.0, 0.5], np.linspace(-40, 40, 8))


def test_log_price_bounds_contain_running_extremes():
    m = levy.cgmy(0.5, 5.0, 10.0, 1.5)
    lo, hi = fourier.log_price_bounds(m, 1.0)
    x = simulate_increments(m, 1 / 256, 256, SimConfig(n_paths=20_000, seed=3)).cumsum(axis=1)
    assert lo < x.min() and x.max() < hi
