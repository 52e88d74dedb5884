import math

import numpy as np
import pytest
from scipy import stats

from hedgelab import fourier, levy, payoffs
from hedgelab import montecarlo as mc
from hedgelab.montecarlo import ConstantSource, ErrorEstimate, SimConfig


def test_sim_config_validation():
    for kw in ({"m": 4}, {"eps": 0.0}, {"n_paths": 500}, {"seed": -1}, {"eps_coupling": 0.0}):
        with pytest.raises(ValueError):
            SimConfig(**kw)


def test_gaussian_increments_without_jumps():
    m = levy.black_scholes(0.2, gamma=0.03)
    dt = 0.1
    x = mc.simulate_increments(m, dt, 1, SimConfig(n_paths=100_000, seed=1))[:, 0]
    assert stats.kstest(x, stats.norm(0.03 * dt, 0.2 * math.sqrt(dt)).cdf).pvalue > 0.01


@pytest.mark.parametrize(
    "model",
    [
        levy.merton(0.1, 1.0, -0.1, 0.15, gamma=0.05),
        levy.kou(0.1, 2.0, 0.4, 12.0, 8.0, gamma=0.05),
        levy.cgmy(0.5, 5.0, 10.0, 1.5, gamma=0.05),
        levy.variance_gamma(5.0, 13.5, 18.5, gamma=0.05),
        levy.nig(15.0, -4.0, 0.5, gamma=0.05),
    ],
    ids=lambda m: m.family,
)
def test_exponential_moment(model):
    # a coarse cutoff keeps the CGMY jump count small; the matched Gaussian keeps the moment exact to O(eps^3)
    x = mc.simulate_increments(model, 0.25, 4, SimConfig(n_paths=100_000, seed=2, eps=1e-2))
    e = np.exp(x.sum(axis=1))
    ref = math.exp(model.psi(-1j).real)
    assert abs(e.mean() - ref) < 3 * e.std() / math.sqrt(e.size)


def test_increments_deterministic():
    m = levy.cgmy(0.5, 5.0, 10.0, 1.5)
    cfg = SimConfig(n_paths=5000, seed=42)
    a = mc.simulate_increments(m, 0.01, 3, cfg)
    b = mc.simulate_increments(m, 0.01, 3, cfg)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, mc.simulate_increments(m, 0.01, 3, cfg, seed=43))


def test_paths_identical_across_thread_counts(merton_pair):
    surf = fourier.StrategySurface(merton_pair, payoffs.call(1.0), "delta", n_grid=2**12, length=8.0)
    cfg = SimConfig(n_paths=10_000, seed=3, m=8)
    one = mc.run_paths(merton_pair.p_model, [surf], [2, 4], 32, cfg, threads=1)
    three = mc.run_paths(merton_pair.p_model, [surf], [2, 4], 32, cfg, threads=3)
    assert np.array_equal(one, three)


def test_constant_strategy_gives_zero_error(cgmy15_pair):
    cfg = SimConfig(n_paths=2000, seed=4, m=8)
    eps = mc.run_paths(cgmy15_pair.p_model, [ConstantSource(1.0)], [4, 8], 64, cfg)
    assert np.all(eps == 0.0)


def test_rebalancing_on_fine_grid_gives_zero_error(bs_pair):
    surf = fourier.StrategySurface(bs_pair, payoffs.call(1.0), "delta", n_grid=2**12, length=8.0)
    eps = mc.discretization_error(bs_pair, payoffs.call(1.0), surf, 16, SimConfig(n_paths=2000, m=8), n_fine=16)
    assert np.all(eps == 0.0)


def test_grid_mismatch_rejected(bs_pair):
    with pytest.raises(ValueError, match="divide"):
        mc.run_paths(bs_pair.p_model, [ConstantSource()], [3], 16, SimConfig(n_paths=1000))


def test_black_scholes_call_error_has_zero_mean(bs_pair):
    e = mc.estimate_error(bs_pair, payoffs.call(1.0), "delta", [16], SimConfig(n_paths=100_000, seed=5))[0]
    # the P-drift contributes O(h); 0.01 h is generous for a = 0.2
    assert abs(e.mean) < 3 * e.mean_se + 0.01 * e.h


def test_black_scholes_call_error_decreases(bs_pair):
    est = mc.estimate_error(bs_pair, payoffs.call(1.0), "delta", [4, 8, 16, 32, 64], SimConfig(n_paths=20_000, seed=6, m=8))
    assert all(e.mean_sq > 0 and e.std_err > 0 for e in est)
    for a, b in zip(est, est[1:]):
        assert b.mean_sq <= a.mean_sq + 2 * math.hypot(a.std_err, b.std_err)


def test_linear_payoff_has_no_error(merton_pair):
    eps = mc.run_paths(merton_pair.p_model, [ConstantSource(1.0)], [4, 8, 16], 128, SimConfig(n_paths=2000, m=8))
    assert np.all(eps == 0.0)


def test_common_random_numbers_reduce_difference_variance(bs_pair):
    _, eps = mc.estimate_errors(
        bs_pair, payoffs.call(1.0), ["delta"], [16, 32], SimConfig(n_paths=20_000, seed=7, m=8), return_samples=True
    )
    e16, e32 = eps[0, 0], eps[0, 1]
    paired = np.var(e16 - e32)
    independent = np.var(e16) + np.var(e32)
    assert paired < independent


def _synthetic(c, beta, noise=None):
    hs = 1.0 / np.array([4, 8, 16, 32, 64, 128])
    out = []
    for i, h in enumerate(hs):
        v = c * h**beta * (1.0 if noise is None else 1.0 + noise[i])
        out.append(ErrorEstimate(int(round(1 / h)), h, v, 0.01 * v, 100_000))
    return out


def test_rate_fit_exact_power_law():
    f = mc.rate_fit(_synthetic(2.5, 1.0))
    assert f.slope == pytest.approx(1.0, abs=1e-12)
    assert f.intercept == pytest.approx(math.log(2.5), abs=1e-12)
    assert f.r_squared == pytest.approx(1.0, abs=1e-12)


def test_rate_fit_with_noise(rng):
    f = mc.rate_fit(_synthetic(0.3, 1 / 3, 0.01 * rng.standard_normal(6)))
    assert abs(f.slope - 1 / 3) < 0.02
    assert f.slope_ci[0] < f.slope < f.slope_ci[1]


def test_rate_fit_with_fine_grid_proxy():
    hs = 1.0 / np.array([4, 8, 16, 32, 64])
    hf = 1.0 / 2048
    est = [ErrorEstimate(int(round(1 / h)), h, 0.2 * (h**0.4 - hf**0.4), 1e-6, 1000) for h in hs]
    f = mc.rate_fit(est, h_fine=hf)
    assert f.method == "wls-proxy"
    assert f.slope == pytest.approx(0.4, abs=1e-8)
    # the plain fit overstates the exponent when the proxy bias is ignored
    assert mc.rate_fit(est).slope > 0.4


def test_rate_fit_refuses_weak_signal():
    est = _synthetic(1.0, 1.0)
    noisy = est[:3] + [ErrorEstimate(e.n, e.h, e.mean_sq, e.mean_sq, e.n_paths) for e in est[3:]]
    with pytest.raises(mc.SignalError, match="n=32"):
        mc.rate_fit(noisy)
    with pytest.raises(mc.SignalError, match="at least 4"):
        mc.rate_fit(est[:3])
    assert mc.rate_fit(noisy, check_signal=False).slope == pytest.approx(1.0, abs=1e-12)


def test_black_scholes_digital_strategies_coincide(bs_pair):
    res = mc.estimate_errors(bs_pair, payoffs.digital(1.0), ["delta", "quadratic"], [8, 32], SimConfig(n_paths=20_000, seed=8, m=8))
    for d, q in zip(res["delta"], res["quadratic"]):
        assert abs(q.mean_sq / d.mean_sq - 1.0) < 2 * d.std_err / d.mean_sq


def test_merton_digital_quadratic_beats_delta(merton_pair):
    res = mc.estimate_errors(merton_pair, payoffs.digital(1.0), ["delta", "quadratic"], [64], SimConfig(n_paths=20_000, seed=9, m=8))
    assert res["quadratic"][0].mean_sq < res["delta"][0].mean_sq


def test_eps_coupling_shares_draws():
    m = levy.cgmy(0.5, 5.0, 10.0, 1.5)
    coarse = mc.simulate_increments(m, 0.01, 2, SimConfig(n_paths=5000, seed=10, eps=2e-3, eps_coupling=1e-3))
    fine = mc.simulate_increments(m, 0.01, 2, SimConfig(n_paths=5000, seed=10, eps=1e-3, eps_coupling=1e-3))
    other = mc.simulate_increments(m, 0.01, 2, SimConfig(n_paths=5000, seed=11, eps=1e-3))
    # only jumps in [1e-3, 2e-3) and their Gaussian substitute differ
    assert np.std(coarse - fine) < 0.25 * np.std(other - fine)
    assert np.corrcoef(coarse[:, 0], fine[:, 0])[0, 1] > 0.95


def test_small_jump_cutoff_sensitivity(cgmy15_pair):
    out = []
    for eps in (2e-3, 1e-3):
        cfg = SimConfig(n_paths=10_000, seed=11, m=8, eps=eps, eps_coupling=1e-3)
        out.append(mc.estimate_error(cgmy15_pair, payoffs.call(1.0), "delta", [16], cfg)[0])
    assert abs(out[0].mean_sq - out[1].mean_sq) < out[1].std_err
