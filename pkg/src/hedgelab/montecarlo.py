"""Monte Carlo estimation of the discrete hedging error.

Paths of X are simulated under P on a uniform fine grid with step
h_f = T/(m * max(n_list)).  For every rebalancing count n the error

    eps_n = sum_j (F(t_j, S_j) - F(eta_n(t_j), S_{eta_n(t_j)})) (S_{j+1} - S_j)

is accumulated along the same paths (common random numbers), where eta_n
maps a fine date to the last rebalancing date of the n-grid.  Strategies
come from FFT slices, one per fine date, shared by all paths.

Paths are split into fixed-size blocks; block b draws from
SeedSequence(seed, spawn_key=(b,)), so results do not depend on the number
of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize, special, stats

from .fourier import StrategySurface, interp_uniform, strategy_kind
from .levy import (
    CGMYJumps, KouJumps, MertonJumps, NIGJumps, NoJumps, VGJumps,
)

BLOCK_SIZE = 4096


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    seed: int = 0
    m: int = 32
    eps: float = 1e-3
    gaussian_refinement: bool = True
    grid_points: int = 2**15
    grid_length: float = 16.0
    chunk: int = 32
    # arrivals are drawn above min(eps, eps_coupling) and jumps below eps are
    # dropped: runs with different eps but equal eps_coupling share all draws
    eps_coupling: float | None = None

    def __post_init__(self):
        if self.m < 8:
            raise ValueError("fine factor m must be >= 8")
        if not self.eps > 0:
            raise ValueError("small-jump cutoff eps must be positive")
        if self.eps_coupling is not None and not self.eps_coupling > 0:
            raise ValueError("eps_coupling must be positive")
        if self.n_paths < 1000:
            raise ValueError("n_paths must be >= 1000")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class ErrorEstimate:
    n: int
    h: float
    mean_sq: float
    std_err: float
    n_paths: int
    mean: float = 0.0
    mean_se: float = 0.0


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_ci: tuple
    r_squared: float
    method: str = "wls"
    h_fine: float | None = None


class SignalError(ValueError):
    pass


def block_rng(seed, block):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _blocks(n_paths):
    sizes = [BLOCK_SIZE] * (n_paths // BLOCK_SIZE)
    if n_paths % BLOCK_SIZE:
        sizes.append(n_paths % BLOCK_SIZE)
    return sizes


def default_threads():
    import os

    env = os.environ.get("HEDGELAB_THREADS")
    if env:
        return max(1, int(env))
    return 1


# ---------------------------------------------------------------------------
# increments


class IncrementSampler:
    """One-step sampler of X_{t+dt} - X_t.

    Diffusion, compound Poisson, bilateral gamma (VG) and NIG increments are
    exact.  CGMY with Y > 0 keeps jumps above eps as a compound Poisson
    process and replaces the compensated small jumps by a Gaussian of the
    same variance (or drops them when gaussian_refinement is False).
    """

    def __init__(self, model, dt, eps=1e-3, gaussian_refinement=True, eps_coupling=None):
        self.model = model
        self.dt = dt
        j = model.jumps
        base = model.gamma + model.big_jump_mean
        var = model.a**2
        self.kind = "none"
        if isinstance(j, NoJumps):
            drift = base
        elif isinstance(j, MertonJumps):
            self.kind = "merton"
            drift = base - j.lam * j.mean
        elif isinstance(j, KouJumps):
            self.kind = "kou"
            drift = base - j.lam * (j.p / j.eta_up - (1 - j.p) / j.eta_down)
        elif isinstance(j, VGJumps) or (isinstance(j, CGMYJumps) and j.Y == 0):
            self.kind = "bigamma"
            drift = base - j.C * (1 / j.M - 1 / j.G)
        elif isinstance(j, NIGJumps):
            self.kind = "nig"
            self.g0 = math.sqrt(j.alpha**2 - j.beta**2)
            drift = base - j.delta * j.beta / self.g0
        elif isinstance(j, CGMYJumps):
            self.kind = "ar"
            self._setup_ar(j, eps, eps if eps_coupling is None else min(eps, eps_coupling))
            drift = base - self.big_mean
            if gaussian_refinement:
                var += self.small_var
        else:
            raise TypeError(f"no sampler for {type(j).__name__}")
        self.drift = drift
        self.sd = math.sqrt(var * dt)

    def _setup_ar(self, j, eps, eps_draw):
        C, G, M, Y = j.C, j.G, j.M, j.Y
        self.eps = eps
        self.drop_small = eps_draw < eps
        # small-jump variance: C int_0^eps x^{1-Y} (e^{-Mx} + e^{-Gx}) dx
        g2 = special.gamma(2 - Y)
        self.small_var = C * g2 * (M ** (Y - 2) * special.gammainc(2 - Y, M * eps) + G ** (Y - 2) * special.gammainc(2 - Y, G * eps))
        self.sides = []
        big_mean = 0.0
        for rate, sign in ((M, 1.0), (G, -1.0)):
            x_max = eps_draw + 60.0 / rate
            lx = np.linspace(math.log(eps_draw), math.log(x_max), 6001)
            xs = np.exp(lx)
            # tail T(x) = C int_x^inf e^{-rate y} y^{-1-Y} dy via log-variable Simpson panels
            dens = C * np.exp(-rate * xs) * xs ** (-Y)
            seg = (lx[1] - lx[0]) / 6 * (dens[:-1] + 4 * C * np.exp(-rate * np.exp(0.5 * (lx[:-1] + lx[1:]))) * np.exp(0.5 * (lx[:-1] + lx[1:])) ** (-Y) + dens[1:])
            tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
            lam = tail[0]
            keep = tail > lam * 1e-15
            self.sides.append((sign, lam, np.log(tail[keep][::-1]), lx[keep][::-1]))
            mean = integrate.quad(lambda y: y * C * math.exp(-rate * y) * y ** (-1 - Y), eps, np.inf, limit=200, epsrel=1e-12)[0]
            big_mean += sign * mean
        self.big_mean = big_mean
        self.lam_up = self.sides[0][1]
        self.lam_dn = self.sides[1][1]
        self.lam = self.lam_up + self.lam_dn
        # one uniform table in the key log(tail) (+ offset for the negative side)
        (_, lam_u, lt_u, lx_u), (_, lam_d, lt_d, lx_d) = self.sides
        self.offset = lt_u[-1] - lt_d[0] + 1.0
        lo = lt_u[0]
        hi = lt_d[-1] + self.offset
        n_tab = 2**16
        keys = np.linspace(lo, hi, n_tab)
        x_up = np.exp(np.interp(keys, lt_u, lx_u))
        x_dn = -np.exp(np.interp(keys - self.offset, lt_d, lx_d))
        self.table = np.where(keys <= lt_u[-1] + 0.5, x_up, x_dn)
        self.key0 = lo
        self.inv_dk = (n_tab - 1) / (hi - lo)
        self.p_up = self.lam_up / self.lam

    def _ar_jumps(self, rng, n):
        counts = rng.poisson(self.lam * self.dt, n)
        total = int(counts.sum())
        if total == 0:
            return np.zeros(n)
        u = rng.random(total)
        dn = u >= self.p_up
        # tail level: u*lam on the positive side, (u - p_up)*lam on the negative side
        key = np.log((u - dn * self.p_up) * self.lam + 1e-300) + dn * self.offset
        pos = (key - self.key0) * self.inv_dk
        np.clip(pos, 0.0, self.table.size - 1.000001, out=pos)
        i = pos.astype(np.int64)
        frac = pos - i
        tab = self.table
        sizes = tab[i] + frac * (tab[i + 1] - tab[i])
        if self.drop_small:
            sizes[np.abs(sizes) < self.eps] = 0.0
        cs = np.empty(total + 1)
        cs[0] = 0.0
        np.cumsum(sizes, out=cs[1:])
        ends = np.cumsum(counts)
        return cs[ends] - cs[ends - counts]

    def draw(self, rng, n):
        dt = self.dt
        dx = self.drift * dt + self.sd * rng.standard_normal(n)
        j = self.model.jumps
        if self.kind == "merton":
            k = rng.poisson(j.lam * dt, n)
            dx += k * j.mean + j.std * np.sqrt(k) * rng.standard_normal(n)
        elif self.kind == "kou":
            k = rng.poisson(j.lam * dt, n)
            ku = rng.binomial(k, j.p)
            kd = k - ku
            dx += rng.gamma(np.maximum(ku, 1), 1 / j.eta_up) * (ku > 0)
            dx -= rng.gamma(np.maximum(kd, 1), 1 / j.eta_down) * (kd > 0)
        elif self.kind == "bigamma":
            dx += rng.gamma(j.C * dt, 1 / j.M, n) - rng.gamma(j.C * dt, 1 / j.G, n)
        elif self.kind == "nig":
            mu = j.delta * dt / self.g0
            ig = rng.wald(mu, (j.delta * dt) ** 2, n)
            dx += j.beta * ig + np.sqrt(ig) * rng.standard_normal(n)
        elif self.kind == "ar":
            dx += self._ar_jumps(rng, n)
        return dx


def simulate_increments(model, dt, n_steps, config, seed=None):
    """Increments of X under the model, shape (n_paths, n_steps)."""
    seed = config.seed if seed is None else seed
    sampler = IncrementSampler(model, dt, config.eps, config.gaussian_refinement, config.eps_coupling)
    out = []
    for b, nb in enumerate(_blocks(config.n_paths)):
        rng = block_rng(seed, b)
        out.append(np.stack([sampler.draw(rng, nb) for _ in range(n_steps)], axis=1))
    return np.concatenate(out, axis=0)


# ---------------------------------------------------------------------------
# strategy sources


class SurfaceSource:
    def __init__(self, surface, T):
        self.surface = surface
        self.T = T

    def at(self, t):
        s = self.surface
        vals = s.slice(self.T - t)
        return lambda x: interp_uniform(vals, s.x0, s.dx, x)


class TableSource:
    def __init__(self, table):
        self.table = table

    def at(self, t):
        tab = self.table
        return lambda x: tab(np.full_like(x, t), x)


class ConstantSource:
    def __init__(self, value=1.0):
        self.value = value

    def at(self, t):
        return lambda x: np.full_like(x, self.value)


def _as_source(obj, T):
    if isinstance(obj, (SurfaceSource, TableSource, ConstantSource)):
        return obj
    if isinstance(obj, StrategySurface):
        return SurfaceSource(obj, T)
    if callable(obj) and hasattr(obj, "times"):
        return TableSource(obj)
    raise TypeError(f"cannot use {type(obj).__name__} as a strategy source")


# ---------------------------------------------------------------------------
# simulation core


class _Block:
    def __init__(self, index, size, seed, sampler, n_sources, strides, S0):
        self.rng = block_rng(seed, index)
        self.size = size
        self.sampler = sampler
        self.strides = strides
        self.x = np.full(size, math.log(S0))
        self.S = np.full(size, S0)
        k = len(strides)
        self.eps = np.zeros((n_sources, k, size))
        self.held = np.zeros((n_sources, k, size))

    def advance(self, j0, fns):
        for off, step_fns in enumerate(fns):
            j = j0 + off
            F = np.stack([f(self.x) for f in step_fns])
            for k, stride in enumerate(self.strides):
                if j % stride == 0:
                    self.held[:, k, :] = F
            dx = self.sampler.draw(self.rng, self.size)
            x_new = self.x + dx
            S_new = np.exp(x_new)
            dS = S_new - self.S
            self.eps += (F[:, None, :] - self.held) * dS
            self.x = x_new
            self.S = S_new


def run_paths(model_p, sources, n_list, n_fine, config, T=1.0, S0=1.0, threads=None):
    """Hedging-error samples, shape (n_sources, len(n_list), n_paths)."""
    n_list = [int(n) for n in n_list]
    for n in n_list:
        if n_fine % n:
            raise ValueError(f"rebalancing count {n} does not divide the fine grid ({n_fine} steps)")
    strides = [n_fine // n for n in n_list]
    dt = T / n_fine
    sampler = IncrementSampler(model_p, dt, config.eps, config.gaussian_refinement, config.eps_coupling)
    srcs = [_as_source(s, T) for s in sources]
    blocks = [_Block(b, nb, config.seed, sampler, len(srcs), strides, S0) for b, nb in enumerate(_blocks(config.n_paths))]
    threads = default_threads() if threads is None else max(1, int(threads))
    with ThreadPoolExecutor(max_workers=threads) as ex:
        for j0 in range(0, n_fine, config.chunk):
            j1 = min(n_fine, j0 + config.chunk)
            fns = [[src.at(j * dt) for src in srcs] for j in range(j0, j1)]
            list(ex.map(lambda blk: blk.advance(j0, fns), blocks))
    return np.concatenate([b.eps for b in blocks], axis=2)


def _estimate(eps, n, T):
    sq = eps * eps
    N = eps.size
    mean_sq = math.fsum(sq) / N
    var = math.fsum((sq - mean_sq) ** 2) / (N - 1)
    mean = math.fsum(eps) / N
    var1 = math.fsum((eps - mean) ** 2) / (N - 1)
    return ErrorEstimate(int(n), T / n, mean_sq, math.sqrt(var / N), N, mean, math.sqrt(var1 / N))


def fine_steps(n_list, m):
    return int(m * max(n_list))


def estimate_errors(pair, payoff, strategies, n_list, config, T=1.0, S0=1.0, threads=None, R=None, return_samples=False):
    """ErrorEstimates per strategy on shared paths; dict keyed by strategy name."""
    n_list = sorted(int(n) for n in n_list)
    strategies = [strategy_kind(s) for s in strategies]
    n_fine = fine_steps(n_list, config.m)
    surfaces = [
        StrategySurface(pair, payoff, s, R=R, n_grid=config.grid_points, length=config.grid_length)
        for s in strategies
    ]
    eps = run_paths(pair.p_model, surfaces, n_list, n_fine, config, T, S0, threads)
    out = {}
    for i, s in enumerate(strategies):
        out[str(s)] = [_estimate(eps[i, k], n, T) for k, n in enumerate(n_list)]
    if return_samples:
        return out, eps
    return out


def estimate_error(pair, payoff, strategy, n_list, config, T=1.0, S0=1.0, threads=None, R=None):
    """ErrorEstimate per n for one strategy."""
    return estimate_errors(pair, payoff, [strategy], n_list, config, T, S0, threads, R)[str(strategy_kind(strategy))]


def discretization_error(pair, payoff, strategy_table, n, config, n_fine=None, T=1.0, S0=1.0, threads=None):
    """Samples of the fine-grid hedging error for n rebalancing dates."""
    n_fine = n * config.m if n_fine is None else int(n_fine)
    return run_paths(pair.p_model, [strategy_table], [n], n_fine, config, T, S0, threads)[0, 0]


# ---------------------------------------------------------------------------
# rate fitting


def _check_signal(estimates):
    if len(estimates) < 4:
        raise SignalError("rate fit needs at least 4 estimates")
    bad = [e for e in estimates if not e.mean_sq > 3 * e.std_err]
    if bad:
        diag = ", ".join(f"n={e.n}: mean_sq={e.mean_sq:.3g} se={e.std_err:.3g}" for e in bad)
        raise SignalError(f"insufficient signal-to-noise (mean_sq <= 3 se): {diag}")


def rate_fit(estimates, h_fine=None, level=0.95, check_signal=True):
    """Fit mean_sq = c h^beta by weighted least squares in log-log coordinates.

    Weights are inverse relative variances (se/mean_sq)^2.  With ``h_fine``
    the model c (h^beta - h_fine^beta) is fitted instead: it is the expectation
    of the fine-grid proxy when the exact error behaves like c h^beta.
    ``check_signal=False`` fits even when mean_sq is not resolved from noise
    (heavy-tailed errors); the interval then reflects the scatter only.
    """
    if check_signal:
        _check_signal(estimates)
    elif len(estimates) < 3:
        raise SignalError("rate fit needs at least 3 estimates")
    h = np.array([e.h for e in estimates])
    y = np.log([e.mean_sq for e in estimates])
    w = 1.0 / np.array([(e.std_err / e.mean_sq) ** 2 for e in estimates])
    x = np.log(h)
    dof = len(h) - 2
    tq = stats.t.ppf(0.5 + level / 2, dof) if dof > 0 else math.inf
    if h_fine is None:
        X = np.column_stack([np.ones_like(x), x])
        W = np.diag(w)
        cov_u = np.linalg.inv(X.T @ W @ X)
        b = cov_u @ X.T @ W @ y
        resid = y - X @ b
        s2 = float(resid @ W @ resid) / dof if dof > 0 else 0.0
        se = math.sqrt(cov_u[1, 1] * max(s2, 1.0))
        slope, intercept = float(b[1]), float(b[0])
        method = "wls"
    else:
        if np.any(h <= h_fine):
            raise ValueError("all rebalancing steps must exceed the fine step")
        sw = np.sqrt(w)

        def res(p):
            return sw * (y - p[0] - np.log(h ** p[1] - h_fine ** p[1]))

        b0 = np.average(y - x, weights=w)
        sol = optimize.least_squares(res, x0=[b0, 1.0], bounds=([-np.inf, 1e-3], [np.inf, 5.0]), xtol=1e-14, ftol=1e-14)
        J = sol.jac
        cov_u = np.linalg.inv(J.T @ J)
        resid = sol.fun
        s2 = float(resid @ resid) / dof if dof > 0 else 0.0
        se = math.sqrt(cov_u[1, 1] * max(s2, 1.0))
        intercept, slope = float(sol.x[0]), float(sol.x[1])
        resid = y - intercept - np.log(h**slope - h_fine**slope)
        method = "wls-proxy"
    ybar = np.average(y, weights=w)
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    if h_fine is None:
        ss_res = float(np.sum(w * (y - intercept - slope * x) ** 2))
    else:
        ss_res = float(np.sum(w * resid**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(slope, intercept, (slope - tq * se, slope + tq * se), r2, method, h_fine)
