"""Fourier representations of prices, hedging strategies and densities.

All strip integrals have the form

    (1/2pi) int_{R + iR} g_hat(u) m(u) phi_bar_tau(-u) S^{-iu-k} du

with multiplier ``m`` (1 for prices, -iu for delta, Upsilon for quadratic
hedging) and ``k`` = 0 for prices, 1 for strategies.  Writing u = v + iR and
pulling the strike phase out of g_hat the integrand becomes
``e^{(R-k)x} H(v) e^{-iv(x - log K)}`` with a non-oscillating ``H``; the
conjugate symmetry ``H(-v) = conj H(v)`` folds the line integral onto v >= 0.

Pointwise values use adaptive QUADPACK rules (QAWO for oscillatory ranges).
Bulk evaluation on log-price grids goes through a single FFT per time slice.
"""
from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .levy import DecayEnvelope, EnvelopeError, LevyModel, MarketPair, decay_envelope
from .payoffs import admissible_strip


class StrategyKind(str, enum.Enum):
    DELTA = "delta"
    QUADRATIC = "quadratic"

    def __str__(self):
        return self.value


def strategy_kind(s):
    return s if isinstance(s, StrategyKind) else StrategyKind(str(s).lower())


class IntegrabilityError(ValueError):
    """The Fourier integrand is not absolutely integrable for this configuration."""


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000
    u_cap: float = 1e8


DEFAULT_QUAD = QuadratureSpec()


def upsilon(q_model, u, R=0.0):
    """Quadratic-hedging multiplier at u + iR."""
    z = np.asarray(u, dtype=float) + 1j * R
    A_bar = (q_model.psi(-2j) - 2 * q_model.psi(-1j)).real
    val = (q_model.psi(-z - 1j) - q_model.psi(-z) - q_model.psi(-1j)) / A_bar
    return val if np.ndim(val) else complex(val)


def _multiplier(strategy, q_model, R):
    if strategy is None:
        return lambda v: np.ones_like(np.asarray(v, dtype=float), dtype=complex)
    s = strategy_kind(strategy)
    if s is StrategyKind.DELTA:
        return lambda v: -1j * (np.asarray(v, dtype=float) + 1j * R)
    return lambda v: upsilon(q_model, v, R)


def _mult_growth(strategy, q_model):
    """Polynomial growth exponent of |m(v)| at infinity."""
    if strategy is None:
        return 0.0
    if strategy_kind(strategy) is StrategyKind.DELTA:
        return 1.0
    if q_model.a > 0:
        return 1.0
    alpha = q_model.bg_index
    return max(alpha - 1.0, 0.0)


def _integrand_factory(pair, payoff, strategy, tau, R):
    q = pair.q_model
    mult = _multiplier(strategy, q, R)

    def H(v):
        v = np.asarray(v, dtype=float)
        return payoff.g_hat_unit(v, R) * mult(v) * np.exp(tau * q.psi(-v - 1j * R))

    return H


def _check_integrable(env, tau, growth):
    """Absolute integrability of (1+v)^growth |phi_tau| for the envelope class."""
    if env.kind == "exponential":
        return True
    return growth - env.c * tau < -1.0


def _payoff_growth(payoff):
    return -1.0 if payoff.kind == "digital" else -2.0


def _truncation(H, tol, cap):
    """Smallest U on a geometric grid beyond which |H(v)| * v stays below tol."""
    grid = np.concatenate([[0.0], np.logspace(-3, math.log10(cap), 1200)])
    vals = np.abs(H(grid)) * np.maximum(grid, 1.0)
    big = np.nonzero(vals > tol)[0]
    if big.size == 0:
        return 1.0, True
    last = big[-1]
    if last == grid.size - 1:
        return cap, False
    return float(grid[last + 1]), True


def _fourier_integral(H, omega, quad, tail_ok_oscillatory=True):
    """(1/pi) Re int_0^inf H(v) e^{-i v omega} dv."""
    U, converged = _truncation(H, quad.abs_tol, quad.u_cap)
    fr = lambda v: H(v).real
    fi = lambda v: H(v).imag
    kw = dict(epsabs=quad.abs_tol, epsrel=quad.rel_tol, limit=quad.max_subdivisions)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if abs(omega) * U < 50.0:
                f = lambda v: (H(v) * np.exp(-1j * v * omega)).real
                val = _split_quad(f, U, kw)
            else:
                val = integrate.quad(fr, 0.0, U, weight="cos", wvar=omega, **kw)[0]
                val += integrate.quad(fi, 0.0, U, weight="sin", wvar=omega, **kw)[0]
            if not converged:
                if omega == 0.0 or not tail_ok_oscillatory:
                    raise IntegrabilityError("integrand does not decay fast enough for truncation")
                # Fourier tail on [U, inf) by QAWF
                val += integrate.quad(lambda v: fr(v + U), 0.0, np.inf, weight="cos", wvar=omega, limlst=200)[0] * math.cos(omega * U)
                val -= integrate.quad(lambda v: fr(v + U), 0.0, np.inf, weight="sin", wvar=omega, limlst=200)[0] * math.sin(omega * U)
                val += integrate.quad(lambda v: fi(v + U), 0.0, np.inf, weight="sin", wvar=omega, limlst=200)[0] * math.cos(omega * U)
                val += integrate.quad(lambda v: fi(v + U), 0.0, np.inf, weight="cos", wvar=omega, limlst=200)[0] * math.sin(omega * U)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature did not converge: {exc}") from None
    return val / math.pi


def _split_quad(f, U, kw):
    # geometric panels keep the peak near the origin well resolved
    edges = [0.0]
    e = min(1.0, U)
    while e < U:
        edges.append(e)
        e *= 8.0
    edges.append(U)
    return math.fsum(integrate.quad(f, a, b, **kw)[0] for a, b in zip(edges[:-1], edges[1:]))


def _resolve_R(pair, payoff, strategy, R):
    if R is not None:
        return float(R)
    if payoff.r_default is not None:
        return payoff.r_default
    return admissible_strip(payoff, pair, strategy or "delta")


def _strip_value(pair, payoff, strategy, tau, S, R, quad):
    if tau <= 0:
        raise ValueError("time to maturity T - t must be positive")
    if not S > 0:
        raise ValueError("S must be positive")
    R = _resolve_R(pair, payoff, strategy, R)
    payoff._check(R)
    try:
        env = decay_envelope(pair.q_model)
    except EnvelopeError:
        env = None
    growth = _payoff_growth(payoff) + _mult_growth(strategy, pair.q_model)
    if env is None:
        if growth >= -1.0:
            raise IntegrabilityError(
                f"{pair.q_model.family} model without diffusion: characteristic function does not decay "
                f"and the payoff transform is not integrable"
            )
    elif not _check_integrable(env, tau, growth):
        raise IntegrabilityError(
            f"power-law decay |phi_tau| ~ |u|^(-{env.c * tau:.4g}) too weak for this "
            f"{payoff.kind}/{strategy or 'price'} integrand at tau={tau:g}"
        )
    H = _integrand_factory(pair, payoff, strategy, tau, R)
    x = math.log(S)
    omega = x - math.log(payoff.K)
    k = 0 if strategy is None else 1
    return math.exp((R - k) * x) * _fourier_integral(H, omega, quad)


def price(pair, payoff, t, S, R=None, quad=DEFAULT_QUAD, T=1.0):
    """Option value C(t, S) at maturity T."""
    return _strip_value(pair, payoff, None, T - t, S, R, quad)


def delta_strategy(pair, payoff, t, S, R=None, quad=DEFAULT_QUAD, T=1.0):
    """dC/dS."""
    return _strip_value(pair, payoff, StrategyKind.DELTA, T - t, S, R, quad)


def quad_strategy(pair, payoff, t, S, R=None, quad=DEFAULT_QUAD, T=1.0):
    """Kunita-Watanabe ratio d<C,S>/d<S,S> under Q."""
    return _strip_value(pair, payoff, StrategyKind.QUADRATIC, T - t, S, R, quad)


def strategy_value(pair, payoff, strategy, t, S, R=None, quad=DEFAULT_QUAD, T=1.0):
    return _strip_value(pair, payoff, strategy_kind(strategy), T - t, S, R, quad)


def imag_residue(pair, payoff, strategy, t, S, R=None, T=1.0, U=None):
    """Imaginary part of the unfolded strip integral over [-U, U]."""
    R = _resolve_R(pair, payoff, strategy, R)
    tau = T - t
    H = _integrand_factory(pair, payoff, strategy, tau, R)
    omega = math.log(S) - math.log(payoff.K)
    if U is None:
        U, _ = _truncation(H, 1e-14, 1e7)
    f = lambda v: (H(v) * np.exp(-1j * v * omega) + H(-v) * np.exp(1j * v * omega)).imag
    val = _split_quad(f, U, dict(epsabs=1e-14, epsrel=1e-10, limit=2000))
    k = 0 if strategy is None else 1
    return math.exp((R - k) * math.log(S)) * val / (2 * math.pi)


def density(model, T, x, quad=DEFAULT_QUAD):
    """Density of X_T at x (X_0 = 0)."""
    if T <= 0:
        raise ValueError("T must be positive")
    env = decay_envelope(model)
    if env.kind == "power" and env.c * T <= 1.0:
        raise IntegrabilityError(
            f"|phi_T| ~ |u|^(-{env.c * T:.4g}) is not integrable; density not available by inversion"
        )

    def H(v):
        return np.exp(T * model.psi(np.asarray(v, dtype=float)))

    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.array([_fourier_integral(H, xi, quad) for xi in xs])
    if np.any(out < -1e-10):
        raise QuadratureError(f"negative density value {out.min():.3g}")
    out = np.maximum(out, 0.0)
    return out if np.ndim(x) else float(out[0])


# ---------------------------------------------------------------------------
# FFT slices


@dataclass
class StrategySurface:
    """F(t, e^x) on a uniform log-price grid, one FFT per time-to-maturity.

    Grid: x_j = center + (j - N/2) dx, dx = length/N, frequencies v_k = k dv
    with dv = 2 pi / length.  Slices whose spectrum has not decayed at the
    last frequency get an exponential filter exp(-36 (v/U)^12); this is
    reported through ``filtered(tau)``.
    """

    pair: MarketPair
    payoff: object
    strategy: object = "delta"
    R: float | None = None
    n_grid: int = 2**16
    length: float = 32.0
    center: float | None = None
    filter_tol: float = 1e-9

    def __post_init__(self):
        self.kind = None if self.strategy is None else strategy_kind(self.strategy)
        self.R = _resolve_R(self.pair, self.payoff, self.kind, self.R)
        self.payoff._check(self.R)
        if self.center is None:
            self.center = math.log(self.payoff.K)
        N, L = self.n_grid, self.length
        if N % 2:
            raise ValueError("n_grid must be even")
        self.dx = L / N
        self.dv = 2 * math.pi / L
        self.x = self.center + (np.arange(N) - N // 2) * self.dx
        self.x0 = float(self.x[0])
        v = np.arange(N) * self.dv
        self.v = v
        q = self.pair.q_model
        mult = _multiplier(self.kind, q, self.R)
        w = np.full(N, self.dv / math.pi)
        w[0] *= 0.5
        phase = np.exp(-1j * v * (self.center - math.log(self.payoff.K)))
        sign = np.where(np.arange(N) % 2, -1.0, 1.0)
        self._base = w * sign * phase * self.payoff.g_hat_unit(v, self.R) * mult(v)
        self._psi = q.psi(-v - 1j * self.R)
        k = 0 if self.kind is None else 1
        self._damp = np.exp((self.R - k) * self.x)
        self._filter = np.exp(-36.0 * (v / v[-1]) ** 12)
        self._tail = slice(int(0.9 * N), N)

    def _coeffs(self, tau):
        c = self._base * np.exp(tau * self._psi)
        scale = np.max(np.abs(c))
        flag = np.max(np.abs(c[self._tail])) > self.filter_tol * scale
        if flag:
            c = c * self._filter
        return c, flag

    def filtered(self, tau):
        return bool(self._coeffs(tau)[1])

    def slice(self, tau):
        if tau <= 0:
            raise ValueError("time to maturity must be positive")
        c, _ = self._coeffs(tau)
        return self._damp * np.fft.fft(c).real

    def evaluate(self, tau, xq, values=None):
        """Cubic (4-point Lagrange) interpolation of a slice at log prices xq."""
        if values is None:
            values = self.slice(tau)
        return interp_uniform(values, self.x0, self.dx, xq)


def interp_uniform(values, x0, dx, xq):
    """4-point Lagrange interpolation on a uniform grid; exact at nodes."""
    xq = np.asarray(xq, dtype=float)
    n = values.shape[-1]
    s = (xq - x0) / dx
    i = np.clip(np.floor(s).astype(np.int64), 1, n - 3)
    t = s - i
    p0 = values[i - 1]
    p1 = values[i]
    p2 = values[i + 1]
    p3 = values[i + 2]
    tm1 = t - 1.0
    tm2 = t - 2.0
    tp1 = t + 1.0
    return (
        -p0 * t * tm1 * tm2 / 6.0
        + p1 * tp1 * tm1 * tm2 / 2.0
        - p2 * tp1 * t * tm2 / 2.0
        + p3 * tp1 * t * tm1 / 6.0
    )


@dataclass(frozen=True)
class StrategyTable:
    """F on a (time, log-price) grid with bicubic spline interpolation."""

    times: np.ndarray
    x: np.ndarray
    values: np.ndarray
    order: int = 3
    filtered: tuple = ()
    _spline: object = field(default=None, repr=False, compare=False)

    def __call__(self, t, x):
        spl = self._spline
        if spl is None:
            spl = RectBivariateSpline(self.times, self.x, self.values, kx=self.order, ky=self.order, s=0)
            object.__setattr__(self, "_spline", spl)
        return spl(t, x, grid=False)


def build_strategy_table(pair, payoff, strategy, times, x_grid, T=1.0, R=None, threads=1, surface=None):
    """Strategy values on times x x_grid (times strictly before T)."""
    times = np.asarray(times, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    if np.any(times >= T) or np.any(np.diff(times) <= 0):
        raise ValueError("times must be increasing and strictly before T")
    if np.any(np.diff(x_grid) <= 0):
        raise ValueError("log-price grid must be increasing")
    if surface is None:
        surface = StrategySurface(pair, payoff, strategy, R=R)
    if x_grid[0] < surface.x[2] or x_grid[-1] > surface.x[-3]:
        raise ValueError("log-price grid exceeds the FFT grid")

    def row(t):
        vals = surface.slice(T - t)
        return CubicSpline(surface.x, vals)(x_grid), surface.filtered(T - t)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        rows = list(ex.map(row, times))
    values = np.array([r[0] for r in rows])
    flagged = tuple(float(t) for t, r in zip(times, rows) if r[1])
    return StrategyTable(times, x_grid, values, 3, flagged)


def log_price_bounds(model, T, prob=1e-6, x0=0.0):
    """[x_min, x_max] with P(sup_t |X_t - x0| leaves it) < prob (Doob bound)."""
    lo, hi = model.moment_strip

    def side(w):
        kappa = model.psi(-1j * w).real
        return (T * max(kappa, 0.0) - math.log(prob / 2)) / abs(w)

    w_up = min(0.9 * hi, 20.0) if math.isfinite(hi) else 20.0
    w_dn = max(0.9 * lo, -20.0) if math.isfinite(lo) else -20.0
    return x0 - side(w_dn), x0 + side(w_up)
