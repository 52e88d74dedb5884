"""Limiting constants and rates of the discrete hedging error.

Shared kernel: r(y) = (1 - e^{-y} - y e^{-y}) / (y (1 - e^{-y})), r(0+) = 1/2.

    D       = int r(v^2) dv
    D_alpha = (2 Gamma(-alpha) cos(pi (2-alpha)/2))^{-1/alpha}   int r(|v|^alpha) dv
    Q_alpha = (2 Gamma(-alpha) cos(pi (2-alpha)/2))^{3/alpha-2}  int r(|v|^alpha) |v|^{2 alpha - 4} dv
"""
from __future__ import annotations

import cmath
import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np
from scipy import integrate, special

from .fourier import StrategyKind, density, strategy_kind, upsilon
from .levy import MarketPair, check_assumptions
from .payoffs import NoAdmissibleStrip, admissible_strip

_lock = threading.Lock()


def kernel_r(y):
    """r(y) with a series branch near zero."""
    y = np.asarray(y, dtype=float)
    small = y < 1e-3
    ys = np.where(small, y, 1.0)
    yb = np.where(small, 1.0, y)
    # both numerator and denominator carry a factor y^2
    num_s = 0.5 - ys / 3 + ys**2 / 8 - ys**3 / 30 + ys**4 / 144
    den_s = 1 - ys / 2 + ys**2 / 6 - ys**3 / 24 + ys**4 / 120
    em = np.exp(-yb)
    big = (-np.expm1(-yb) - yb * em) / (yb * -np.expm1(-yb))
    out = np.where(small, num_s / den_s, big)
    return out if out.ndim else float(out)


def _kernel_mp(y):
    if y < mpmath.mpf("1e-8"):
        return (0.5 - y / 3 + y**2 / 8) / (1 - y / 2 + y**2 / 6)
    e = mpmath.exp(-y)
    return (1 - e - y * e) / (y * (1 - e))


def gamma_neg(alpha):
    """Gamma(-alpha) by reflection: -pi / (sin(pi alpha) Gamma(1+alpha))."""
    return -math.pi / (math.sin(math.pi * alpha) * math.gamma(1 + alpha))


def _stable_scale(alpha):
    return 2 * gamma_neg(alpha) * math.cos(math.pi * (2 - alpha) / 2)


def _quad_scipy(f, lo, hi, **kw):
    return integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=500, **kw)[0]


# --- integrals by two schemes -------------------------------------------------


def _int_D_scipy():
    return 2 * _quad_scipy(lambda v: kernel_r(v * v), 0, np.inf)


def _int_D_mpmath(V=10):
    with mpmath.workdps(30):
        body = mpmath.quad(lambda v: _kernel_mp(v * v), [0, 1, V], method="tanh-sinh")
        # beyond V the kernel equals 1/v^2 up to e^{-V^2}
        return float(2 * (body + mpmath.mpf(1) / V))


def _int_Dalpha_scipy(alpha):
    f = lambda v: kernel_r(v**alpha)
    return 2 * (_quad_scipy(f, 0, 1) + _quad_scipy(f, 1, np.inf))


def _int_Dalpha_mpmath(alpha, V=30):
    a = mpmath.mpf(alpha)
    with mpmath.workdps(30):
        body = mpmath.quad(lambda v: _kernel_mp(v**a), [0, 1, V], method="tanh-sinh")
        tail = mpmath.mpf(V) ** (1 - a) / (a - 1)
        return float(2 * (body + tail))


def _int_Qalpha_scipy(alpha):
    # v = x^p with p = 1/(2 alpha - 3) removes the v^(2 alpha - 4) singularity on [0, 1]
    p = 1.0 / (2 * alpha - 3)
    head = p * _quad_scipy(lambda x: kernel_r(x ** (p * alpha)), 0, 1)
    tail = _quad_scipy(lambda v: kernel_r(v**alpha) * v ** (2 * alpha - 4), 1, np.inf)
    return 2 * (head + tail)


def _int_Qalpha_mpmath(alpha, V=30):
    a = mpmath.mpf(alpha)
    with mpmath.workdps(30):
        p = 1 / (2 * a - 3)
        head = p * mpmath.quad(lambda x: _kernel_mp(x ** (p * a)), [0, 0.5, 1], method="tanh-sinh")
        body = head + mpmath.quad(lambda v: _kernel_mp(v**a) * v ** (2 * a - 4), [1, V], method="tanh-sinh")
        tail = mpmath.mpf(V) ** (a - 3) / (3 - a)
        return float(2 * (body + tail))


@dataclass(frozen=True)
class DualValue:
    value: float
    primary: float
    secondary: float

    @property
    def rel_diff(self):
        return abs(self.primary - self.secondary) / abs(self.secondary)


@lru_cache(maxsize=None)
def _D_dual():
    return DualValue(_int_D_scipy(), _int_D_scipy(), _int_D_mpmath())


def constant_D(check=False):
    with _lock:
        d = _D_dual()
    return d if check else d.value


@lru_cache(maxsize=256)
def _Dalpha_dual(alpha):
    pre = _stable_scale(alpha) ** (-1 / alpha)
    p, s = _int_Dalpha_scipy(alpha), _int_Dalpha_mpmath(alpha)
    return DualValue(pre * p, pre * p, pre * s)


def constant_D_alpha(alpha, check=False):
    if not 1 < alpha < 2:
        raise ValueError("D_alpha requires alpha in (1,2)")
    with _lock:
        d = _Dalpha_dual(float(alpha))
    return d if check else d.value


@lru_cache(maxsize=256)
def _Qalpha_dual(alpha):
    pre = _stable_scale(alpha) ** (3 / alpha - 2)
    p, s = _int_Qalpha_scipy(alpha), _int_Qalpha_mpmath(alpha)
    return DualValue(pre * p, pre * p, pre * s)


def constant_Q_alpha(alpha, check=False):
    if not 1.5 < alpha < 2:
        raise ValueError("Q_alpha requires alpha in (3/2,2); alpha = 3/2 is a boundary case without a constant")
    with _lock:
        d = _Qalpha_dual(float(alpha))
    return d if check else d.value


# --- stable-like coefficients -------------------------------------------------


@dataclass(frozen=True)
class StableCoeffs:
    alpha: float
    c_plus: complex
    c_minus: complex
    gamma_plus: complex
    gamma_minus: complex
    psi_limit_error: tuple = ()


def stable_coeffs(model, verify_at=1e4, tol=0.02):
    """c_pm (psi ~ -c_pm |u|^alpha) and gamma_pm (Upsilon ~ gamma_pm |u|^{alpha-1} / A_bar)."""
    flags = model.assumption_flags
    if not flags["H4"]:
        raise ValueError(f"{model.family} model does not satisfy H4 (no stable-like small-jump density)")
    if model.a > 0:
        raise ValueError("stable coefficients are defined for a = 0 only")
    alpha = model.bg_index
    if not 1 < alpha < 2:
        raise ValueError("stable coefficients require alpha in (1,2)")
    fp, fm = model.f_plus, model.f_minus
    g = gamma_neg(alpha)
    e = lambda th: cmath.exp(1j * th)
    c_plus = -g * (fp * e(-math.pi * alpha / 2) + fm * e(math.pi * alpha / 2))
    c_minus = -g * (fp * e(math.pi * alpha / 2) + fm * e(-math.pi * alpha / 2))
    g1 = math.gamma(1 - alpha)
    th = math.pi * (1 - alpha) / 2
    gamma_plus = g1 * (fp * e(-th) - fm * e(th))
    gamma_minus = g1 * (fp * e(th) - fm * e(-th))
    errs = []
    for u, c in ((verify_at, c_plus), (-verify_at, c_minus)):
        # psi(2u) - 2 psi(u) cancels the drift, which is not negligible for alpha near 1
        lim = -(model.psi(2 * u) - 2 * model.psi(u)) / ((2**alpha - 2) * abs(u) ** alpha)
        err = abs(lim - c) / abs(c)
        errs.append(err)
        if err > tol:
            raise ArithmeticError(f"drift-free psi(u)/|u|^alpha at u={u:g} is {lim:.6g}, expected {c:.6g}")
    return StableCoeffs(alpha, c_plus, c_minus, gamma_plus, gamma_minus, tuple(errs))


# --- regular regime: two-dimensional integral --------------------------------

TWO_PI_POWER = 2


def _exprel_bracket(T, x, y):
    """(e^{T x} - e^{T y}) / (x - y), stable for x close to y."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=complex), np.asarray(y, dtype=complex))
    # factor out the dominant exponential so expm1 never overflows
    swap = x.real > y.real
    hi = np.where(swap, x, y)
    lo = np.where(swap, y, x)
    d = T * (lo - hi)
    small = np.abs(d) < 1e-6
    ds = np.where(small, 1.0, d)
    rel = np.where(small, 1 + d / 2 + d * d / 6, np.expm1(ds) / ds)
    out = T * np.exp(T * hi) * rel
    return out if out.ndim else complex(out)


def _regular_integrand(pair, payoff, strategy, T, R):
    p, q = pair.p_model, pair.q_model
    kind = strategy_kind(strategy)
    psi_2i = p.psi(-2j)

    def mult(u):
        if kind is StrategyKind.DELTA:
            return -1j * u
        return upsilon(q, u.real, u.imag)

    def f(s, d):
        # u1 = (s+d)/2 + iR, u2 = (s-d)/2 + iR
        v1 = 0.5 * (s + d)
        v2 = 0.5 * (s - d)
        u1 = v1 + 1j * R
        u2 = v2 + 1j * R
        x = p.psi(-u1 - u2)
        y = q.psi(-u1) + q.psi(-u2)
        combo = x - p.psi(-u1 - 1j) - p.psi(-u2 - 1j) + psi_2i
        g = payoff.g_hat(v1, R) * payoff.g_hat(v2, R)
        return g * mult(u1) * mult(u2) * combo * _exprel_bracket(T, x, y)

    return f


def regular_limit_raw(pair, payoff, strategy, T, R=None, epsrel=1e-9, fold=True):
    """int int over (R+iR)^2 of the regular-regime integrand (no prefactor)."""
    if R is None:
        R = admissible_strip(payoff, pair, strategy)
    f = _regular_integrand(pair, payoff, strategy, T, R)
    kw = dict(epsabs=1e-14, epsrel=epsrel, limit=400)

    def inner(s, lo, hi):
        return integrate.quad(lambda d: f(s, d).real, lo, hi, **kw)[0]

    # change of variables (v1, v2) -> (s, d): Jacobian 1/2; the integrand is even
    # in d (u1 <-> u2) and conjugate under (s, d) -> (-s, -d)
    if fold:
        out = integrate.quad(lambda s: inner(s, 0, np.inf), 0, np.inf, **kw)[0]
        return 2.0 * out
    out = integrate.quad(lambda s: inner(s, -np.inf, np.inf), 0, np.inf, **kw)[0]
    return out


def regular_limit_2d(pair, payoff, strategy, T, R=None, epsrel=1e-9):
    """lim_{h->0} E[eps_T^2]/h in the regular regime."""
    pred_flags = _regime(pair, payoff, strategy)
    if pred_flags not in ("T3-regular", "T5-regular"):
        raise ValueError(f"configuration is not in the regular regime ({pred_flags}); use predict()")
    raw = regular_limit_raw(pair, payoff, strategy, T, R, epsrel)
    return pair.A * raw / (2 * (2 * math.pi) ** TWO_PI_POWER)


def bs_regular_oracle(a, T, K, S0=1.0):
    """(a^4/2) int_0^T E[S_t^4 Gamma_t^2] dt for a Black-Scholes call, martingale drift."""
    def expect(t):
        tau = T - t
        sd = a * math.sqrt(t)

        def integrand(z):
            S = S0 * math.exp(-0.5 * a * a * t + sd * z)
            d1 = (math.log(S / K) + 0.5 * a * a * tau) / (a * math.sqrt(tau))
            gam = math.exp(-0.5 * d1 * d1) / (math.sqrt(2 * math.pi) * S * a * math.sqrt(tau))
            return S**4 * gam**2 * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)

        if t == 0.0:
            return integrand(0.0) * math.sqrt(2 * math.pi)
        # the gamma peak sits at d1 = 0 and has width ~ sqrt(tau/t) in z
        zs = (math.log(K / S0) + 0.5 * a * a * (t - tau)) / sd
        w = math.sqrt(tau / t)
        pts = [p for p in (zs - 10 * w, zs, zs + 10 * w) if -12 < p < 12]
        return integrate.quad(integrand, -12, 12, points=pts, epsabs=0, epsrel=1e-12, limit=400)[0]

    # t = T - w^2 removes the tau^{-1/2} endpoint singularity
    val = integrate.quad(lambda w: 2 * w * expect(T - w * w), 0, math.sqrt(T), epsabs=0, epsrel=1e-11, limit=200)[0]
    return 0.5 * a**4 * val


def calibrate_normalization(a=0.2, T=1.0, K=1.0):
    """Fit the power p in A/(2 (2 pi)^p) against the Black-Scholes oracle."""
    from .levy import black_scholes
    from .payoffs import call

    pair = MarketPair.from_historical(black_scholes(a))
    raw = regular_limit_raw(pair, call(K), "delta", T)
    oracle = bs_regular_oracle(a, T, K)
    p = math.log(pair.A * raw / (2 * oracle)) / math.log(2 * math.pi)
    return {"power": p, "raw": raw, "oracle": oracle, "A": pair.A}


# --- dispatch -----------------------------------------------------------------


@dataclass(frozen=True)
class RatePrediction:
    theorem: str
    rate_exponent: float | None
    constant: float | None
    diagnostics: dict = field(default_factory=dict)

    @property
    def covered(self):
        return self.theorem != "uncovered"


UNCOVERED_NOTE = (
    "alpha = 3/2 with a = 0 lies between the regular and irregular regimes; "
    "the rate is better than h^(1-eps) for every eps > 0 but may carry logarithmic factors"
)


def _regime(pair, payoff, strategy):
    p = pair.p_model
    kind = strategy_kind(strategy)
    f = p.assumption_flags
    a = p.a
    alpha = p.bg_index
    try:
        R = admissible_strip(payoff, pair, kind)
    except NoAdmissibleStrip:
        return "uncovered"
    flags = check_assumptions(pair, payoff, kind, R)
    if not flags["required"]:
        return "uncovered"
    if payoff.kind == "call":
        if (f["H1"] and a == 0) or (f["H2"] and a == 0) or a > 0:
            return "T3-regular"
        return "uncovered"
    if kind is StrategyKind.DELTA:
        if a > 0:
            return "T4-diffusion"
        if f["H4"] and 1 < alpha < 2:
            return "T4-jump"
        return "uncovered"
    if a > 0:
        return "T6-diffusion"
    # quadratic, a = 0
    if f["H1"] and p.h3_holds(1.0):
        return "T5-regular"
    # H2-alpha_- with H3-alpha_+ for some alpha_+ < 3/2 (any alpha_+ above the threshold works)
    if f["H2"] and p.jumps.h3_threshold < 1.5:
        return "T5-regular"
    if f["H4"] and 1.5 < alpha < 2:
        return "T6-jump"
    return "uncovered"


def predict(pair, payoff, strategy, T, K=None, S0=1.0, with_constant=True, density_scale=1.0):
    """Theorem tag, rate exponent beta (r(h) = h^beta) and limiting constant."""
    kind = strategy_kind(strategy)
    K = payoff.K if K is None else K
    p = pair.p_model
    tag = _regime(pair, payoff, kind)
    try:
        R = admissible_strip(payoff, pair, kind)
        diag = check_assumptions(pair, payoff, kind, R)
    except NoAdmissibleStrip as exc:
        diag = {"error": str(exc)}
    diag = dict(diag)
    alpha = p.bg_index
    const = None
    beta = None
    if tag in ("T3-regular", "T5-regular"):
        beta = 1.0
        if with_constant:
            const = regular_limit_2d(pair, payoff, kind, T)
            diag["normalization"] = f"A/(2(2pi)^{TWO_PI_POWER})"
    elif tag == "T4-jump":
        beta = 1 - 1 / alpha
        if with_constant:
            pT = density_scale * density(p, T, math.log(K / S0))
            const = pair.A * constant_D_alpha(alpha) * pT / (2 * math.pi * (p.f_plus + p.f_minus) ** (1 / alpha))
            diag["p_T"] = pT
    elif tag == "T4-diffusion":
        beta = 0.5
        if with_constant:
            pT = density_scale * density(p, T, math.log(K / S0))
            const = pair.A * constant_D() * pT / (2 * math.pi * p.a)
            diag["p_T"] = pT
    elif tag == "T6-diffusion":
        beta = 0.5
        if with_constant:
            pT = density_scale * density(p, T, math.log(K / S0))
            const = pair.A * constant_D() * pT * p.a**4 / (2 * math.pi * p.a * pair.A_bar**2)
            diag["p_T"] = pT
    elif tag == "T6-jump":
        beta = 3 / alpha - 1
        if with_constant:
            sc = stable_coeffs(p)
            pT = density_scale * density(p, T, math.log(K / S0))
            z = (
                pair.A * constant_Q_alpha(alpha) * sc.gamma_plus * sc.gamma_minus / pair.A_bar**2
                * (p.f_plus + p.f_minus) ** (3 / alpha - 2) * pT / (2 * math.pi)
            )
            if abs(z.imag) > 1e-10 * max(1.0, abs(z)):
                raise ArithmeticError(f"irregular-regime constant has imaginary part {z.imag:.3g}")
            const = float(z.real)
            diag["p_T"] = pT
    else:
        if payoff.kind == "digital" and kind is StrategyKind.QUADRATIC and p.a == 0 and alpha == 1.5:
            diag["note"] = UNCOVERED_NOTE
    return RatePrediction(tag, beta, const, diag)
