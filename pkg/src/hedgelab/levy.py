"""Lévy models: characteristic exponents on complex strips, martingale
adjustment and structural assumption checks.

Every model is written as ``S_t = exp(X_t)`` where ``X`` has Lévy triplet
``(a**2, nu, gamma)`` relative to the truncation function ``1{|x| <= 1}``::

    psi(u) = i*gamma*u - a**2 u**2 / 2 + int (e^{iux} - 1 - iux 1{|x|<=1}) nu(dx)

Jump parts are implemented through their fully compensated exponent
``int (e^{iux} - 1 - iux) nu(dx)``; the big-jump mean ``int_{|x|>1} x nu(dx)``
restores the truncated convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy import integrate, special


class StripError(ValueError):
    """Argument of the characteristic exponent lies outside the moment strip."""


class AdjustmentError(ValueError):
    """No martingale drift exists (e^x is not integrable against nu)."""


def _as_complex(u):
    return np.asarray(u, dtype=complex)


# ---------------------------------------------------------------------------
# jump structures


@dataclass(frozen=True)
class NoJumps:
    name = "none"
    activity = "none"
    bg_index = 0.0
    h1 = False
    h2 = False
    h4 = False
    h3_threshold = 0.0
    h3_at_threshold = True
    f_plus = 0.0
    f_minus = 0.0

    @property
    def strip(self):
        return (-math.inf, math.inf)

    def exponent(self, u):
        return np.zeros_like(_as_complex(u))

    def density(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def total_intensity(self):
        return 0.0


@dataclass(frozen=True)
class MertonJumps:
    """Compound Poisson jumps with Gaussian sizes N(mean, std**2)."""

    lam: float
    mean: float
    std: float

    name = "merton"
    activity = "finite"
    bg_index = 0.0
    h1 = False
    h2 = False
    h4 = False
    h3_threshold = 0.0
    h3_at_threshold = True
    f_plus = 0.0
    f_minus = 0.0

    def __post_init__(self):
        if self.lam < 0 or self.std <= 0:
            raise ValueError("Merton jumps need lam >= 0 and std > 0")

    @property
    def strip(self):
        return (-math.inf, math.inf)

    def exponent(self, u):
        u = _as_complex(u)
        cf = np.exp(1j * u * self.mean - 0.5 * self.std**2 * u**2)
        return self.lam * (cf - 1.0 - 1j * u * self.mean)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.mean) / self.std
        return self.lam * np.exp(-0.5 * z * z) / (self.std * math.sqrt(2 * math.pi))

    def total_intensity(self):
        return self.lam


@dataclass(frozen=True)
class KouJumps:
    """Compound Poisson jumps with double-exponential sizes."""

    lam: float
    p: float
    eta_up: float
    eta_down: float

    name = "kou"
    activity = "finite"
    bg_index = 0.0
    h1 = False
    h2 = False
    h4 = False
    h3_threshold = 0.0
    h3_at_threshold = True
    f_plus = 0.0
    f_minus = 0.0

    def __post_init__(self):
        if self.lam < 0 or not 0 <= self.p <= 1 or self.eta_up <= 0 or self.eta_down <= 0:
            raise ValueError("Kou jumps need lam >= 0, p in [0,1], eta_up > 0, eta_down > 0")

    @property
    def strip(self):
        return (-self.eta_down, self.eta_up)

    def exponent(self, u):
        u = _as_complex(u)
        p, e1, e2 = self.p, self.eta_up, self.eta_down
        cf = p * e1 / (e1 - 1j * u) + (1 - p) * e2 / (e2 + 1j * u)
        jump_mean = p / e1 - (1 - p) / e2
        return self.lam * (cf - 1.0 - 1j * u * jump_mean)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        up = self.p * self.eta_up * np.exp(-self.eta_up * np.abs(x))
        down = (1 - self.p) * self.eta_down * np.exp(-self.eta_down * np.abs(x))
        return self.lam * np.where(x > 0, up, down)

    def total_intensity(self):
        return self.lam


@dataclass(frozen=True)
class CGMYJumps:
    """Tempered stable jumps: nu(x) = C e^{-M x} x^{-1-Y} (x>0), C e^{-G|x|} |x|^{-1-Y} (x<0)."""

    C: float
    G: float
    M: float
    Y: float

    name = "cgmy"
    activity = "infinite"
    h1 = True

    def __post_init__(self):
        if self.C <= 0 or self.G <= 0 or self.M <= 0:
            raise ValueError("CGMY needs C > 0, G > 0, M > 0")
        if not 0 <= self.Y < 2:
            raise ValueError("Y must lie in [0,2)")

    @property
    def bg_index(self):
        return float(self.Y)

    @property
    def h2(self):
        return self.Y > 0

    @property
    def h4(self):
        return self.Y > 0

    @property
    def h3_threshold(self):
        return float(self.Y)

    @property
    def h3_at_threshold(self):
        return False

    @property
    def f_plus(self):
        return self.C if self.Y > 0 else 0.0

    @property
    def f_minus(self):
        return self.C if self.Y > 0 else 0.0

    @property
    def strip(self):
        return (-self.G, self.M)

    def exponent(self, u):
        u = _as_complex(u)
        C, G, M, Y = self.C, self.G, self.M, self.Y
        if Y == 0:
            return _vg_exponent(u, C, G, M)
        if Y == 1:
            return C * ((M - 1j * u) * np.log1p(-1j * u / M) + (G + 1j * u) * np.log1p(1j * u / G))
        g = special.gamma(-Y)
        k = C * g * ((M - 1j * u) ** Y - M**Y + (G + 1j * u) ** Y - G**Y)
        dk0 = C * g * Y * (-1j * M ** (Y - 1) + 1j * G ** (Y - 1))
        return k - dk0 * u

    def density(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        rate = np.where(x > 0, self.M, self.G)
        with np.errstate(divide="ignore"):
            return self.C * np.exp(-rate * ax) / ax ** (1 + self.Y)

    def total_intensity(self):
        return math.inf


def _vg_exponent(u, C, G, M):
    k = -C * (np.log1p(-1j * u / M) + np.log1p(1j * u / G))
    dk0 = 1j * C * (1 / M - 1 / G)
    return k - dk0 * u


@dataclass(frozen=True)
class VGJumps:
    """Variance gamma jumps in (C, G, M) form: nu(x) = C e^{-M x}/x, C e^{-G|x|}/|x|."""

    C: float
    G: float
    M: float

    name = "vg"
    activity = "infinite"
    bg_index = 0.0
    h1 = True
    h2 = False
    h4 = False
    h3_threshold = 0.0
    h3_at_threshold = False
    f_plus = 0.0
    f_minus = 0.0

    def __post_init__(self):
        if self.C <= 0 or self.G <= 0 or self.M <= 0:
            raise ValueError("VG needs C > 0, G > 0, M > 0")

    @classmethod
    def from_theta_sigma_kappa(cls, theta, sigma, kappa):
        root = math.sqrt(theta**2 * kappa**2 / 4 + sigma**2 * kappa / 2)
        return cls(C=1 / kappa, G=1 / (root - theta * kappa / 2), M=1 / (root + theta * kappa / 2))

    @property
    def theta_sigma_kappa(self):
        kappa = 1 / self.C
        theta = self.C * (1 / self.M - 1 / self.G)
        sigma = math.sqrt(2 * self.C / (self.M * self.G))
        return theta, sigma, kappa

    @property
    def strip(self):
        return (-self.G, self.M)

    def exponent(self, u):
        return _vg_exponent(_as_complex(u), self.C, self.G, self.M)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        rate = np.where(x > 0, self.M, self.G)
        with np.errstate(divide="ignore"):
            return self.C * np.exp(-rate * ax) / ax

    def total_intensity(self):
        return math.inf


@dataclass(frozen=True)
class NIGJumps:
    """Normal inverse Gaussian jumps (alpha, beta, delta), location zero."""

    alpha: float
    beta: float
    delta: float

    name = "nig"
    activity = "infinite"
    bg_index = 1.0
    h1 = True
    h2 = True
    h4 = True
    h3_threshold = 1.0
    h3_at_threshold = False

    def __post_init__(self):
        if self.alpha <= 0 or self.delta <= 0 or abs(self.beta) >= self.alpha:
            raise ValueError("NIG needs alpha > 0, delta > 0 and |beta| < alpha")

    @property
    def f_plus(self):
        return self.delta / math.pi

    @property
    def f_minus(self):
        return self.delta / math.pi

    @property
    def strip(self):
        return (-self.alpha - self.beta, self.alpha - self.beta)

    def exponent(self, u):
        u = _as_complex(u)
        a, b, d = self.alpha, self.beta, self.delta
        g0 = math.sqrt(a * a - b * b)
        k = d * (g0 - np.sqrt(a * a - (b + 1j * u) ** 2))
        return k - 1j * d * b / g0 * u

    def density(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            # k1e(z) = K1(z) e^{z}
            return (self.delta * self.alpha / math.pi) * np.exp(self.beta * x - self.alpha * ax) * special.k1e(self.alpha * ax) / ax

    def total_intensity(self):
        return math.inf


JUMP_FAMILIES = {
    "bs": NoJumps,
    "merton": MertonJumps,
    "kou": KouJumps,
    "cgmy": CGMYJumps,
    "vg": VGJumps,
    "nig": NIGJumps,
}


def _integrate_density(fn, lo, hi):
    val, _ = integrate.quad(fn, lo, hi, limit=400, epsabs=1e-14, epsrel=1e-12)
    return val


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class LevyTriplet:
    a: float
    gamma: float
    jumps: object = field(default_factory=NoJumps)

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("diffusion volatility a must be >= 0")


@dataclass(frozen=True)
class LevyModel:
    """A Lévy process with closed-form exponent and regularity metadata."""

    triplet: LevyTriplet

    @property
    def a(self):
        return self.triplet.a

    @property
    def gamma(self):
        return self.triplet.gamma

    @property
    def jumps(self):
        return self.triplet.jumps

    @property
    def family(self):
        return "bs" if isinstance(self.jumps, NoJumps) else self.jumps.name

    @property
    def bg_index(self):
        return self.jumps.bg_index

    @property
    def f_plus(self):
        return self.jumps.f_plus

    @property
    def f_minus(self):
        return self.jumps.f_minus

    @property
    def moment_strip(self):
        return self.jumps.strip

    @property
    def assumption_flags(self):
        j = self.jumps
        alpha = self.bg_index
        return {
            "H1": bool(j.h1),
            "H2": bool(j.h2 and 0 < alpha < 2),
            "H4": bool(j.h4 and 0 < alpha < 2),
            "H3_threshold": j.h3_threshold,
            "H3_at_threshold": bool(j.h3_at_threshold),
        }

    def h3_holds(self, alpha):
        """Whether int_{[-1,1]} |x|^alpha nu(dx) < inf."""
        j = self.jumps
        return alpha > j.h3_threshold or (alpha == j.h3_threshold and j.h3_at_threshold)

    @cached_property
    def big_jump_mean(self):
        """int_{|x|>1} x nu(dx)."""
        j = self.jumps
        if isinstance(j, NoJumps):
            return 0.0
        up = _integrate_density(lambda x: x * j.density(x), 1.0, np.inf)
        down = _integrate_density(lambda x: x * j.density(x), -np.inf, -1.0)
        return up + down

    def in_strip(self, w):
        lo, hi = self.moment_strip
        w = np.asarray(w, dtype=float)
        return (w > lo) & (w < hi)

    def psi(self, u):
        u = _as_complex(u)
        w = -u.imag
        if not np.all(self.in_strip(w)):
            bad = np.atleast_1d(w)[~np.atleast_1d(self.in_strip(w))][0]
            lo, hi = self.moment_strip
            raise StripError(
                f"Im(u) = {-bad:g} outside the admissible strip: need -Im(u) in ({lo:g}, {hi:g})"
            )
        out = (
            1j * (self.gamma + self.big_jump_mean) * u
            - 0.5 * self.a**2 * u**2
            + self.jumps.exponent(u)
        )
        return out if out.ndim else complex(out)

    def char_fn(self, t, u):
        if t < 0:
            raise ValueError("t must be >= 0")
        val = np.exp(t * _as_complex(self.psi(u)))
        return val if val.ndim else complex(val)

    def with_gamma(self, gamma):
        return LevyModel(replace(self.triplet, gamma=float(gamma)))


def psi(model, u):
    return model.psi(u)


def char_fn(model, t, u):
    return model.char_fn(t, u)


def martingale_adjust(model):
    """Shift the drift so that exp(X) is a martingale; jumps are unchanged."""
    lo, hi = model.moment_strip
    if not hi > 1:
        raise AdjustmentError(f"e^x is not nu-integrable (moment strip upper end {hi:g} <= 1)")
    # psi(-i) is affine in gamma with unit slope; evaluate its gamma-free part
    rest = model.with_gamma(0.0).psi(-1j).real
    return model.with_gamma(-rest)


def quadratic_variation_constant(model):
    """A = a^2 + int (e^z - 1)^2 nu(dz) = psi(-2i) - 2 psi(-i)."""
    lo, hi = model.moment_strip
    if not hi > 2:
        raise StripError(f"int_{{|x|>1}} e^{{2x}} nu(dx) diverges (moment strip upper end {hi:g} <= 2)")
    return float((model.psi(-2j) - 2 * model.psi(-1j)).real)


@dataclass(frozen=True)
class MarketPair:
    """Historical model P and risk-neutral model Q (same jump family)."""

    p_model: LevyModel
    q_model: LevyModel

    def __post_init__(self):
        if type(self.p_model.jumps) is not type(self.q_model.jumps):
            raise ValueError("P and Q must share the same jump family")
        if abs(self.q_model.psi(-1j)) > 1e-10:
            raise ValueError("Q model violates the martingale condition psi(-i) = 0")

    @classmethod
    def from_historical(cls, p_model):
        return cls(p_model, martingale_adjust(p_model))

    @cached_property
    def A(self):
        return quadratic_variation_constant(self.p_model)

    @cached_property
    def A_bar(self):
        return quadratic_variation_constant(self.q_model)


# ---------------------------------------------------------------------------
# constructors


def _model(a, gamma, jumps):
    m = LevyModel(LevyTriplet(float(a), 0.0, jumps))
    if gamma is None:
        return martingale_adjust(m)
    return m.with_gamma(gamma)


def black_scholes(a, gamma=None):
    """Gaussian model; gamma=None gives the martingale drift."""
    return _model(a, gamma, NoJumps())


def merton(a, lam, mean, std, gamma=None):
    return _model(a, gamma, MertonJumps(lam, mean, std))


def kou(a, lam, p, eta_up, eta_down, gamma=None):
    return _model(a, gamma, KouJumps(lam, p, eta_up, eta_down))


def cgmy(C, G, M, Y, a=0.0, gamma=None):
    return _model(a, gamma, CGMYJumps(C, G, M, Y))


def variance_gamma(C, G, M, a=0.0, gamma=None):
    return _model(a, gamma, VGJumps(C, G, M))


def nig(alpha, beta, delta, a=0.0, gamma=None):
    return _model(a, gamma, NIGJumps(alpha, beta, delta))


# ---------------------------------------------------------------------------
# assumptions


def _int_exp_finite(model, w):
    """int_{|x|>1} e^{w x} nu(dx) < inf, using the open moment strip."""
    if isinstance(model.jumps, NoJumps):
        return True
    return bool(model.in_strip(w))


def char_decay(model):
    """Characteristic function decays at infinity (a > 0, H1 or H2)."""
    f = model.assumption_flags
    return model.a > 0 or f["H1"] or f["H2"]


def integrability_flags(pair, R):
    p, q = pair.p_model, pair.q_model
    hi_sq = 2 * max(R, 1.0)
    lo_sq = 2 * min(R, 1.0)
    sq_p = _int_exp_finite(p, hi_sq) and _int_exp_finite(p, lo_sq)
    sq_q = _int_exp_finite(q, hi_sq) and _int_exp_finite(q, lo_sq)
    drift_rep = _int_exp_finite(p, 2 * (R - 1))
    return {
        "payoff_Q_integrable": _int_exp_finite(q, R),
        "square_integrable_P": sq_p,
        "square_integrable_Q": sq_q,
        "strategy_representation": drift_rep,
        "upsilon_strip": _int_exp_finite(q, R + 1) and _int_exp_finite(q, 2.0),
    }


def check_assumptions(pair, payoff, strategy, R=None):
    """Diagnostic flag set for (pair, payoff, strategy) at damping R.

    Keys: ``payoff_R`` (condopt/europt range), ``char_decay``, ``deltaint``,
    ``quadint``, ``H1``, ``H2``, ``H3_plus`` (H3 for some alpha_+ <= 1),
    ``H4``, ``required`` (all flags needed by the strategy).
    """
    from .payoffs import admissible_strip, NoAdmissibleStrip

    if R is None:
        R = payoff.r_default
    if R is None:
        try:
            R = admissible_strip(payoff, pair, strategy)
        except NoAdmissibleStrip:
            R = payoff.r_min + 1.0
    flags = integrability_flags(pair, R)
    m = pair.p_model
    af = m.assumption_flags
    out = {
        "R": float(R),
        "payoff_R": payoff.admits(R),
        "char_decay": char_decay(pair.q_model),
        "deltaint": flags["payoff_Q_integrable"] and flags["square_integrable_P"] and flags["strategy_representation"],
        "quadint": flags["square_integrable_Q"] and flags["square_integrable_P"] and flags["strategy_representation"],
        "upsilon_strip": flags["upsilon_strip"],
        "H1": af["H1"],
        "H2": af["H2"],
        "H3_plus": m.h3_holds(1.0),
        "H4": af["H4"],
    }
    need = ["payoff_R", "char_decay", "payoff_Q_integrable"]
    out["payoff_Q_integrable"] = flags["payoff_Q_integrable"]
    if str(strategy) == "delta":
        need.append("deltaint")
    else:
        need += ["quadint", "upsilon_strip"]
    out["required"] = all(out[k] for k in need)
    return out


# ---------------------------------------------------------------------------
# decay envelopes


@dataclass(frozen=True)
class DecayEnvelope:
    """Bound on |phi_t(z)| for real z.

    kind == "exponential": |phi_t(z)| <= exp(t*log_rate - c*t*|z|**alpha_eff)
    kind == "power":       |phi_t(z)| <= exp(t*log_rate) * (1+|z|)**(-c*t)
    """

    kind: str
    c: float
    alpha_eff: float
    log_rate: float = 0.0

    def bound(self, t, z):
        z = np.abs(np.asarray(z, dtype=float))
        if self.kind == "exponential":
            return np.exp(t * self.log_rate - self.c * t * z**self.alpha_eff)
        return np.exp(t * self.log_rate) * (1 + z) ** (-self.c * t)

    def cutoff(self, t, tol, growth=0.0, cap=1e7):
        """Smallest U with bound(t, U) * (1+U)**growth < tol (capped)."""
        if t <= 0:
            return cap
        target = math.log(tol) - t * self.log_rate
        if self.kind == "exponential":
            f = lambda U: -self.c * t * U**self.alpha_eff + growth * math.log1p(U) - target
        else:
            if self.c * t <= growth:
                return cap
            f = lambda U: (growth - self.c * t) * math.log1p(U) - target
        if f(cap) > 0:
            return cap
        lo, hi = 0.0, 1.0
        while f(hi) > 0:
            lo, hi = hi, 2 * hi
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if f(mid) > 0:
                lo = mid
            else:
                hi = mid
        return hi


VERIFICATION_GRID = np.union1d(
    np.concatenate([-np.logspace(-3, 4, 2000), np.logspace(-3, 4, 2000)]),
    np.linspace(-1e4, 1e4, 40001),
)
# slack on fitted log-rates for points between grid nodes
RATE_MARGIN = 1e-3


class EnvelopeError(ValueError):
    pass


def decay_envelope(model):
    """Decay constants for |phi_t| on the real line.

    With a > 0 the Gaussian factor gives c = a^2/2, alpha_eff = 2.  Stable-like
    models (H2) get alpha_eff = Blumenthal-Getoor index and c fitted on a fixed
    grid; H1-only models get a power-law descriptor.
    """
    z = VERIFICATION_GRID
    re = model.psi(z).real
    if model.a > 0:
        return DecayEnvelope("exponential", 0.5 * model.a**2, 2.0, 0.0)
    flags = model.assumption_flags
    if flags["H2"]:
        alpha = model.bg_index
        big = np.array([1e6, -1e6])
        c_asym = float(np.min(-model.psi(big).real / 1e6**alpha))
        c = 0.5 * c_asym
        rate = float(np.max(re + c * np.abs(z) ** alpha)) + RATE_MARGIN
        return DecayEnvelope("exponential", c, alpha, max(rate, 0.0))
    if flags["H1"]:
        # gamma-type small jumps C/|x| on each side: |phi_1(z)| ~ |z|^{-2C}
        c = 2.0 * model.jumps.C
        zz = np.union1d(z, np.concatenate([-np.logspace(-3, 9, 4000), np.logspace(-3, 9, 4000)]))
        rate = float(np.max(model.psi(zz).real + c * np.log1p(np.abs(zz)))) + RATE_MARGIN
        return DecayEnvelope("power", c, 0.0, max(rate, 0.0))
    raise EnvelopeError(f"{model.family} model without diffusion has no decaying characteristic function")
