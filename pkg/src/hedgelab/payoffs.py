"""Call and digital payoffs and their Fourier transforms on damping lines.

With ``g(x) = G(e^x)`` the transform is ``g_hat(u) = int e^{iux} g(x) dx``,
which exists on the line ``Im u = R`` for ``R`` in the payoff's range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class NoAdmissibleStrip(ValueError):
    pass


class InadmissibleR(ValueError):
    pass


@dataclass(frozen=True)
class Payoff:
    kind: str
    K: float
    r_default: float | None = None

    def __post_init__(self):
        if self.kind not in ("call", "digital"):
            raise ValueError(f"unknown payoff kind {self.kind!r} (expected call or digital)")
        if not self.K > 0:
            raise ValueError("strike K must be positive")
        if self.r_default is not None and not self.admits(self.r_default):
            raise InadmissibleR(f"R={self.r_default} not admissible for a {self.kind} (need R > {self.r_min:g})")

    @property
    def regularity(self):
        return "lipschitz" if self.kind == "call" else "discontinuous"

    @property
    def r_min(self):
        return 1.0 if self.kind == "call" else 0.0

    def admits(self, R):
        return R > self.r_min

    def payoff(self, S):
        S = np.asarray(S, dtype=float)
        if self.kind == "call":
            return np.maximum(S - self.K, 0.0)
        return (S >= self.K).astype(float)

    def g_hat(self, u, R):
        return g_hat(self, u, R)

    def g_hat_unit(self, u, R):
        """g_hat(u+iR) / K^{iu}: the strike-free part (no oscillation in u)."""
        self._check(R)
        u = np.asarray(u, dtype=float)
        if self.kind == "digital":
            return self.K ** (-R) / (R - 1j * u)
        return self.K ** (1 - R) / ((R - 1j * u) * (R - 1 - 1j * u))

    def bound_constant(self, R):
        """C with |g_hat(u+iR)| <= C/(1+|u|) (digital) or C/(1+u^2) (call)."""
        self._check(R)
        if self.kind == "digital":
            return 2 * max(1.0, 1.0 / R) * self.K ** (-R)
        return self.K ** (1 - R) / min(R - 1, 1.0)

    def _check(self, R):
        if not self.admits(R):
            raise InadmissibleR(f"R={R} not admissible for a {self.kind} (need R > {self.r_min:g})")


def call(K, R=None):
    return Payoff("call", float(K), R)


def digital(K, R=None):
    return Payoff("digital", float(K), R)


def g_hat(payoff, u, R):
    """Closed-form transform at u + iR."""
    u = np.asarray(u, dtype=float)
    val = payoff.g_hat_unit(u, R) * np.exp(1j * u * math.log(payoff.K))
    return val if val.ndim else complex(val)


def feasible_interval(payoff, pair, strategy):
    """Open interval of R satisfying the payoff and model integrability conditions."""
    lo_p, hi_p = pair.p_model.moment_strip
    lo_q, hi_q = pair.q_model.moment_strip
    lo = payoff.r_min
    hi = math.inf
    # payoff integrable under Q: R < hi_q
    hi = min(hi, hi_q)
    # e^{2 max(R,1) x} under P (and Q for quadratic): 2R < hi
    hi = min(hi, hi_p / 2)
    # e^{2(R-1)x}: 2(R-1) < hi_p, and > lo_p
    hi = min(hi, 1 + hi_p / 2)
    lo = max(lo, 1 + lo_p / 2)
    if str(strategy) == "quadratic":
        hi = min(hi, hi_q / 2, hi_q - 1)
    lower_needs = 2.0 < hi_p and (str(strategy) != "quadratic" or 2.0 < hi_q)
    if not lower_needs or not hi > lo:
        return lo, hi, False
    return lo, hi, True


def admissible_strip(payoff, pair, strategy):
    """Default damping R: digital min(1, mid); call min(2, mid) of the feasible interval."""
    lo, hi, ok = feasible_interval(payoff, pair, strategy)
    if not ok:
        raise NoAdmissibleStrip(
            f"no admissible R: payoff needs R > {payoff.r_min:g}, moment strip of P is "
            f"{_fmt(pair.p_model.moment_strip)}, of Q is {_fmt(pair.q_model.moment_strip)} "
            f"(feasible R interval ({lo:g}, {hi:g}) is empty or e^{{2x}} is not integrable)"
        )
    cap = 1.0 if payoff.kind == "digital" else 2.0
    mid = 0.5 * (lo + hi) if math.isfinite(hi) else math.inf
    return float(min(cap, mid))


def _fmt(iv):
    return f"({iv[0]:g}, {iv[1]:g})"
