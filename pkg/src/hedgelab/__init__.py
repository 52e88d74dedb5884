"""Discrete hedging errors in exponential Lévy models."""
from .levy import (
    LevyModel, LevyTriplet, MarketPair, black_scholes, merton, kou, cgmy,
    variance_gamma, nig, psi, char_fn, martingale_adjust,
    quadratic_variation_constant, check_assumptions, decay_envelope,
)
from .payoffs import Payoff, call, digital, g_hat, admissible_strip
from .fourier import (
    StrategyKind, QuadratureSpec, price, delta_strategy, quad_strategy,
    upsilon, density, build_strategy_table, StrategySurface,
)

__version__ = "0.1.0"
