import numpy as np
import pytest
from hypothesis import strategies as st

from hedgelab import levy

FAMILIES = ["bs", "merton", "kou", "cgmy", "vg", "nig"]


@st.composite
def models(draw, family=None, min_upper=2.5):
    """Random models whose moment strip reaches beyond w = 2 (so A is finite)."""
    fam = draw(st.sampled_from(FAMILIES)) if family is None else family
    f = lambda lo, hi: draw(st.floats(lo, hi, allow_nan=False))
    if fam == "bs":
        return levy.black_scholes(f(0.05, 0.6))
    if fam == "merton":
        return levy.merton(f(0.0, 0.5), f(0.05, 3.0), f(-0.3, 0.3), f(0.01, 0.4))
    if fam == "kou":
        return levy.kou(f(0.0, 0.5), f(0.05, 3.0), f(0.0, 1.0), f(min_upper, 30.0), f(1.0, 30.0))
    if fam == "cgmy":
        Y = draw(st.one_of(st.floats(0.1, 0.9), st.floats(1.1, 1.9)))
        return levy.cgmy(f(0.1, 2.0), f(1.0, 10.0), f(min_upper, 20.0), Y, f(0.0, 0.3))
    if fam == "vg":
        return levy.variance_gamma(f(0.5, 10.0), f(1.0, 20.0), f(min_upper, 30.0), f(0.0, 0.3))
    alpha = f(5.0, 30.0)
    beta = f(-alpha / 2, min(alpha / 2, alpha - min_upper))
    return levy.nig(alpha, beta, f(0.1, 2.0), f(0.0, 0.3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def bs_pair():
    return levy.MarketPair.from_historical(levy.black_scholes(0.2))


@pytest.fixture(scope="session")
def merton_pair():
    return levy.MarketPair.from_historical(levy.merton(0.1, 1.0, -0.1, 0.15))


@pytest.fixture(scope="session")
def cgmy15_pair():
    return levy.MarketPair.from_historical(levy.cgmy(0.5, 5.0, 10.0, 1.5))


@pytest.fixture(scope="session")
def vg_pair():
    j = levy.VGJumps.from_theta_sigma_kappa(-0.1, 0.2, 0.2)
    return levy.MarketPair.from_historical(levy.variance_gamma(j.C, j.G, j.M))
