import numpy as np
import pytest

from valor import ChannelParams, SimConfig
from valor.backend import HAVE_COMPILED

needs_compiled = pytest.mark.skipif(
    not HAVE_COMPILED, reason="compiled kernel not built"
)


@pytest.fixture
def capillary() -> ChannelParams:
    """Reference scenario: capillary vessel, mm-scale separation."""
    return ChannelParams(D=300.0, r_v=5.0, v_avg=2000.0, l=1000.0, w=1.0)


@pytest.fixture
def small_sim() -> SimConfig:
    return SimConfig(M=2000, dt=1e-4, seed=20240801)


def weighted_moments_bruteforce(timestamps, counts):
    """Independent oracle: plain-Python weighted mean/variance accumulation."""
    t0 = float(timestamps[0])
    wsum = 0.0
    m1 = 0.0
    for t, c in zip(timestamps, counts):
        wsum += float(c)
        m1 += (float(t) - t0) * float(c)
    mean = m1 / wsum
    m2 = 0.0
    for t, c in zip(timestamps, counts):
        d = (float(t) - t0) - mean
        m2 += d * d * float(c)
    return wsum, t0 + mean, m2 / wsum


def gauss_legendre_integral(f, a, b, n=80):
    """Independent fixed-order quadrature used as an oracle."""
    x, w = np.polynomial.legendre.leggauss(n)
    xm = 0.5 * (b + a) + 0.5 * (b - a) * x
    return 0.5 * (b - a) * float(np.sum(w * f(xm)))
