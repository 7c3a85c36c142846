import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def coherent_gram(a: complex, b: complex) -> complex:
    """<a|b> for coherent states."""
    return complex(np.exp(-abs(a) ** 2 / 2 - abs(b) ** 2 / 2 + np.conj(a) * b))


def product_gram(xs, ys) -> complex:
    return complex(np.prod([coherent_gram(x, y) for x, y in zip(xs, ys)]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def laguerre_displacement(alpha: complex, dim: int) -> np.ndarray:
    """<m|D(alpha)|n> from the associated Laguerre closed form."""
    from scipy.special import eval_genlaguerre, gammaln
    x = abs(alpha) ** 2
    out = np.zeros((dim, dim), dtype=complex)
    for m in range(dim):
        for n in range(dim):
            if m >= n:
                pref = math.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)))
                out[m, n] = pref * alpha ** (m - n) * eval_genlaguerre(n, m - n, x)
            else:
                pref = math.exp(0.5 * (gammaln(m + 1) - gammaln(n + 1)))
                out[m, n] = pref * (-np.conj(alpha)) ** (n - m) * eval_genlaguerre(m, n - m, x)
    return out * math.exp(-x / 2)
