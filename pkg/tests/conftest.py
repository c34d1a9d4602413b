import numpy as np
import pytest

from afesi import CovarianceModel, Dataset, SearchConfig


def random_dataset(seed, n=30, m=3, signal=0.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m))
    y = signal * np.sin(X[:, 0]) + rng.standard_normal(n)
    return Dataset(X, y)


def ar_dense(n, rho):
    idx = np.arange(n)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def quad_mass(intervals, mu=0.0, sd=1.0):
    """Normal mass of a union of intervals by adaptive quadrature (mpmath for the far tails)."""
    import mpmath

    mpmath.mp.dps = 40
    total = mpmath.mpf(0)
    for lo, hi in intervals:
        a = mpmath.mpf(lo - mu) / sd if np.isfinite(lo) else -mpmath.inf
        b = mpmath.mpf(hi - mu) / sd if np.isfinite(hi) else mpmath.inf
        # subdivide so the sharply peaked far-tail density is resolved
        if mpmath.isinf(a) and mpmath.isinf(b):
            pts = [a, 0, b]
        elif mpmath.isinf(b):
            pts = [a + k * mpmath.mpf(0.25) for k in range(40)] + [b]
        elif mpmath.isinf(a):
            pts = [a] + [b - k * mpmath.mpf(0.25) for k in range(39, -1, -1)]
        else:
            pts = mpmath.linspace(a, b, 41)
        total += mpmath.quad(mpmath.npdf, pts)
    return total


SMALL = SearchConfig(max_depth=3, max_nodes=2, max_parents=2, gamma=1, seed=0)


@pytest.fixture
def small_config():
    return SMALL


@pytest.fixture(params=["identity", "ar"])
def sigma_kind(request):
    return request.param


def make_sigma(kind, n):
    if kind == "identity":
        return CovarianceModel.identity(n)
    if kind == "scaled":
        return CovarianceModel.scaled(n, 2.5)
    if kind == "ar":
        return CovarianceModel.ar_power(n, 0.5)
    return CovarianceModel.dense(ar_dense(n, 0.3) + 0.5 * np.eye(n))
