"""Gaussian mass over interval unions, stable far into the tails."""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .exceptions import InvalidVariance, ZeroTruncationMass
from .intervals import IntervalSet


def _log_diff(la: float, lb: float) -> float:
    """``log(exp(la) - exp(lb))`` for ``la >= lb``."""
    if lb == -math.inf:
        return la
    d = lb - la
    if d >= 0:
        return -math.inf
    return la + math.log1p(-math.exp(d))


def log_interval_mass(lo: float, hi: float) -> float:
    """``log(Phi(hi) - Phi(lo))`` for standardized endpoints.

    Intervals on one side of zero are evaluated through the tail on that side
    so that sets far beyond six standard deviations keep full relative
    precision.
    """
    if not lo < hi:
        return -math.inf
    if lo >= 0:
        return _log_diff(float(special.log_ndtr(-lo)), float(special.log_ndtr(-hi)))
    if hi <= 0:
        return _log_diff(float(special.log_ndtr(hi)), float(special.log_ndtr(lo)))
    outside = float(special.ndtr(lo)) + float(special.ndtr(-hi))
    return math.log1p(-outside)


def log_truncated_normal_mass(Z: IntervalSet, mu: float = 0.0, sigma_sq: float = 1.0) -> float:
    if not sigma_sq > 0:
        raise InvalidVariance(f"variance must be positive, got {sigma_sq}")
    s = math.sqrt(sigma_sq)
    logs = [log_interval_mass((lo - mu) / s, (hi - mu) / s) for lo, hi in Z]
    if not logs:
        return -math.inf
    return float(special.logsumexp(logs))


def truncated_normal_mass(Z: IntervalSet, mu: float = 0.0, sigma_sq: float = 1.0) -> float:
    """``P(U in Z)`` for ``U ~ N(mu, sigma_sq)``."""
    lm = log_truncated_normal_mass(Z, mu, sigma_sq)
    mass = math.exp(lm)
    if mass == 0.0:
        raise ZeroTruncationMass(f"truncation set {Z!r} has no mass under N({mu}, {sigma_sq})")
    return min(1.0, mass)


def selective_p_value(z_obs: float, Z: IntervalSet, sigma_sq: float) -> float:
    """Two-sided p-value ``P(|U| >= |z_obs| | U in Z)`` with ``U ~ N(0, sigma_sq)``."""
    den = log_truncated_normal_mass(Z, 0.0, sigma_sq)
    if den == -math.inf:
        raise ZeroTruncationMass(f"truncation set {Z!r} has no mass")
    t = abs(z_obs)
    if t == 0.0:
        return 1.0
    tails = IntervalSet([(-math.inf, -t), (t, math.inf)])
    num = log_truncated_normal_mass(Z.intersect(tails), 0.0, sigma_sq)
    return float(np.clip(math.exp(num - den), 0.0, 1.0))


def truncated_normal_cdf(x: float, Z: IntervalSet, mu: float = 0.0, sigma_sq: float = 1.0) -> float:
    """CDF of ``N(mu, sigma_sq)`` restricted to ``Z``."""
    den = log_truncated_normal_mass(Z, mu, sigma_sq)
    if den == -math.inf:
        raise ZeroTruncationMass(f"truncation set {Z!r} has no mass")
    num = log_truncated_normal_mass(Z.clip(-math.inf, x), mu, sigma_sq)
    return float(np.clip(math.exp(num - den), 0.0, 1.0))
