"""Selective inference for generated features.

Conditioning on the nuisance component of the response reduces the problem
to the line ``y(z) = a + b z`` with ``z = eta @ y``. Along that line every
AIC comparison the search made is a quadratic inequality in ``z``; the
intersection of all of them around a point is the interval on which the
search takes the same path. Sweeping the line interval by interval and
keeping those whose output equals the observed feature set yields the
truncation set ``Z``, and the p-value is a truncated-normal tail ratio.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core_stats import AugmentedDesign, Dataset, ResidualOperator, TestDirection, classical_z_p_value, test_direction
from .covariance import CovarianceModel
from .exceptions import EmptyGeneration, IndexOutOfRange, InvalidDirection, TraceMismatch
from .expressions import FeatureExpression
from .intervals import INF, IntervalSet
from .search import GE, AfeResult, ComparisonTrace, Node, SearchConfig, SearchContext, run_afe
from .truncnorm import selective_p_value

WINDOW_SIGMAS = 10.0
MISMATCH_RTOL = 1e-7


@dataclass(frozen=True, eq=False)
class LineParameterization:
    a: np.ndarray
    b: np.ndarray
    z_obs: float
    sigma_eta_sq: float
    eta: np.ndarray

    def at(self, z: float) -> np.ndarray:
        return self.a + self.b * z

    @property
    def window(self) -> tuple[float, float]:
        w = WINDOW_SIGMAS * math.sqrt(self.sigma_eta_sq)
        return self.z_obs - w, self.z_obs + w

    @property
    def step(self) -> float:
        return max(1e-9, 1e-6 * math.sqrt(self.sigma_eta_sq))


@dataclass(frozen=True)
class QuadraticInequality:
    """``c2 r^2 + c1 r + c0 <= 0``."""

    c2: float
    c1: float
    c0: float

    def __call__(self, r):
        return (self.c2 * r + self.c1) * r + self.c0

    def __neg__(self):
        return QuadraticInequality(-self.c2, -self.c1, -self.c0)


@dataclass
class SelectiveTestResult:
    j: int
    stat: float
    p_selective: float
    Z: IntervalSet
    n_afe_calls: int
    wall_time: float
    sigma_eta_sq: float = math.nan
    feature: str = ""
    method: str = "proposed"
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "method": self.method,
            "j": self.j,
            "feature": self.feature,
            "stat": self.stat,
            "sigma_eta_sq": self.sigma_eta_sq,
            "p_selective": self.p_selective,
            "intervals": self.Z.to_list(),
            "n_afe_calls": self.n_afe_calls,
            "wall_time_s": self.wall_time,
        }
        out.update(self.extra)
        return out


def nuisance_decompose(y: np.ndarray, eta: np.ndarray, Sigma: CovarianceModel) -> LineParameterization:
    """Split ``y = a + b (eta @ y)`` with ``a`` the nuisance statistic and ``b = Sigma eta / eta' Sigma eta``."""
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if not np.any(eta):
        raise InvalidDirection("test direction is the zero vector")
    Se = Sigma.apply(eta)
    s2 = float(eta @ Se)
    if not s2 > 0:
        raise InvalidDirection("eta' Sigma eta is not positive")
    b = Se / s2
    z = float(eta @ y)
    a = y - b * z
    return LineParameterization(a=a, b=b, z_obs=z, sigma_eta_sq=s2, eta=eta)


class LineCache:
    """Per-line memo of each feature set's AIC as a quadratic in ``z``."""

    def __init__(self, line: LineParameterization, Sigma: CovarianceModel):
        self.line = line
        self.Sigma = Sigma
        self.aw = Sigma.whiten(line.a)
        self.bw = Sigma.whiten(line.b)
        self._quads: dict = {}

    def node_quad(self, node) -> tuple[float, float, float]:
        """Coefficients of ``AIC(node, a + b z)`` as ``(c2, c1, c0)``."""
        if isinstance(node, Node):
            key = node.keys
            hit = self._quads.get(key)
            if hit is not None:
                return hit
            Q = node.wbasis
            size = node.size
        else:
            V = np.asarray(node, dtype=float)
            if V.ndim == 1:
                V = V[:, None]
            key = None
            Q = ResidualOperator(V, self.Sigma).Q
            size = V.shape[1]
        ra = self.aw - Q @ (Q.T @ self.aw)
        rb = self.bw - Q @ (Q.T @ self.bw)
        quad = (float(rb @ rb), 2.0 * float(ra @ rb), float(ra @ ra) + 2.0 * size)
        if key is not None:
            self._quads[key] = quad
        return quad


def comparison_to_quadratic(left, right, line: LineParameterization, Sigma: CovarianceModel, cache: LineCache | None = None) -> QuadraticInequality:
    """``AIC(left, a + b r) - AIC(right, a + b r)`` as a quadratic in ``r``.

    ``left`` and ``right`` are search nodes or column matrices.
    """
    cache = cache or LineCache(line, Sigma)
    l2, l1, l0 = cache.node_quad(left)
    r2, r1, r0 = cache.node_quad(right)
    return QuadraticInequality(l2 - r2, l1 - r1, l0 - r0)


def solve_quadratic_leq(q: QuadraticInequality, tol: float = 1e-12) -> IntervalSet:
    """Solution set of ``q(r) <= 0``."""
    c2, c1, c0 = q.c2, q.c1, q.c0
    if not all(map(math.isfinite, (c2, c1, c0))):
        raise ValueError("quadratic coefficients must be finite")
    if abs(c2) <= tol * max(abs(c1), abs(c0), 1.0):
        if abs(c1) <= tol * max(abs(c0), 1.0):
            return IntervalSet.real_line() if c0 <= 0 else IntervalSet.empty()
        root = -c0 / c1
        return IntervalSet([(-INF, root)]) if c1 > 0 else IntervalSet([(root, INF)])
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc < 0:
        return IntervalSet.empty() if c2 > 0 else IntervalSet.real_line()
    sq = math.sqrt(disc)
    qq = -0.5 * (c1 + math.copysign(sq, c1))
    if qq == 0.0:
        r1 = r2 = 0.0
    else:
        r1, r2 = sorted((qq / c2, c0 / qq))
    if c2 > 0:
        return IntervalSet([(r1, r2)])
    return IntervalSet([(-INF, r1), (r2, INF)])


def _component_around(q: QuadraticInequality, z: float) -> tuple[float, float]:
    sol = solve_quadratic_leq(q)
    comp = sol.component(z)
    if comp is not None:
        return comp
    scale = max(1.0, abs(q.c0), abs(q.c1 * z), abs(q.c2 * z * z))
    if q(z) > MISMATCH_RTOL * scale:
        raise TraceMismatch(f"recorded comparison violated at z={z}: q(z)={q(z):.3g}")
    if not sol:
        # rounding turned a touching quadratic into an empty set
        return z, z
    # floating-point slack: z sits a hair outside its component
    lo, hi = min(sol, key=lambda iv: min(abs(iv[0] - z), abs(iv[1] - z)))
    return min(lo, z), max(hi, z)


def interval_for_z(trace: ComparisonTrace, line: LineParameterization, z: float, Sigma: CovarianceModel, cache: LineCache | None = None) -> tuple[float, float]:
    """Largest interval around ``z`` on which every recorded comparison keeps its order."""
    cache = cache or LineCache(line, Sigma)
    lo, hi = -INF, INF
    for c in trace:
        q = comparison_to_quadratic(c.left, c.right, line, Sigma, cache)
        if c.relation == GE:
            q = -q
        a, b = _component_around(q, z)
        lo = max(lo, a)
        hi = min(hi, b)
    return lo, hi


@dataclass
class LineSearch:
    Z: IntervalSet
    observed_interval: tuple[float, float]
    n_afe_calls: int


def line_search(dataset: Dataset, Sigma: CovarianceModel, config: SearchConfig, line: LineParameterization, target, context: SearchContext | None = None) -> LineSearch:
    """Sweep ``[z_obs - W, z_obs + W]`` and collect where the search output equals ``target``.

    ``target`` is an iterable of expressions or keys; comparison is by key set.
    """
    context = context or SearchContext(dataset.X, Sigma, config)
    cache = LineCache(line, Sigma)
    target = frozenset(t.key if isinstance(t, FeatureExpression) else str(t) for t in target)
    w_lo, w_hi = line.window
    step = line.step
    pieces = []
    calls = 0

    def visit(z):
        nonlocal calls
        res = run_afe(dataset.with_response(line.at(z)), Sigma, config, context)
        calls += 1
        lo, hi = interval_for_z(res.trace, line, z, Sigma, cache)
        if res.key_set == target:
            pieces.append((max(lo, w_lo), min(hi, w_hi)))
        return lo, hi

    lo0, hi0 = visit(line.z_obs)
    z = hi0
    while z < w_hi:
        z = z + step
        z = max(z, visit(z)[1])
    z = lo0
    while z > w_lo:
        z = z - step
        z = min(z, visit(z)[0])
    Z = IntervalSet(pieces, merge_tol=step)
    observed = (max(lo0, w_lo), min(hi0, w_hi))
    return LineSearch(Z, observed, calls)


def parametric_search(dataset: Dataset, Sigma: CovarianceModel, config: SearchConfig, line: LineParameterization, target, context: SearchContext | None = None) -> IntervalSet:
    """Truncation set ``{z : search(a + b z) generates target}`` within the search window."""
    return line_search(dataset, Sigma, config, line, target, context).Z


def _direction_for(afe: AfeResult, X: np.ndarray, j: int, Sigma: CovarianceModel) -> tuple[AugmentedDesign, TestDirection]:
    design = AugmentedDesign(X, afe.generated)
    return design, test_direction(design, j, Sigma)


def selective_test(dataset: Dataset, Sigma: CovarianceModel, config: SearchConfig, j: int, afe: AfeResult | None = None, context: SearchContext | None = None) -> SelectiveTestResult:
    """Selective p-value for coefficient ``j`` (1-based over ``m + k``) of the searched model."""
    start = time.perf_counter()
    context = context or SearchContext(dataset.X, Sigma, config)
    afe = afe or run_afe(dataset, Sigma, config, context)
    if afe.empty:
        raise EmptyGeneration("the search generated no features to test")
    if not 1 <= j <= dataset.m + afe.k:
        raise IndexOutOfRange(f"coefficient index {j} outside 1..{dataset.m + afe.k}")
    design, direction = _direction_for(afe, dataset.X, j, Sigma)
    line = nuisance_decompose(dataset.y, direction.eta, Sigma)
    ls = line_search(dataset, Sigma, config, line, afe.generated, context)
    p = selective_p_value(line.z_obs, ls.Z, line.sigma_eta_sq)
    return SelectiveTestResult(
        j=j,
        stat=line.z_obs,
        p_selective=p,
        Z=ls.Z,
        n_afe_calls=ls.n_afe_calls,
        wall_time=time.perf_counter() - start,
        sigma_eta_sq=line.sigma_eta_sq,
        feature=design.labels()[j - 1],
        extra={"oc_interval": IntervalSet([ls.observed_interval]).to_list(), "p_naive": classical_z_p_value(line.z_obs, line.sigma_eta_sq)},
    )
