"""Comparison procedures: over-conditioning, naive, Bonferroni and data splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_stats import AugmentedDesign, Dataset, aic, classical_z_p_value, test_direction
from .covariance import CovarianceModel
from .exceptions import SingularDesign
from .expressions import FeatureExpression
from .inference import LineCache, LineParameterization, interval_for_z
from .intervals import IntervalSet
from .search import AfeResult, ComparisonTrace, SearchConfig, run_afe
from .truncnorm import selective_p_value


def oc_interval(z_obs: float, line: LineParameterization, trace: ComparisonTrace, Sigma: CovarianceModel) -> IntervalSet:
    """The single invariance interval around the observed statistic, clipped to the search window."""
    lo, hi = interval_for_z(trace, line, z_obs, Sigma, LineCache(line, Sigma))
    w_lo, w_hi = line.window
    return IntervalSet([(max(lo, w_lo), min(hi, w_hi))])


def oc_p_value(z_obs: float, line: LineParameterization, trace: ComparisonTrace, Sigma: CovarianceModel) -> float:
    return selective_p_value(z_obs, oc_interval(z_obs, line, trace, Sigma), line.sigma_eta_sq)


def naive_p_value(z_obs: float, sigma_eta_sq: float) -> float:
    return classical_z_p_value(z_obs, sigma_eta_sq)


def bonferroni_multiplier(config: SearchConfig) -> int:
    """Number of feature-set outcomes counted per depth: ``N + N^2 + ... + N^D``."""
    N = config.max_nodes
    return sum(N**d for d in range(1, config.max_depth + 1))


def bonferroni_p_value(p_naive: float, config: SearchConfig) -> float:
    if not 0.0 <= p_naive <= 1.0:
        raise ValueError(f"p-value must lie in [0, 1], got {p_naive}")
    return min(1.0, bonferroni_multiplier(config) * p_naive)


@dataclass(frozen=True)
class SplitPlan:
    gen_indices: np.ndarray
    test_indices: np.ndarray
    seed: int


def make_split_plan(n: int, seed: int) -> SplitPlan:
    """Seeded 50/50 split; the generation half gets the extra row when ``n`` is odd."""
    if n < 2:
        raise ValueError("need at least two rows to split")
    perm = np.random.default_rng(seed).permutation(n)
    n_gen = math.ceil(n / 2)
    return SplitPlan(np.sort(perm[:n_gen]), np.sort(perm[n_gen:]), seed)


@dataclass
class SplitTest:
    feature: FeatureExpression
    j: int
    stat: float
    sigma_eta_sq: float
    p: float
    singular: bool = False


@dataclass
class SplitResult:
    plan: SplitPlan
    afe: AfeResult
    tests: list[SplitTest]

    @property
    def generated(self) -> tuple[FeatureExpression, ...]:
        return self.afe.generated


def data_split_test(dataset: Dataset, Sigma: CovarianceModel, config: SearchConfig, seed: int | None = None) -> SplitResult:
    """Generate features on one half of the rows and z-test them on the other.

    The search sees only the generation rows and the matching principal
    block of ``Sigma``; each generated coefficient is then tested by a
    classical z-test on the test rows. A singular test-half design reports
    ``p = 1`` with ``singular`` set.
    """
    n, m = dataset.X.shape
    if n < 2 * (m + 1):
        raise ValueError(f"data splitting needs n >= 2(m+1), got n={n}, m={m}")
    plan = make_split_plan(n, config.seed if seed is None else seed)
    gen = dataset.rows(plan.gen_indices)
    test = dataset.rows(plan.test_indices)
    Sg = Sigma.submatrix(plan.gen_indices)
    St = Sigma.submatrix(plan.test_indices)
    afe = run_afe(gen, Sg, config)
    tests = []
    if afe.empty:
        return SplitResult(plan, afe, tests)
    design = AugmentedDesign(test.X, afe.generated)
    for i, expr in enumerate(afe.generated):
        j = m + i + 1
        try:
            d = test_direction(design, j, St)
        except SingularDesign:
            tests.append(SplitTest(expr, j, math.nan, math.nan, 1.0, singular=True))
            continue
        z = float(d.eta @ test.y)
        tests.append(SplitTest(expr, j, z, d.sigma_eta_sq, classical_z_p_value(z, d.sigma_eta_sq)))
    return SplitResult(plan, afe, tests)


def searched_aic(dataset: Dataset, Sigma: CovarianceModel, generated) -> float:
    """AIC of ``[X, F]`` on the full data for a list of generated expressions."""
    design = AugmentedDesign(dataset.X, tuple(generated))
    return aic(design.columns, dataset.y, Sigma)

