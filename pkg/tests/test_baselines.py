import math

import numpy as np
import pytest
from scipy import stats

from afesi import (
    AugmentedDesign,
    CovarianceModel,
    SearchConfig,
    SearchContext,
    bonferroni_multiplier,
    bonferroni_p_value,
    data_split_test,
    line_search,
    make_split_plan,
    nuisance_decompose,
    oc_interval,
    oc_p_value,
    run_afe,
    selective_p_value,
    test_direction,
)
from afesi.baselines import searched_aic
from afesi.harness import ExperimentSpec, run_type1_experiment
from conftest import SMALL, quad_mass, random_dataset


def _instances(count, config=SearchConfig()):
    seed = 0
    while count:
        data = random_dataset(seed, n=30, m=3, signal=0.5)
        S = CovarianceModel.identity(30)
        cfg = config.replace(seed=seed)
        ctx = SearchContext(data.X, S, cfg)
        res = run_afe(data, S, cfg, ctx)
        seed += 1
        if res.empty:
            continue
        d = test_direction(AugmentedDesign(data.X, res.generated), data.m + 1, S)
        line = nuisance_decompose(data.y, d.eta, S)
        count -= 1
        yield data, S, cfg, ctx, res, line


def test_oc_subset_of_z():
    for data, S, cfg, ctx, res, line in _instances(10):
        Z = line_search(data, S, cfg, line, res.generated, ctx).Z
        Zoc = oc_interval(line.z_obs, line, res.trace, S)
        assert (Zoc & Z) == Zoc or abs((Zoc & Z).measure() - Zoc.measure()) < 1e-9


def test_oc_equals_proposed_when_z_is_one_interval():
    hits = 0
    for data, S, cfg, ctx, res, line in _instances(15, SMALL):
        Z = line_search(data, S, cfg, line, res.generated, ctx).Z
        Zoc = oc_interval(line.z_obs, line, res.trace, S)
        if len(Z) == 1 and Z.intervals[0] == pytest.approx(Zoc.intervals[0], abs=1e-9):
            hits += 1
            assert oc_p_value(line.z_obs, line, res.trace, S) == pytest.approx(selective_p_value(line.z_obs, Z, line.sigma_eta_sq), abs=1e-9)
    assert hits >= 1


def test_oc_quadrature():
    for data, S, cfg, ctx, res, line in _instances(3):
        (lo, hi), = oc_interval(line.z_obs, line, res.trace, S).intervals
        sd = math.sqrt(line.sigma_eta_sq)
        t = abs(line.z_obs)
        den = quad_mass([(lo, hi)], 0.0, sd)
        num = quad_mass([(max(lo, t), max(hi, t)), (min(lo, -t), min(hi, -t))], 0.0, sd)
        assert oc_p_value(line.z_obs, line, res.trace, S) == pytest.approx(float(num / den), abs=1e-8)


def test_bonferroni():
    assert bonferroni_multiplier(SearchConfig(max_depth=6, max_nodes=3)) == 1092
    assert bonferroni_p_value(0.0, SearchConfig()) == 0.0
    assert bonferroni_p_value(0.01, SearchConfig()) == 1.0
    ps = np.linspace(0, 1, 101)
    out = [bonferroni_p_value(p, SearchConfig(max_depth=2, max_nodes=2, max_parents=2)) for p in ps]
    assert all(a <= b for a, b in zip(out, out[1:])) and max(out) <= 1.0
    with pytest.raises(ValueError):
        bonferroni_p_value(1.5, SearchConfig())


class TestSplit:
    def test_plan(self):
        plan = make_split_plan(11, 3)
        assert len(plan.gen_indices) == 6 and len(plan.test_indices) == 5
        assert set(plan.gen_indices).isdisjoint(plan.test_indices)
        assert sorted(set(plan.gen_indices) | set(plan.test_indices)) == list(range(11))
        np.testing.assert_array_equal(make_split_plan(11, 3).gen_indices, plan.gen_indices)

    def test_deterministic(self):
        data = random_dataset(0, n=40, m=3, signal=1.0)
        S = CovarianceModel.identity(40)
        a = data_split_test(data, S, SearchConfig(seed=4))
        b = data_split_test(data, S, SearchConfig(seed=4))
        np.testing.assert_array_equal(a.plan.test_indices, b.plan.test_indices)
        assert [t.p for t in a.tests] == [t.p for t in b.tests]

    def test_generation_never_sees_test_rows(self):
        # changing test-half responses cannot change what the search generates
        data = random_dataset(1, n=40, m=3, signal=1.0)
        S = CovarianceModel.ar_power(40, 0.5)
        cfg = SearchConfig(seed=2)
        a = data_split_test(data, S, cfg)
        y = np.array(data.y)
        y[a.plan.test_indices] = 100.0
        b = data_split_test(data.with_response(y), S, cfg)
        assert a.afe.keys == b.afe.keys

    def test_p_values_are_z_tests_on_test_half(self):
        data = random_dataset(3, n=40, m=3, signal=1.0)
        S = CovarianceModel.identity(40)
        res = data_split_test(data, S, SearchConfig(seed=1))
        test = data.rows(res.plan.test_indices)
        design = AugmentedDesign(test.X, res.generated)
        beta = np.linalg.lstsq(design.columns, test.y, rcond=None)[0]
        for t in res.tests:
            assert t.stat == pytest.approx(beta[t.j - 1], abs=1e-9)
            assert 0.0 <= t.p <= 1.0

    def test_too_small(self):
        with pytest.raises(ValueError):
            data_split_test(random_dataset(0, n=6, m=3), CovarianceModel.identity(6), SearchConfig())

    def test_null_uniform(self):
        spec = ExperimentSpec(mode="type1", n=60, m=3, reps=1000, methods=("ds",), base_seed=0)
        records, _ = run_type1_experiment(spec)
        ps = [r.p for r in records if r.method == "ds"]
        assert len(ps) > 900
        assert stats.kstest(ps, "uniform").pvalue > 0.05


def test_searched_aic():
    data = random_dataset(0, n=30, m=3)
    S = CovarianceModel.identity(30)
    res = run_afe(data, S, SearchConfig(seed=1))
    assert searched_aic(data, S, res.generated) == pytest.approx(res.best_node.aic, rel=1e-10)
