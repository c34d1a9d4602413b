"""End-to-end analysis of a single dataset: search, then test every generated feature."""

from __future__ import annotations

import time

from .baselines import bonferroni_multiplier, bonferroni_p_value, data_split_test, oc_interval
from .core_stats import AugmentedDesign, Dataset, classical_z_p_value, test_direction
from .covariance import CovarianceModel
from .inference import SelectiveTestResult, line_search, nuisance_decompose
from .intervals import IntervalSet
from .search import SearchConfig, SearchContext, run_afe
from .truncnorm import selective_p_value

ALL_METHODS = ("proposed", "oc", "naive", "bonferroni", "ds")


def analyze(
    dataset: Dataset,
    Sigma: CovarianceModel,
    config: SearchConfig,
    methods=ALL_METHODS,
    include_original: bool = False,
    timing: bool = False,
) -> dict:
    """Run the search on ``dataset`` and test its coefficients with each method.

    Returns a JSON-ready report. Each tested coefficient carries one result
    per method in the shared result schema (``method``, ``j``, ``stat``,
    ``p_selective``, ``intervals``, ``n_afe_calls`` and, with ``timing``,
    ``wall_time_s``). Data splitting runs its own search on half the rows and
    is reported under ``"ds"``.
    """
    context = SearchContext(dataset.X, Sigma, config)
    afe = run_afe(dataset, Sigma, config, context)
    report = {
        "n": dataset.n,
        "m": dataset.m,
        "sigma": Sigma.describe(),
        "config": {
            "max_depth": config.max_depth,
            "max_nodes": config.max_nodes,
            "max_parents": config.max_parents,
            "gamma": config.gamma,
            "seed": config.seed,
            "ops": list(config.ops),
        },
        "generated": list(afe.keys),
        "final_depth": afe.final_depth,
        "aic_final": afe.best_node.aic,
        "bonferroni_multiplier": bonferroni_multiplier(config),
        "features": [],
    }
    if not afe.empty:
        design = AugmentedDesign(dataset.X, afe.generated)
        labels = design.labels()
        first = 1 if include_original else dataset.m + 1
        for j in range(first, design.p + 1):
            report["features"].append(_test_one(dataset, Sigma, config, afe, context, design, labels, j, methods, timing))
    if "ds" in methods:
        report["ds"] = _ds_report(dataset, Sigma, config)
    return report


def _test_one(dataset, Sigma, config, afe, context, design, labels, j, methods, timing):
    t0 = time.perf_counter()
    direction = test_direction(design, j, Sigma)
    line = nuisance_decompose(dataset.y, direction.eta, Sigma)
    p_naive = classical_z_p_value(line.z_obs, line.sigma_eta_sq)
    results = []

    def emit(method, p, Z, calls, elapsed):
        r = SelectiveTestResult(j, line.z_obs, p, Z, calls, elapsed, line.sigma_eta_sq, labels[j - 1], method)
        out = r.to_json()
        if not timing:
            out.pop("wall_time_s")
        results.append(out)

    if "proposed" in methods:
        ls = line_search(dataset, Sigma, config, line, afe.generated, context)
        emit("proposed", selective_p_value(line.z_obs, ls.Z, line.sigma_eta_sq), ls.Z, ls.n_afe_calls, time.perf_counter() - t0)
    if "oc" in methods:
        t1 = time.perf_counter()
        Zoc = oc_interval(line.z_obs, line, afe.trace, Sigma)
        emit("oc", selective_p_value(line.z_obs, Zoc, line.sigma_eta_sq), Zoc, 0, time.perf_counter() - t1)
    if "naive" in methods:
        emit("naive", p_naive, IntervalSet.real_line(), 0, 0.0)
    if "bonferroni" in methods:
        emit("bonferroni", bonferroni_p_value(p_naive, config), IntervalSet.real_line(), 0, 0.0)
    return {"j": j, "feature": labels[j - 1], "stat": line.z_obs, "sigma_eta_sq": line.sigma_eta_sq, "results": results}


def _ds_report(dataset, Sigma, config):
    split = data_split_test(dataset, Sigma, config)
    return {
        "generated": list(split.afe.keys),
        "gen_rows": split.plan.gen_indices.tolist(),
        "test_rows": split.plan.test_indices.tolist(),
        "results": [
            {
                "method": "ds",
                "j": t.j,
                "feature": t.feature.key,
                "stat": t.stat,
                "sigma_eta_sq": t.sigma_eta_sq,
                "p_selective": t.p,
                "intervals": IntervalSet.real_line().to_list(),
                "n_afe_calls": 1,
                "singular": t.singular,
            }
            for t in split.tests
        ],
    }
