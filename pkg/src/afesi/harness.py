"""Monte-Carlo experiments: type I error, power, estimated variance and subsampled real data.

Replication ``r`` of an experiment with base seed ``s`` uses the integer
``s + r`` for everything it draws: the dataset (``X`` first, then the
noise), the index of the generated feature to test, and the search seed.
Replications share no state, so results do not depend on how many worker
processes run them.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .baselines import bonferroni_p_value, data_split_test, oc_p_value, searched_aic
from .core_stats import AugmentedDesign, Dataset, classical_z_p_value, estimate_variance, test_direction
from .covariance import CovarianceModel
from .exceptions import IngestError, SingularDesign
from .expressions import evaluate_expression, leaf, mul, unary
from .inference import line_search, nuisance_decompose
from .search import SearchConfig, SearchContext, run_afe
from .truncnorm import selective_p_value

log = logging.getLogger(__name__)

METHODS = ("proposed", "oc", "naive", "bonferroni", "ds")
MODES = ("type1", "power", "realdata", "single")

__all__ = [
    "ExperimentSpec",
    "ReplicationRecord",
    "estimate_variance",
    "gen_null_dataset",
    "gen_power_dataset",
    "load_csv",
    "run_experiment",
    "run_power_experiment",
    "run_realdata_experiment",
    "run_type1_experiment",
    "true_features",
    "write_outputs",
]


@dataclass(frozen=True)
class ExperimentSpec:
    """Settings of one Monte-Carlo experiment.

    ``sigma_kind`` is ``"identity"``, ``"ar:RHO"`` or ``"estimated"`` (data
    drawn with identity noise, inference with the plug-in ``sigma_hat^2 I``).
    ``test_choice`` is ``"random"`` (one uniformly chosen generated feature
    per replication) or ``"all"``.
    """

    mode: str = "type1"
    n: int = 100
    m: int = 4
    sigma_kind: str = "identity"
    delta: float = 0.0
    reps: int = 1000
    base_seed: int = 0
    alpha: float = 0.05
    alphas: tuple[float, ...] = ()
    methods: tuple[str, ...] = METHODS
    afe: SearchConfig = field(default_factory=SearchConfig)
    test_choice: str = "random"
    target_tests: int = 0
    budget_factor: int = 50
    csv_path: str = ""
    target: str = ""
    threads: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if any(not 0 < a < 1 for a in self.alphas):
            raise ValueError("alphas must lie in (0, 1)")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}")
        if self.test_choice not in ("random", "all"):
            raise ValueError("test_choice must be 'random' or 'all'")
        if self.mode == "power" and self.m < 4:
            raise ValueError("the power model needs m >= 4")
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "alphas", tuple(self.alphas))

    def covariance(self, n: int) -> CovarianceModel:
        if self.sigma_kind in ("identity", "estimated"):
            return CovarianceModel.identity(n)
        return CovarianceModel.from_spec(self.sigma_kind, n)

    def to_json(self) -> dict:
        out = asdict(self)
        out["afe"] = asdict(self.afe)
        out["afe"]["ops"] = list(self.afe.ops)
        out.pop("threads")
        return out


@dataclass
class ReplicationRecord:
    rep: int
    method: str
    j: int
    feature_key: str
    p: float
    rejected: bool
    matched_true: bool
    aic_final: float
    wall_time: float = 0.0


# wall_time varies run to run; it is summarized in summary.json instead
RECORD_COLUMNS = [f.name for f in fields(ReplicationRecord) if f.name != "wall_time"]


def gen_null_dataset(n: int, m: int, Sigma: CovarianceModel, seed: int) -> Dataset:
    """``X_ij ~ N(0, 1)`` and ``y ~ N(0, Sigma)``."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m))
    y = Sigma.color(rng.standard_normal(n))
    return Dataset(X, y)


def true_features():
    """The four expressions of the planted power model (columns 2 and 4, 1-based)."""
    e2 = unary("expc", leaf(1))
    p = mul(leaf(3), e2)
    return (e2, p, unary("sin", e2), unary("sqrtabs", p))


def gen_power_dataset(n: int, m: int, delta: float, seed: int):
    """Planted-signal dataset and the canonical keys of its true features.

    ``y = delta * (sum of the true features) + N(0, I)``; features are
    evaluated with the search's own clamped transformations.
    """
    if m < 4:
        raise ValueError("the power model needs m >= 4")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m))
    eps = rng.standard_normal(n)
    feats = true_features()
    cache: dict = {}
    signal = sum(evaluate_expression(f, X, cache) for f in feats)
    return Dataset(X, delta * signal + eps), frozenset(f.key for f in feats)


def _rates(records, alpha):
    out = {}
    methods = sorted({r.method for r in records if r.method != "none"}, key=lambda s: METHODS.index(s) if s in METHODS else 99)
    for meth in methods:
        ps = np.array([r.p for r in records if r.method == meth and not math.isnan(r.p)])
        k = len(ps)
        rate = float(np.mean(ps <= alpha)) if k else math.nan
        out[meth] = {"tests": k, "rejections": int(np.sum(ps <= alpha)), "rate": rate, "se": math.sqrt(rate * (1 - rate) / k) if k else math.nan}
    return out


def summarize(spec: ExperimentSpec, records: list[ReplicationRecord], extra: dict | None = None) -> dict:
    alphas = sorted(set((spec.alpha,) + spec.alphas))
    per_alpha = {f"{a:g}": _rates(records, a) for a in alphas}
    summary = {
        "spec": spec.to_json(),
        "methods": per_alpha[f"{spec.alpha:g}"],
        "by_alpha": per_alpha,
        "replications": len({r.rep for r in records}),
        "empty_replications": len({r.rep for r in records if r.method == "none"}),
        "wall_time_s": float(sum(r.wall_time for r in records)),
    }
    aics = {}
    for meth in summary["methods"]:
        per_rep = {}
        for r in records:
            if r.method == meth and math.isfinite(r.aic_final):
                per_rep[r.rep] = r.aic_final
        if per_rep:
            aics[meth] = float(np.mean(list(per_rep.values())))
    summary["mean_aic"] = aics
    if extra:
        summary.update(extra)
    return summary


def _choose(rng: np.random.Generator, k: int, how: str) -> list[int]:
    if how == "all":
        return list(range(k))
    return [int(rng.integers(k))]


def _proposed_family(dataset, Sigma, config, afe, context, positions, methods, alpha, rep, matched_keys=None):
    """Records for proposed/oc/naive/bonferroni on the searched model."""
    out = []
    m = dataset.m
    design = AugmentedDesign(dataset.X, afe.generated)
    aic_final = afe.best_node.aic
    for i in positions:
        j = m + i + 1
        key = afe.generated[i].key
        matched = matched_keys is not None and key in matched_keys
        t0 = time.perf_counter()
        direction = test_direction(design, j, Sigma)
        line = nuisance_decompose(dataset.y, direction.eta, Sigma)
        p_naive = classical_z_p_value(line.z_obs, line.sigma_eta_sq)
        ps = {}
        if "proposed" in methods:
            ls = line_search(dataset, Sigma, config, line, afe.generated, context)
            ps["proposed"] = selective_p_value(line.z_obs, ls.Z, line.sigma_eta_sq)
        t_prop = time.perf_counter() - t0
        if "oc" in methods:
            ps["oc"] = oc_p_value(line.z_obs, line, afe.trace, Sigma)
        if "naive" in methods:
            ps["naive"] = p_naive
        if "bonferroni" in methods:
            ps["bonferroni"] = bonferroni_p_value(p_naive, config)
        for meth, p in ps.items():
            out.append(ReplicationRecord(rep, meth, j, key, p, p <= alpha, matched, aic_final, t_prop if meth == "proposed" else 0.0))
    return out


def _ds_records(dataset, Sigma, config, rng, how, alpha, rep, matched_keys=None):
    t0 = time.perf_counter()
    split = data_split_test(dataset, Sigma, config)
    if not split.tests:
        return []
    aic_final = searched_aic(dataset, Sigma, split.generated)
    tests = split.tests
    if matched_keys is not None:
        tests = [t for t in tests if t.feature.key in matched_keys]
    elif how == "random":
        tests = [tests[i] for i in _choose(rng, len(tests), how)]
    dt = time.perf_counter() - t0
    return [
        ReplicationRecord(rep, "ds", t.j, t.feature.key, t.p, t.p <= alpha, matched_keys is not None, aic_final, dt)
        for t in tests
    ]


def _search_config(spec: ExperimentSpec, rep: int) -> SearchConfig:
    return spec.afe.replace(seed=spec.base_seed + rep)


def type1_replication(spec: ExperimentSpec, rep: int) -> list[ReplicationRecord]:
    seed = spec.base_seed + rep
    data = gen_null_dataset(spec.n, spec.m, spec.covariance(spec.n), seed)
    if spec.sigma_kind == "estimated":
        Sigma = CovarianceModel.scaled(spec.n, estimate_variance(data))
    else:
        Sigma = spec.covariance(spec.n)
    return _test_dataset(spec, rep, data, Sigma, np.random.default_rng([seed, 1]))


def _test_dataset(spec, rep, data, Sigma, rng, matched_keys=None):
    config = _search_config(spec, rep)
    t0 = time.perf_counter()
    context = SearchContext(data.X, Sigma, config)
    afe = run_afe(data, Sigma, config, context)
    records = []
    if afe.empty:
        records.append(ReplicationRecord(rep, "none", 0, "", math.nan, False, False, afe.best_node.aic, time.perf_counter() - t0))
    else:
        if matched_keys is not None:
            positions = [i for i, e in enumerate(afe.generated) if e.key in matched_keys]
        else:
            positions = _choose(rng, afe.k, spec.test_choice)
        family = [m for m in spec.methods if m != "ds"]
        records += _proposed_family(data, Sigma, config, afe, context, positions, family, spec.alpha, rep, matched_keys)
    if "ds" in spec.methods:
        records += _ds_records(data, Sigma, config, rng, spec.test_choice, spec.alpha, rep, matched_keys)
    return records


def power_replication(spec: ExperimentSpec, rep: int) -> list[ReplicationRecord]:
    seed = spec.base_seed + rep
    data, keys = gen_power_dataset(spec.n, spec.m, spec.delta, seed)
    Sigma = CovarianceModel.identity(spec.n)
    return _test_dataset(spec, rep, data, Sigma, np.random.default_rng([seed, 1]), matched_keys=keys)


def _map(func, spec, reps, threads):
    if threads <= 1:
        return [func(spec, r) for r in reps]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, [spec] * len(reps), reps, chunksize=max(1, len(reps) // (4 * threads))))


def run_type1_experiment(spec: ExperimentSpec):
    """Null replications; returns ``(records, summary)``."""
    if spec.mode != "type1":
        raise ValueError("spec.mode must be 'type1'")
    t0 = time.perf_counter()
    chunks = _map(type1_replication, spec, list(range(spec.reps)), spec.threads)
    records = [r for chunk in chunks for r in chunk]
    summary = summarize(spec, records, {"elapsed_s": time.perf_counter() - t0})
    return records, summary


def run_power_experiment(spec: ExperimentSpec):
    """Replicate until ``target_tests`` matched proposed tests exist or the budget runs out.

    The budget is ``budget_factor * target_tests`` replications. With
    ``target_tests == 0`` exactly ``reps`` replications run. Records are cut
    after the replication that reaches the target, so the output does not
    depend on the batch size used to schedule work.
    """
    if spec.mode != "power":
        raise ValueError("spec.mode must be 'power'")
    t0 = time.perf_counter()
    target = spec.target_tests
    budget = spec.budget_factor * target if target else spec.reps
    batch = max(1, 4 * max(1, spec.threads)) if target else budget
    counted = "proposed" if "proposed" in spec.methods else spec.methods[0]
    records: list[ReplicationRecord] = []
    achieved = 0
    rep = 0
    done = False
    while rep < budget and not done:
        reps = list(range(rep, min(budget, rep + batch)))
        for chunk in _map(power_replication, spec, reps, spec.threads):
            records += chunk
            achieved += sum(1 for r in chunk if r.method == counted)
            if target and achieved >= target:
                done = True
                break
        rep = reps[-1] + 1
    n_reps = len({r.rep for r in records}) if records else 0
    used = (max(r.rep for r in records) + 1) if records else 0
    rep_level = {}
    for meth in {r.method for r in records if r.method != "none"}:
        by_rep = {}
        for r in records:
            if r.method == meth:
                by_rep[r.rep] = by_rep.get(r.rep, False) or r.rejected
        rep_level[meth] = {"replications_tested": len(by_rep), "rate": float(np.mean(list(by_rep.values()))) if by_rep else math.nan}
    extra = {
        "target_tests": target,
        "achieved_tests": achieved,
        "replications_used": used,
        "replications_with_records": n_reps,
        "replication_level": rep_level,
        "elapsed_s": time.perf_counter() - t0,
    }
    return records, summarize(spec, records, extra)


def load_csv(path, target: str):
    """Read a headed numeric CSV into ``(X, y, column_names)``.

    Rows with missing cells are dropped; non-numeric cells raise
    :class:`IngestError`; constant feature columns are dropped with a warning.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if target not in header:
            raise IngestError(f"{path}: target column {target!r} not in header {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            cells = [c.strip() for c in row]
            if any(c == "" or c.lower() in ("na", "nan") for c in cells):
                continue
            vals = []
            for col, c in zip(header, cells):
                try:
                    vals.append(float(c))
                except ValueError:
                    raise IngestError(f"{path}:{lineno}: non-numeric value {c!r} in column {col!r}") from None
            rows.append(vals)
    if not rows:
        raise IngestError(f"{path}: no complete rows")
    data = np.array(rows)
    ti = header.index(target)
    y = data[:, ti]
    keep = [i for i in range(len(header)) if i != ti]
    names = []
    cols = []
    for i in keep:
        if np.ptp(data[:, i]) == 0:
            log.warning("dropping constant column %r", header[i])
            continue
        names.append(header[i])
        cols.append(i)
    if not cols:
        raise IngestError(f"{path}: no non-constant feature columns")
    return data[:, cols], y, names


def _standardize(a: np.ndarray) -> np.ndarray:
    sd = a.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (a - a.mean(axis=0)) / sd


def realdata_replication(spec: ExperimentSpec, rep: int, X_all=None, y_all=None) -> list[ReplicationRecord]:
    if X_all is None:
        X_all, y_all, _ = load_csv(spec.csv_path, spec.target)
    seed = spec.base_seed + rep
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(X_all.shape[0], size=spec.n, replace=False))
    data = Dataset(_standardize(X_all[rows]), _standardize(y_all[rows]))
    try:
        Sigma = CovarianceModel.scaled(spec.n, estimate_variance(data))
        return _test_dataset(spec, rep, data, Sigma, np.random.default_rng([seed, 1]))
    except SingularDesign as exc:
        log.warning("replication %d skipped: %s", rep, exc)
        return [ReplicationRecord(rep, "none", 0, "", math.nan, False, False, math.nan, 0.0)]


def run_realdata_experiment(csv_path, target: str, spec: ExperimentSpec):
    """Subsample ``n`` rows per replication, standardize, and compare proposed with ds.

    Noise variance is the plug-in residual variance of each subsample.
    """
    spec = ExperimentSpec(**{**{f.name: getattr(spec, f.name) for f in fields(spec)}, "mode": "realdata", "csv_path": str(csv_path), "target": target})
    X_all, y_all, names = load_csv(csv_path, target)
    if spec.n > X_all.shape[0]:
        raise ValueError(f"subsample size {spec.n} exceeds the {X_all.shape[0]} usable rows")
    t0 = time.perf_counter()
    if spec.threads <= 1:
        chunks = [realdata_replication(spec, r, X_all, y_all) for r in range(spec.reps)]
    else:
        chunks = _map(realdata_replication, spec, list(range(spec.reps)), spec.threads)
    records = [r for c in chunks for r in c]
    extra = {"columns": names, "rows_available": int(X_all.shape[0]), "elapsed_s": time.perf_counter() - t0}
    return records, summarize(spec, records, extra)


def run_experiment(spec: ExperimentSpec):
    if spec.mode == "type1":
        return run_type1_experiment(spec)
    if spec.mode == "power":
        return run_power_experiment(spec)
    if spec.mode == "realdata":
        return run_realdata_experiment(spec.csv_path, spec.target, spec)
    raise ValueError(f"mode {spec.mode!r} is not a Monte-Carlo experiment")


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_outputs(records, summary, out_dir) -> tuple[Path, Path]:
    """Write ``records.csv`` and ``summary.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rec_path = out / "records.csv"
    with rec_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in RECORD_COLUMNS])
    sum_path = out / "summary.json"
    sum_path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return rec_path, sum_path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj
