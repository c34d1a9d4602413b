"""Command-line front end.

    afesi test data.csv --target y [--seed 7] [--sigma identity|ar:0.5|scaled:S2|estimated]
    afesi type1 --n 100 --m 4 --reps 1000 --out results/
    afesi power --n 150 --delta 0.6 --target-tests 300 --out results/
    afesi realdata data.csv --target y --n 100 --reps 200 --out results/

All randomness derives from ``--seed``: the ``test`` subcommand uses it as
the search seed; experiments use ``seed + r`` for replication ``r``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .core_stats import Dataset, estimate_variance
from .covariance import CovarianceModel
from .exceptions import AfesiError
from .expressions import BINARY_OPS, DEFAULT_OPS, UNARY_OPS
from .harness import ExperimentSpec, _jsonable, load_csv, run_experiment, write_outputs
from .pipeline import ALL_METHODS, analyze
from .search import SearchConfig


def _ops(text: str) -> tuple[str, ...]:
    ops = tuple(o.strip() for o in text.split(",") if o.strip())
    bad = [o for o in ops if o not in UNARY_OPS + BINARY_OPS]
    if bad or not ops:
        raise argparse.ArgumentTypeError(f"unknown transformations {bad}; choose from {UNARY_OPS + BINARY_OPS}")
    return ops


def _methods(text: str) -> tuple[str, ...]:
    ms = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in ms if m not in ALL_METHODS]
    if bad or not ms:
        raise argparse.ArgumentTypeError(f"unknown methods {bad}; choose from {ALL_METHODS}")
    return ms


def _alphas(text: str) -> tuple[float, ...]:
    return tuple(float(a) for a in text.split(",") if a.strip())


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _search_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("search")
    g.add_argument("--depth", type=_positive, default=6, help="maximum depth D (default 6)")
    g.add_argument("--nodes", type=_positive, default=3, help="candidates generated per depth N (default 3)")
    g.add_argument("--parents", type=_positive, default=3, help="parents kept per depth M (default 3)")
    g.add_argument("--gamma", type=_positive, default=2, help="no-improvement tolerance (default 2)")
    g.add_argument("--ops", type=_ops, default=DEFAULT_OPS, help="comma-separated transformations (default sin,expc,sqrtabs,mul)")
    g.add_argument("--collinearity-tol", type=float, default=1e-6, help="relative residual threshold (default 1e-6)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--alpha", type=float, default=0.05, help="significance level (default 0.05)")
    p.add_argument("--methods", type=_methods, default=ALL_METHODS, help="comma-separated subset of proposed,oc,naive,bonferroni,ds")


def _experiment_flags(p: argparse.ArgumentParser, n: int) -> None:
    p.add_argument("--n", type=_positive, default=n, help=f"sample size (default {n})")
    p.add_argument("--reps", type=_positive, default=1000, help="replications (default 1000)")
    p.add_argument("--threads", type=_positive, default=1, help="worker processes (default 1)")
    p.add_argument("--alphas", type=_alphas, default=(), help="extra levels reported in summary.json")
    p.add_argument("--test", dest="test_choice", choices=("random", "all"), default="random", help="generated features tested per replication (default random)")
    p.add_argument("--out", type=Path, required=True, help="output directory for records.csv and summary.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afesi", description="Selective inference for features generated by a seeded tree search.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="search one CSV dataset and test the generated features")
    t.add_argument("csv", type=Path)
    t.add_argument("--target", required=True, help="response column")
    t.add_argument("--sigma", default="identity", help="identity, scaled:S2, ar:RHO or estimated (default identity)")
    t.add_argument("--include-original", action="store_true", help="also test the original columns")
    t.add_argument("--timing", action="store_true", help="add wall_time_s to each result")
    t.add_argument("--out", type=Path, help="also write report.json here")
    _search_flags(t)

    t1 = sub.add_parser("type1", help="null replications")
    t1.add_argument("--m", type=_positive, default=4)
    t1.add_argument("--sigma", default="identity", help="identity, ar:RHO or estimated (default identity)")
    _experiment_flags(t1, 100)
    _search_flags(t1)

    pw = sub.add_parser("power", help="planted-signal replications")
    pw.add_argument("--m", type=_positive, default=4)
    pw.add_argument("--delta", type=float, default=0.6, help="signal strength (default 0.6)")
    pw.add_argument("--target-tests", type=int, default=300, help="matched tests to collect; 0 runs exactly --reps (default 300)")
    _experiment_flags(pw, 150)
    _search_flags(pw)

    rd = sub.add_parser("realdata", help="subsampling study on a CSV dataset")
    rd.add_argument("csv", type=Path)
    rd.add_argument("--target", required=True)
    _experiment_flags(rd, 100)
    _search_flags(rd)
    rd.set_defaults(methods=("proposed", "ds"))
    return parser


def _config(args) -> SearchConfig:
    return SearchConfig(
        max_depth=args.depth,
        max_nodes=args.nodes,
        max_parents=args.parents,
        gamma=args.gamma,
        seed=args.seed,
        ops=args.ops,
        collinearity_tol=args.collinearity_tol,
    )


def cmd_test(args) -> int:
    X, y, names = load_csv(args.csv, args.target)
    data = Dataset(X, y)
    if args.sigma == "estimated":
        Sigma = CovarianceModel.scaled(data.n, estimate_variance(data))
    else:
        Sigma = CovarianceModel.from_spec(args.sigma, data.n)
    report = analyze(data, Sigma, _config(args), args.methods, args.include_original, args.timing)
    report["columns"] = names
    report["alpha"] = args.alpha
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "report.json").write_text(text + "\n")
    print(text)
    return 0


def cmd_experiment(args) -> int:
    common = dict(
        n=args.n,
        reps=args.reps,
        base_seed=args.seed,
        alpha=args.alpha,
        alphas=args.alphas,
        methods=args.methods,
        afe=_config(args),
        test_choice=args.test_choice,
        threads=args.threads,
    )
    if args.command == "type1":
        spec = ExperimentSpec(mode="type1", m=args.m, sigma_kind=args.sigma, **common)
    elif args.command == "power":
        spec = ExperimentSpec(mode="power", m=args.m, delta=args.delta, target_tests=args.target_tests, **common)
    else:
        spec = ExperimentSpec(mode="realdata", csv_path=str(args.csv), target=args.target, **common)
    records, summary = run_experiment(spec)
    write_outputs(records, summary, args.out)
    for meth, row in summary["methods"].items():
        line = f"{meth:<11} tests={row['tests']:<6} rate={row['rate']:.4f} se={row['se']:.4f}"
        if meth in summary.get("mean_aic", {}):
            line += f" mean_aic={summary['mean_aic'][meth]:.3f}"
        print(line)
    if args.command == "power":
        print(f"matched tests: {summary['achieved_tests']} of {summary['target_tests']} in {summary['replications_used']} replications")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "test":
            return cmd_test(args)
        return cmd_experiment(args)
    except (AfesiError, ValueError, OSError) as exc:
        print(f"afesi: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
