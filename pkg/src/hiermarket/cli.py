"""Command-line entry point: ``hiermarket {run,appendix,oracle-suite,ic-suite}``."""

from __future__ import annotations

import argparse
import sys
import time

from . import experiments as ex

SO_REGRET_TOL = 1e-9
PO_REGRET_TOL = 1e-9
IR_TOL = -1e-12


def _cmd_run(args) -> int:
    path = args.config_path or args.config
    if path is None:
        print("run: a config file is required", file=sys.stderr)
        return 2
    try:
        cfg = ex.ExperimentConfig.from_json(path)
    except (ex.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    out = args.out or cfg.output or "results"
    result = ex.run_experiment(cfg, jobs=args.jobs, out_dir=out)
    print(f"wrote {len(result.rows)} rows to {out}/results.csv")
    if args.summary:
        print("\n".join(result.summary_lines()))
    return 0


def _cmd_appendix(args) -> int:
    t0 = time.perf_counter()
    rows = ex.run_appendix_regression()
    elapsed = time.perf_counter() - t0
    for name, exp, got, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<22} expected {exp}  got {got}")
    print(f"elapsed {elapsed:.3f}s")
    return 0 if all(r[3] for r in rows) else 1


def _cmd_oracle(args) -> int:
    t0 = time.perf_counter()
    res = ex.oracle_suite(args.instances or 200, seed=args.seed or 0)
    bad = 0
    for kind, n in res["checked"].items():
        miss = res["mismatches"][kind]
        bad += len(miss)
        print(f"{'PASS' if not miss else 'FAIL'}  {kind:<10} {n} problems, {len(miss)} mismatches")
        for m in miss[:5]:
            print(f"      instance {m[0]} {m[1]}: greedy {m[2]!r} brute force {m[3]!r}")
    print(f"elapsed {time.perf_counter() - t0:.2f}s")
    return 1 if bad else 0


def _cmd_ic(args) -> int:
    t0 = time.perf_counter()
    res = ex.ic_suite(args.instances or 100, seed=1 if args.seed is None else args.seed)
    ok = True
    for beta, r in res["so_regret"].items():
        good = r <= SO_REGRET_TOL
        ok &= good
        print(f"{'PASS' if good else 'FAIL'}  SO max regret beta={beta}: {r:.3e}")
    good = res["po_regret"] <= PO_REGRET_TOL
    ok &= good
    print(f"{'PASS' if good else 'FAIL'}  PO max regret (regulated stage 1): {res['po_regret']:.3e}")
    good = res["min_truthful_so_payoff"] >= IR_TOL
    ok &= good
    print(f"{'PASS' if good else 'FAIL'}  min truthful SO payoff: {res['min_truthful_so_payoff']:.3e}")
    print(f"elapsed {time.perf_counter() - t0:.2f}s")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--seed", type=int, metavar="U64")
    common.add_argument("--jobs", type=int, default=1, metavar="N")
    common.add_argument("--summary", action="store_true", help="print per-beta means")
    common.add_argument("--instances", type=int, help="instance count for the suites")

    parser = argparse.ArgumentParser(prog="hiermarket", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    run = sub.add_parser("run", parents=[common], help="run a configured beta sweep")
    run.add_argument("config_path", nargs="?", metavar="CONFIG")
    run.set_defaults(func=_cmd_run)
    sub.add_parser("appendix", parents=[common], help="check the 12-channel worked example").set_defaults(
        func=_cmd_appendix)
    sub.add_parser("oracle-suite", parents=[common], help="greedy solvers vs enumeration").set_defaults(
        func=_cmd_oracle)
    sub.add_parser("ic-suite", parents=[common], help="misreport sweeps").set_defaults(func=_cmd_ic)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("--seed must be nonnegative", file=sys.stderr)
        return 2
    if args.jobs < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
