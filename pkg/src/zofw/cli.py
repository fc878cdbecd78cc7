"""``zofw`` command line: run, compare, attack-eval, verify, stats.

Exit codes: 0 success, 1 failed check or failed run, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import bench
from .data import dataset_stats, load_libsvm, max_abs_scale

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _overrides(args):
    out = list(args.set or [])
    if getattr(args, "scale_features", False):
        out.append("data.scale_features=true")
    return out


def _flat(args):
    if args.config is None:
        return bench.parse_config("", _overrides(args))
    return bench.load_config(args.config, _overrides(args))


def _out_dir(args, flat):
    return args.out or bench._get(flat, "experiment.out")


def cmd_run(args) -> int:
    flat = _flat(args)
    cfg = bench.build_experiment(flat, seed=args.seed)
    out_dir = _out_dir(args, flat)
    try:
        res = bench.run_experiment(cfg)
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    path = os.path.join(out_dir, f"{cfg.solver}_seed{cfg.seed}.csv")
    bench.write_trace_csv(path, res)
    print(f"{res.summary()} csv={path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    flat = _flat(args)
    failures = bench.run_compare(flat, _out_dir(args, flat), seed_override=args.seed)
    print(f"merged={os.path.join(_out_dir(args, flat), 'merged.csv')}")
    return EXIT_FAIL if failures else EXIT_OK


def cmd_attack_eval(args) -> int:
    flat = _flat(args)
    if bench._get(flat, "experiment.task") != "attack":
        raise bench.ConfigError("attack-eval needs experiment.task = attack", "experiment.task")
    cfg = bench.build_experiment(flat, seed=args.seed)
    out_dir = _out_dir(args, flat)
    try:
        res = bench.run_attack_eval(cfg)
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    base = os.path.join(out_dir, f"{cfg.solver}_seed{cfg.seed}")
    bench.write_trace_csv(base + ".csv", res)
    bench.write_csv_atomic(base + "_asr.csv", ("queries", "asr"),
                           ((str(q), repr(float(a))) for q, a in res.asr))
    print(f"{res.summary()} asr_csv={base}_asr.csv")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_checks

    seed = 0 if args.seed is None else args.seed
    kw = {"samples": 20_000, "replicas": 2_000} if args.quick else {}
    results = run_checks(seed=seed, **kw)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_stats(args) -> int:
    path = args.path
    if path is None:
        flat = _flat(args)
        path = bench._get(flat, "data.path")
        if path is None:
            raise bench.ConfigError("no dataset given; pass a path or set data.path", "data.path")
    if not os.path.exists(path):
        raise bench.ConfigError(f"dataset file not found: {path}", "data.path")
    ds = load_libsvm(path)
    if args.scale_features:
        ds = max_abs_scale(ds)
    for line in dataset_stats(ds).lines():
        print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zofw", description="Zeroth-order Frank-Wolfe experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", metavar="PATH", required=config_required, help="INI config file")
        p.add_argument("--seed", type=int, default=None, help="override the solver seed")
        p.add_argument("--out", metavar="DIR", default=None, help="output directory")
        p.add_argument("--scale-features", action="store_true", help="max-abs scale every feature")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")

    common(sub.add_parser("run", help="run one solver and write its trace CSV"))
    common(sub.add_parser("compare", help="run several solvers/seeds and merge their traces"))
    common(sub.add_parser("attack-eval", help="attack success rate against queries"))
    v = sub.add_parser("verify", help="Monte-Carlo checks of the estimator identities")
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--quick", action="store_true", help="fewer samples (looser, for smoke tests)")
    s = sub.add_parser("stats", help="statistics of a LIBSVM dataset")
    s.add_argument("path", nargs="?", default=None)
    common(s)
    return ap


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "attack-eval": cmd_attack_eval, "verify": cmd_verify,
            "stats": cmd_stats}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except bench.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
