"""Tune every solver on the synthetic logistic problem, then compare them.

Each method gets the same learning-rate grid plus a small grid over its own
structural parameters. A configuration is chosen by its median final gap on
tuning seeds 100-102 at a budget of 5e5 queries, then evaluated on seeds 0-4.
The chosen settings are the ones pinned in ``tests/test_acceptance.py``.

Run with ``python demos/tune_baselines.py`` (a few minutes on one core).
"""

import itertools
import sys

import numpy as np

from zofw import bench

BUDGET = 500_000
TUNE_SEEDS = (100, 101, 102)
EVAL_SEEDS = (0, 1, 2, 3, 4)
LRS = (0.5, 1, 2, 4, 8)

BASE = f"""
[experiment]
task = logistic

[solver]
budget = {BUDGET}
record_gap = false
gamma = harmonic
mu = constant
mu0 = 1e-5
"""

GRIDS = {
    "zsfw_dvr": [
        {"p": p, "sample_size": S, "b": b}
        for (p, S), b in itertools.product([(1.0, 1), (0.5, 20), (0.2, 20), (0.1, 14)], [5, 10, 25, 50])
    ],
    "zofwgd": [{}],
    "zofwsgd": [{"b": b, "batch": m} for b, m in itertools.product([5, 10, 25, 50], [14, 50, 200])],
    "acc_szofw": [{"q": q, "batch": m} for q, m in itertools.product([5, 14, 50], [5, 14, 50])],
}


def final_gap(solver, params, seed):
    ov = [f"solver.{k}={v}" for k, v in params.items()]
    cfg = bench.build_experiment(bench.parse_config(BASE, ov), solver=solver, seed=seed)
    out = bench.run_experiment(cfg)
    return out.trace.f_values[-1] - out.f_star


def tune(solver):
    best = None
    for struct, lr in itertools.product(GRIDS[solver], LRS):
        params = {**struct, "lr": lr}
        score = float(np.median([final_gap(solver, params, s) for s in TUNE_SEEDS]))
        if best is None or score < best[0]:
            best = (score, params)
    return best


def main():
    chosen = {}
    for solver in GRIDS:
        score, params = tune(solver)
        chosen[solver] = params
        print(f"{solver:10s} tuned median gap {score:.3g} with {params}", flush=True)
    print()
    med = {}
    for solver, params in chosen.items():
        gaps = [final_gap(solver, params, s) for s in EVAL_SEEDS]
        med[solver] = float(np.median(gaps))
        print(f"{solver:10s} eval median gap {med[solver]:.3g}  ({', '.join(f'{g:.2g}' for g in gaps)})")
    ok = med["zsfw_dvr"] <= med["zofwsgd"] and med["zsfw_dvr"] <= med["zofwgd"]
    ok &= med["acc_szofw"] <= 10 * med["zsfw_dvr"]
    print("ordering holds" if ok else "ordering does not hold")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
