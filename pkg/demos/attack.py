"""Universal black-box perturbation against the bundled toy classifier.

The attack runs through the benchmark layer so the success rate is
recorded every few iterations. Prints the query/ASR curve.

Run with ``python demos/attack.py``.
"""

from zofw import bench

CONFIG = """
[experiment]
task = attack

[attack]
targets = 20

[solver]
budget = 100000
"""

cfg = bench.build_experiment(bench.parse_config(CONFIG), seed=0)
out = bench.run_attack_eval(cfg)
for queries, asr in out.asr[:: max(1, len(out.asr) // 10)]:
    print(f"{queries:>8d} queries  ASR {asr:.2f}")
print(out.summary())
