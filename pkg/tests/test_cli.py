import csv

import numpy as np
import pytest

from zofw import bench
from zofw.cli import main

QUAD = "[experiment]\ntask = quadratic\n"
LOGISTIC = """
[experiment]
task = logistic

[data]
n = 40
d = 8

[solver]
budget = 20000

[compare]
solvers = zsfw_dvr, zofwgd, zofwsgd, acc_szofw
"""
ATTACK = """
[experiment]
task = attack

[attack]
targets = 10

[solver]
budget = 20000
"""


def write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_quadratic_defaults(tmp_path, capsys):
    cfg = write(tmp_path, QUAD)
    finals = []
    for seed in range(10):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "o"), "--seed", str(seed)]) == 0
        rows = read_csv(tmp_path / "o" / f"zsfw_dvr_seed{seed}.csv")
        assert tuple(rows[0]) == bench.CSV_HEADER
        assert len(rows) == 1 + 201
        finals.append(float(rows[-1][3]))
        q = [int(r[1]) for r in rows[1:]]
        assert q == sorted(q)
    assert np.median(finals) <= 1e-3
    assert "final_gap=" in capsys.readouterr().out


def test_run_is_deterministic(tmp_path):
    cfg = write(tmp_path, LOGISTIC)
    outs = []
    for k in range(2):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / f"r{k}")]) == 0
        outs.append([r[:-1] for r in read_csv(tmp_path / f"r{k}" / "zsfw_dvr_seed0.csv")])
    assert outs[0] == outs[1]


def test_missing_dataset_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path, "[experiment]\ntask = logistic\n[data]\npath = /no/such/file.svm\n")
    assert main(["run", "--config", cfg]) == 2
    assert "/no/such/file.svm" in capsys.readouterr().err


@pytest.mark.parametrize(
    "text, key",
    [
        ("[solver]\nbogus = 1\n", "solver.bogus"),
        ("[solver]\np = 2\n", "solver.p"),
        ("[solver]\nb = many\n", "solver.b"),
        ("[constraint]\nr = -1\n", "constraint.r"),
        ("[experiment]\ntask = ranking\n", "experiment.task"),
        ("[experiment]\nsolver = adam\n", "experiment.solver"),
    ],
)
def test_config_errors_name_the_key(tmp_path, capsys, text, key):
    cfg = write(tmp_path, QUAD + text if not text.startswith("[experiment]") else text)
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert key in capsys.readouterr().err


def test_unknown_smoothness_needs_explicit_mu(tmp_path, capsys):
    cfg = write(tmp_path, ATTACK + "mu = thm1\n")
    assert main(["attack-eval", "--config", cfg, "--out", str(tmp_path)]) == 2
    text = ATTACK.replace("task = attack", "task = attack\nsolver = zofwgd")
    assert main(["run", "--config", write(tmp_path, text, "c.ini"), "--out", str(tmp_path)]) == 2
    assert "solver.mu0" in capsys.readouterr().err


def test_dotted_keys_and_overrides():
    flat = bench.parse_config("solver.b = 3\n[solver]\nT = 5e2\n", ["solver.p=0.25"])
    assert flat == {"solver.b": 3, "solver.T": 500, "solver.p": 0.25}
    with pytest.raises(bench.ConfigError):
        bench.parse_config("b = 3\n")


def test_compare_four_solvers(tmp_path):
    cfg = write(tmp_path, LOGISTIC)
    out = tmp_path / "cmp"
    assert main(["compare", "--config", cfg, "--out", str(out)]) == 0
    for s in ("zsfw_dvr", "zofwgd", "zofwsgd", "acc_szofw"):
        assert (out / f"{s}_seed0.csv").exists()
    rows = read_csv(out / "merged.csv")
    assert tuple(rows[0]) == ("solver", "seed", "iter", "queries", "metric", "value")
    assert {r[0] for r in rows[1:]} == {"zsfw_dvr", "zofwgd", "zofwsgd", "acc_szofw"}
    keys = [(r[0], int(r[1]), int(r[2])) for r in rows[1:]]
    assert keys == sorted(keys)
    assert {r[4] for r in rows[1:]} == {"f", "gap_obj", "gap_fw"}


def test_compare_parallel_matches_serial(tmp_path, monkeypatch):
    cfg = write(tmp_path, LOGISTIC.replace("zsfw_dvr, zofwgd, zofwsgd, acc_szofw", "zsfw_dvr, zofwsgd")
                + "seeds = 1, 2\n")
    monkeypatch.setenv("ZOFW_THREADS", "1")
    assert main(["compare", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("ZOFW_THREADS", "2")
    assert main(["compare", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    a, b = read_csv(tmp_path / "a" / "merged.csv"), read_csv(tmp_path / "b" / "merged.csv")
    assert a == b
    assert {r[1] for r in a[1:]} == {"1", "2"}


def test_compare_empty_solver_list(tmp_path, capsys):
    cfg = write(tmp_path, LOGISTIC.replace("zsfw_dvr, zofwgd, zofwsgd, acc_szofw", ""))
    assert main(["compare", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "compare.solvers" in capsys.readouterr().err


def test_attack_eval(tmp_path):
    cfg = write(tmp_path, ATTACK)
    assert main(["attack-eval", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "zsfw_dvr_seed0_asr.csv")
    assert rows[0] == ["queries", "asr"]
    q = [int(r[0]) for r in rows[1:]]
    asr = [float(r[1]) for r in rows[1:]]
    assert asr[0] == 0.0
    assert all(0.0 <= a <= 1.0 for a in asr)
    assert q == sorted(q)
    trace = read_csv(tmp_path / "zsfw_dvr_seed0.csv")
    assert q[-1] == int(trace[-1][1])


def test_attack_eval_rejects_other_tasks(tmp_path):
    assert main(["attack-eval", "--config", write(tmp_path, QUAD)]) == 2


def test_stats(tmp_path, capsys):
    p = tmp_path / "d.svm"
    p.write_text("+1 3:0.5 7:1.0\n-1 1:2\n")
    assert main(["stats", str(p)]) == 0
    out = capsys.readouterr().out
    assert "n = 2" in out and "d = 7" in out and "nnz = 3" in out
    assert main(["stats", str(tmp_path / "missing.svm")]) == 2


def test_verify_quick(capsys):
    assert main(["verify", "--quick"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 16 and "16/16" in out


def test_usage_error():
    assert main(["frobnicate"]) == 2
