"""Experiment configuration, runners and CSV traces for the ``zofw`` command.

Config files are INI text read with :mod:`configparser`. Every key is
addressed by its dotted path ``section.key``; keys may also be written
before the first section header in full dotted form (``solver.b = 4``).
Unknown keys are rejected. See the README for the full key table.
"""

from __future__ import annotations

import configparser
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .constraints import L1Ball, L2Ball
from .data import load_libsvm, max_abs_scale, scale_labels_pm1, synth_logistic, synth_regression
from .objectives import (
    CapabilityError,
    CorrentropyObjective,
    LogisticObjective,
    QuadraticExampleObjective,
    QueryOracle,
    SoftmaxAttackObjective,
    load_attack_model,
    toy_attack_targets,
)
from .schedules import GammaSchedule, MuSchedule
from .solvers import SOLVERS, SolverConfig, iterations_for_budget, pgd_reference

__all__ = [
    "ConfigError",
    "TASKS",
    "CSV_HEADER",
    "ExperimentConfig",
    "RunOutput",
    "parse_config",
    "load_config",
    "build_experiment",
    "run_experiment",
    "trace_rows",
    "write_trace_csv",
    "write_csv_atomic",
    "run_compare",
    "run_attack_eval",
    "thread_cap",
]

TASKS = ("logistic", "correntropy", "attack", "quadratic")
CONVEX_TASKS = ("logistic", "quadratic")
CSV_HEADER = ("iter", "queries", "f", "gap_obj", "gap_fw", "branch", "elapsed_ms")
MERGED_HEADER = ("solver", "seed", "iter", "queries", "metric", "value")

_ROOT = "__root__"

# key -> (type, default); None means "depends on task/objective"
SCHEMA = {
    "experiment.task": (str, "quadratic"),
    "experiment.solver": (str, "zsfw_dvr"),
    "experiment.seed": (int, 0),
    "experiment.out": (str, "zofw-out"),
    "quadratic.a": (float, 1.0),
    "quadratic.n": (int, 2),
    "data.path": (str, None),
    "data.declared_d": (int, None),
    "data.scale_features": (bool, False),
    "data.n": (int, 200),
    "data.d": (int, 50),
    "data.sparsity": (float, 0.2),
    "data.label_noise": (float, 0.1),
    "data.noise": (float, 0.1),
    "data.outlier_frac": (float, 0.1),
    "data.seed": (int, 1),
    "constraint.kind": (str, None),
    "constraint.r": (float, None),
    "solver.T": (int, None),
    "solver.budget": (int, None),
    "solver.p": (float, None),
    "solver.b": (int, None),
    "solver.sample_size": (int, None),
    "solver.batch": (int, None),
    "solver.q": (int, None),
    "solver.gamma": (str, None),
    "solver.gamma0": (float, None),
    "solver.lr": (float, 1.0),
    "solver.mu": (str, None),
    "solver.mu0": (float, None),
    "solver.R": (float, None),
    "solver.record_gap": (bool, None),
    "reference.iters": (int, 10_000),
    "reference.lr": (float, None),
    "attack.model": (str, None),
    "attack.targets": (int, 20),
    "attack.target_seed": (int, 0),
    "attack.target_class": (int, None),
    "attack.min_margin": (float, 0.0),
    "attack.checkpoint": (int, None),
    "compare.solvers": (list, None),
    "compare.seeds": (list, None),
}
SOLVER_KEYS = tuple(k.split(".", 1)[1] for k in SCHEMA if k.startswith("solver."))


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path at fault, if any."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


def _convert(key, typ, raw):
    raw = raw.strip()
    try:
        if typ is bool:
            states = configparser.ConfigParser.BOOLEAN_STATES
            if raw.lower() not in states:
                raise ValueError(raw)
            return states[raw.lower()]
        if typ is list:
            return [t.strip() for t in raw.split(",") if t.strip()]
        if typ is int:
            try:
                return int(raw)
            except ValueError:
                v = float(raw)  # allow 5e5
                if not v.is_integer():
                    raise
                return int(v)
        return typ(raw)
    except ValueError:
        raise ConfigError(f"cannot read {raw!r} as {typ.__name__}", key) from None


def _schema_for(key):
    if key in SCHEMA:
        return SCHEMA[key]
    parts = key.split(".")
    if len(parts) == 3 and parts[0] == "solver" and parts[1] in SOLVERS and parts[2] in SOLVER_KEYS:
        return SCHEMA["solver." + parts[2]]
    raise ConfigError("unknown key", key)


def parse_config(text: str, overrides=None) -> dict:
    """Parse config text into a flat ``{dotted_key: value}`` dict of typed values.

    ``overrides`` is an iterable of ``"key=value"`` strings applied last.
    """
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(f"[{_ROOT}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    raw = {}
    for sec in cp.sections():
        for k, v in cp.items(sec):
            key = k if sec == _ROOT else f"{sec}.{k}"
            if sec == _ROOT and "." not in k:
                raise ConfigError("keys outside a section must be dotted", k)
            raw[key] = v
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        raw[k.strip()] = v
    out = {}
    for key, v in raw.items():
        typ, _ = _schema_for(key)
        out[key] = _convert(key, typ, v)
    return out


def load_config(path, overrides=None) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_config(text, overrides)


def _get(flat, key, solver=None):
    if solver is not None:
        k = key.replace("solver.", f"solver.{solver}.", 1)
        if k in flat:
            return flat[k]
    if key in flat:
        return flat[key]
    return SCHEMA[key][1]


@dataclass
class ExperimentConfig:
    task: str
    solver: str
    seed: int
    objective: object
    constraint: object
    solver_config: SolverConfig
    out: str
    data_name: str = ""
    reference_iters: int = 10_000
    reference_lr: float | None = None
    checkpoint: int = 1
    notes: list = field(default_factory=list)


@dataclass
class RunOutput:
    config: ExperimentConfig
    x: np.ndarray
    trace: object
    f_star: float | None
    reference_gap: float | None = None
    asr: list | None = None

    def summary(self) -> str:
        c, tr = self.config, self.trace
        s = f"solver={c.solver} task={c.task} seed={c.seed} iters={len(tr) - 1} queries={int(tr.queries[-1])}"
        if self.f_star is not None:
            gaps = tr.f_values - self.f_star
            s += f" final_gap={gaps[-1]:.6g} best_gap={gaps.min():.6g} f_star={self.f_star:.10g}"
        else:
            s += f" final_f={tr.f_values[-1]:.6g} best_f={tr.f_values.min():.6g}"
        if self.asr:
            s += f" final_asr={self.asr[-1][1]:.4g}"
        return s


def _objective(flat, task):
    if task == "quadratic":
        a, n = _get(flat, "quadratic.a"), _get(flat, "quadratic.n")
        if n < 1:
            raise ConfigError("must be at least 1", "quadratic.n")
        return QuadraticExampleObjective(a, n), f"quadratic-a{a:g}-n{n}"
    if task == "attack":
        path = _get(flat, "attack.model")
        if path is not None and not os.path.exists(path):
            raise ConfigError(f"model file not found: {path}", "attack.model")
        W, c = load_attack_model(path)
        imgs, labs = toy_attack_targets(W, c, _get(flat, "attack.targets"), seed=_get(flat, "attack.target_seed"),
                                        target_class=_get(flat, "attack.target_class"),
                                        min_margin=_get(flat, "attack.min_margin"))
        return SoftmaxAttackObjective(imgs, labs, W, c), path or "bundled-toy-softmax"
    path = _get(flat, "data.path")
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"dataset file not found: {path}", "data.path")
        ds = load_libsvm(path, _get(flat, "data.declared_d"))
    else:
        n, d, sp, seed = (_get(flat, k) for k in ("data.n", "data.d", "data.sparsity", "data.seed"))
        if task == "logistic":
            ds, _ = synth_logistic(n, d, sp, _get(flat, "data.label_noise"), seed=seed)
        else:
            ds, _ = synth_regression(n, d, sp, _get(flat, "data.noise"), _get(flat, "data.outlier_frac"),
                                     seed=seed)
    if _get(flat, "data.scale_features"):
        ds = max_abs_scale(ds)
    if task == "logistic":
        try:
            ds = scale_labels_pm1(ds)
        except ValueError as exc:
            raise ConfigError(str(exc), "data.path") from None
        return LogisticObjective(ds), ds.name
    return CorrentropyObjective(ds), ds.name


def _constraint(flat, task):
    kind = _get(flat, "constraint.kind") or ("l2" if task == "attack" else "l1")
    r = _get(flat, "constraint.r")
    if r is None:
        r = {"quadratic": 1.0, "attack": 2.0}.get(task, 2.0)
    if not r > 0:
        raise ConfigError("radius must be positive", "constraint.r")
    if kind == "l1":
        return L1Ball(r)
    if kind == "l2":
        return L2Ball(r)
    raise ConfigError(f"unknown constraint {kind!r}, expected l1 or l2", "constraint.kind")


def _smoothness(obj):
    try:
        return obj.smoothness()
    except CapabilityError:
        return None


def _solver_config(flat, task, solver, obj, constraint, seed):
    g = lambda k: _get(flat, "solver." + k, solver)  # noqa: E731
    n, d = obj.n, obj.d
    convex = task in CONVEX_TASKS
    key = lambda k: f"solver.{k}"  # noqa: E731

    if convex:
        S = g("sample_size") or 1
        p = g("p") if g("p") is not None else S / n
        b = g("b") or 2
    else:
        S = g("sample_size") or max(1, round(math.sqrt(n)))
        p = g("p") if g("p") is not None else 1.0 / math.sqrt(n)
        b = g("b") or max(1, round(math.sqrt(d)))
    if S > n:
        raise ConfigError(f"sample_size {S} exceeds n = {n}", key("sample_size"))
    if not 0.0 < p <= 1.0:
        raise ConfigError("must lie in (0, 1]", key("p"))
    batch = g("batch") or S
    q = g("q") or max(1, round(math.sqrt(n)))
    for name, v in (("b", b), ("batch", batch), ("q", q)):
        if v < 1:
            raise ConfigError("must be at least 1", key(name))

    budget, T = g("budget"), g("T")
    if T is None:
        if budget is None:
            T = 200 if task == "quadratic" else 1000
        elif solver == "zsfw_dvr":
            T = iterations_for_budget(budget, n, b, p, S)
        else:
            per = {"zofwgd": 2 * d * n, "zofwsgd": 2 * b * batch,
                   "acc_szofw": (2 * d * n + 4 * d * batch * (q - 1)) / q}[solver]
            T = max(1, int(budget // per) + 1)
    if T < 1:
        raise ConfigError("must be at least 1", key("T"))

    dvr = solver == "zsfw_dvr"
    gkind = g("gamma") or (("convex_ss" if convex else "nonconvex_sqrt") if dvr else "harmonic")
    if gkind == "convex_ss":
        gamma = GammaSchedule.convex_ss(p, b, d, T)
    elif gkind == "nonconvex_sqrt":
        gamma = GammaSchedule.nonconvex_sqrt(T)
    elif gkind == "harmonic":
        if not g("lr") > 0:
            raise ConfigError("must be positive", key("lr"))
        gamma = GammaSchedule.harmonic(g("lr"))
    elif gkind == "constant":
        if g("gamma0") is None:
            raise ConfigError("constant step needs solver.gamma0", key("gamma0"))
        try:
            gamma = GammaSchedule.constant(g("gamma0"))
        except ValueError as exc:
            raise ConfigError(str(exc), key("gamma0")) from None
    else:
        raise ConfigError(f"unknown schedule {gkind!r}", key("gamma"))

    R = g("R") if g("R") is not None else constraint.diameter()
    sm = _smoothness(obj)
    mkind = g("mu") or (("thm1" if convex else "thm2") if dvr else "constant")
    if mkind == "thm1":
        if sm is None:
            raise ConfigError("thm1 needs smoothness constants this objective does not expose; "
                              "use solver.mu = constant with an explicit solver.mu0", key("mu"))
        mu = MuSchedule.thm1(sm[0], sm[1], R, p, S, d)
    elif mkind == "thm2":
        mu = MuSchedule.thm2(p, S, d, T, R)
    elif mkind == "constant":
        mu0 = g("mu0")
        if mu0 is None:
            if sm is None:
                raise ConfigError("this objective has unknown smoothness; set solver.mu0", key("mu0"))
            mu0 = 1e-5
        if not mu0 > 0:
            raise ConfigError("must be positive", key("mu0"))
        mu = MuSchedule.constant(mu0)
    else:
        raise ConfigError(f"unknown schedule {mkind!r}", key("mu"))

    record_gap = g("record_gap")
    if record_gap is None:
        record_gap = True
    return SolverConfig(T=T, seed=seed, p=p, b=b, sample_size=S, batch=batch, q=q, gamma=gamma, mu=mu,
                        record_gap=record_gap, max_queries=budget)


def build_experiment(flat, solver=None, seed=None, out=None) -> ExperimentConfig:
    task = _get(flat, "experiment.task")
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}, expected one of {', '.join(TASKS)}", "experiment.task")
    solver = solver or _get(flat, "experiment.solver")
    if solver not in SOLVERS:
        raise ConfigError(f"unknown solver {solver!r}, expected one of {', '.join(SOLVERS)}", "experiment.solver")
    seed = _get(flat, "experiment.seed") if seed is None else seed
    obj, name = _objective(flat, task)
    constraint = _constraint(flat, task)
    scfg = _solver_config(flat, task, solver, obj, constraint, seed)
    ck = _get(flat, "attack.checkpoint") or scfg.q
    if ck < 1:
        raise ConfigError("must be at least 1", "attack.checkpoint")
    return ExperimentConfig(task, solver, seed, obj, constraint, scfg, out or _get(flat, "experiment.out"),
                            name, _get(flat, "reference.iters"), _get(flat, "reference.lr"), ck)


def run_experiment(cfg: ExperimentConfig, callback=None) -> RunOutput:
    """Solve for the reference optimum (white-box tasks), then run the solver."""
    f_star = ref_gap = None
    if cfg.task != "attack":
        ref = pgd_reference(cfg.objective, cfg.constraint, iters=cfg.reference_iters, lr=cfg.reference_lr)
        f_star, ref_gap = ref.f, ref.gap
    oracle = QueryOracle(cfg.objective)
    res = SOLVERS[cfg.solver](oracle, cfg.constraint, cfg.solver_config, monitor=cfg.objective,
                              callback=callback)
    return RunOutput(cfg, res.x, res.trace, f_star, ref_gap)


def _num(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def trace_rows(trace, f_star=None):
    for r in trace:
        gap_obj = None if f_star is None else r.f_value - f_star
        yield (str(r.t), str(r.queries), _num(r.f_value), _num(gap_obj), _num(r.fw_gap), r.branch,
               _num(r.elapsed_ms))


def write_csv_atomic(path, header, rows):
    """Write comma-separated rows to ``path`` through a temp file and rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".csv", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trace_csv(path, out: RunOutput):
    write_csv_atomic(path, CSV_HEADER, trace_rows(out.trace, out.f_star))


def thread_cap(default=None) -> int:
    """Worker count for parallel sub-runs: ``ZOFW_THREADS`` if set, else the CPU count."""
    env = os.environ.get("ZOFW_THREADS")
    if env:
        try:
            v = int(env)
        except ValueError:
            raise ConfigError(f"ZOFW_THREADS must be an integer, got {env!r}") from None
        return max(1, v)
    return default or os.cpu_count() or 1


def _compare_job(args):
    flat, solver, seed, path = args
    try:
        cfg = build_experiment(flat, solver=solver, seed=seed)
        out = run_experiment(cfg)
        write_trace_csv(path, out)
        rows = [(solver, str(seed), *r) for r in trace_rows(out.trace, out.f_star)]
        return solver, seed, path, out.summary(), rows, None
    except Exception as exc:  # reported per sub-run; the others continue
        return solver, seed, path, None, [], f"{type(exc).__name__}: {exc}"


def _merged_rows(rows):
    for solver, seed, it, queries, f, gap_obj, gap_fw, _branch, _ms in rows:
        for metric, value in (("f", f), ("gap_obj", gap_obj), ("gap_fw", gap_fw)):
            if value != "":
                yield solver, seed, it, queries, metric, value


def run_compare(flat, out_dir, seed_override=None, workers=None, log=print):
    """Run each solver in ``compare.solvers`` for each seed in ``compare.seeds``.

    Writes ``<out_dir>/<solver>_seed<k>.csv`` per run and ``merged.csv`` in
    long format sorted by solver, seed and iteration. Returns the list of
    failures as ``(solver, seed, message)``.
    """
    solvers = _get(flat, "compare.solvers")
    if not solvers:
        raise ConfigError("no solvers to compare", "compare.solvers")
    for s in solvers:
        if s not in SOLVERS:
            raise ConfigError(f"unknown solver {s!r}", "compare.solvers")
    if seed_override is not None:
        seeds = [seed_override]
    else:
        seeds = [_convert("compare.seeds", int, s) for s in (_get(flat, "compare.seeds") or [])]
        seeds = seeds or [_get(flat, "experiment.seed")]
    # validate once up front so config errors surface as such
    for s in solvers:
        build_experiment(flat, solver=s, seed=seeds[0])
    jobs = [(flat, s, k, os.path.join(out_dir, f"{s}_seed{k}.csv")) for s in solvers for k in seeds]
    workers = min(workers or thread_cap(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_compare_job, jobs))
    else:
        results = [_compare_job(j) for j in jobs]
    failures, rows = [], []
    for solver, seed, path, summary, r, err in results:
        if err is None:
            log(f"{summary} csv={path}")
            rows.extend(r)
        else:
            log(f"FAILED solver={solver} seed={seed}: {err}")
            failures.append((solver, seed, err))
    rows.sort(key=lambda r: (r[0], int(r[1]), int(r[2])))
    write_csv_atomic(os.path.join(out_dir, "merged.csv"), MERGED_HEADER, _merged_rows(rows))
    return failures


def run_attack_eval(cfg: ExperimentConfig):
    """Run an attack and record ``(queries, asr)`` every ``cfg.checkpoint`` iterations.

    The success rate is computed from the model outside the query meter. The
    final iterate is always checkpointed.
    """
    if cfg.task != "attack":
        raise ConfigError("attack-eval needs experiment.task = attack", "experiment.task")
    curve = []
    last = {}

    def cb(t, x, queries):
        last.update(t=t, x=x, queries=queries)
        if t % cfg.checkpoint == 0:
            curve.append((queries, cfg.objective.attack_success_rate(x)))

    out = run_experiment(cfg, callback=cb)
    if last["t"] % cfg.checkpoint != 0:
        curve.append((last["queries"], cfg.objective.attack_success_rate(last["x"])))
    out.asr = curve
    return out
