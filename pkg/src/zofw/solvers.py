"""Zeroth-order Frank-Wolfe solvers, baselines and a projected-gradient reference.

All zeroth-order solvers receive a :class:`~zofw.objectives.QueryOracle` and
can only learn about the objective through metered function values. The
optional ``monitor`` objective is used for the trace only (objective value
and, when ``record_gap`` is set, the true Frank-Wolfe gap); it never touches
the meter. ``callback(t, x, queries)``, if given, is called after every trace
row.

Random draws for :func:`zsfw_dvr` come from one :class:`GaussianSampler` in
this order: ``U_0``; then per iteration ``U_{t+1}``, the uniform ``z_t``,
and, on the minibatch branch, the ``|S|`` component indices.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .constraints import fw_gap
from .estimators import (
    coordinate_estimate,
    estimate_batch,
    tracker_full_update,
    tracker_init,
    tracker_minibatch_update,
)
from .numerics import GaussianSampler
from .schedules import GammaSchedule, MuSchedule

__all__ = [
    "FULL",
    "MINIBATCH",
    "NA",
    "SolverConfig",
    "TraceRecord",
    "Trace",
    "SolverResult",
    "ReferenceSolution",
    "zsfw_dvr",
    "zofwgd",
    "zofwsgd",
    "acc_szofw",
    "pgd_reference",
    "zsfw_dvr_queries",
    "zofwgd_queries",
    "zofwsgd_queries",
    "acc_szofw_queries",
    "iterations_for_budget",
    "SOLVERS",
]

log = logging.getLogger(__name__)

FULL = "FULL"
MINIBATCH = "MINIBATCH"
NA = "N/A"


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters shared by all solvers.

    ``p``, ``b`` and ``sample_size`` drive :func:`zsfw_dvr`; ``batch`` is the
    minibatch size of :func:`zofwsgd` and :func:`acc_szofw`, ``q`` the epoch
    length of the latter. ``gamma`` defaults to ``harmonic(2)`` and ``mu`` to
    ``constant(1e-5)``. ``max_queries`` stops a run at the first iteration
    boundary where the meter has reached the budget.
    """

    T: int
    seed: int = 0
    p: float = 1.0
    b: int = 1
    sample_size: int = 1
    batch: int = 1
    q: int = 1
    gamma: GammaSchedule | None = None
    mu: MuSchedule | None = None
    record_gap: bool = False
    max_queries: int | None = None

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("T must be non-negative")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")
        for name in ("b", "sample_size", "batch", "q"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")

    @property
    def gamma_schedule(self) -> GammaSchedule:
        return self.gamma if self.gamma is not None else GammaSchedule.harmonic(2.0)

    @property
    def mu_schedule(self) -> MuSchedule:
        return self.mu if self.mu is not None else MuSchedule.constant(1e-5)


@dataclass
class TraceRecord:
    t: int
    queries: int
    f_value: float
    fw_gap: float | None
    branch: str
    elapsed_ms: float


@dataclass
class Trace:
    records: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, k):
        return self.records[k]

    @property
    def queries(self) -> np.ndarray:
        return np.array([r.queries for r in self.records], dtype=np.int64)

    @property
    def f_values(self) -> np.ndarray:
        return np.array([r.f_value for r in self.records])

    @property
    def fw_gaps(self) -> np.ndarray:
        return np.array([np.nan if r.fw_gap is None else r.fw_gap for r in self.records])

    @property
    def branches(self) -> list:
        return [r.branch for r in self.records]

    def best_f(self, budget: int | None = None) -> float:
        """Lowest recorded objective among rows within ``budget`` queries."""
        q, f = self.queries, self.f_values
        ok = np.ones(len(q), bool) if budget is None else q <= budget
        return float(np.min(f[ok])) if ok.any() else float("nan")

    def final_f(self, budget: int | None = None) -> float:
        q, f = self.queries, self.f_values
        ok = np.ones(len(q), bool) if budget is None else q <= budget
        return float(f[ok][-1]) if ok.any() else float("nan")

    def running_best(self) -> np.ndarray:
        return np.minimum.accumulate(self.f_values)


class SolverResult(NamedTuple):
    x: np.ndarray
    trace: Trace
    branches: list


class ReferenceSolution(NamedTuple):
    x: np.ndarray
    f: float
    gap: float
    iterations: int


class _Recorder:
    def __init__(self, monitor, constraint, record_gap, callback=None):
        if record_gap and monitor is None:
            raise ValueError("record_gap needs a white-box monitor objective")
        self.monitor = monitor
        self.constraint = constraint
        self.record_gap = record_gap
        self.callback = callback
        self.trace = Trace()
        self._t0 = time.perf_counter()

    def __call__(self, t, x, queries, branch):
        f = self.monitor.value(x) if self.monitor is not None else float("nan")
        gap = None
        if self.record_gap:
            gap = fw_gap(self.monitor.gradient(x), x, self.constraint)
        ms = (time.perf_counter() - self._t0) * 1e3
        self.trace.records.append(TraceRecord(t, int(queries), f, gap, branch, ms))
        if self.callback is not None:
            self.callback(t, x, int(queries))

    def warn(self, msg):
        if not self.trace.warnings or self.trace.warnings[-1] != msg:
            log.warning(msg)
        self.trace.warnings.append(msg)


def _mu(rec, schedule, t, gamma):
    mu, clamped = schedule.at(t, gamma)
    if clamped:
        rec.warn(f"mu clamped to floor at t={t}")
    return mu


def _start(oracle, x0):
    x = np.zeros(oracle.d) if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != (oracle.d,):
        raise ValueError("x0 has the wrong dimension")
    return x


def _out_of_budget(cfg, oracle):
    return cfg.max_queries is not None and oracle.queries >= cfg.max_queries


def zsfw_dvr(oracle, constraint, cfg: SolverConfig, monitor=None, x0=None, callback=None) -> SolverResult:
    """Zeroth-order stochastic Frank-Wolfe with double variance reduction.

    Keeps a gradient tracker ``g_t``. Each iteration takes a Frank-Wolfe step
    towards ``lmo(g_t)``, then with probability ``p`` refreshes ``g`` from
    ``b`` Gaussian directions on the full objective (``2 n b`` queries),
    otherwise adds the change of a ``|S|``-sample minibatch estimate between
    the old and new iterate, using the same directions and radius at both
    (``4 b |S|`` queries). Initialisation costs ``2 n b`` queries.

    Returns
    -------
    SolverResult
        Final iterate ``x_T``, the trace (``T + 1`` rows, row ``t`` describes
        ``x_t``) and the list of branches taken, one per iteration.
    """
    n, d = oracle.n, oracle.d
    if cfg.sample_size > n:
        raise ValueError(f"sample_size {cfg.sample_size} exceeds n = {n}")
    gamma, mus = cfg.gamma_schedule, cfg.mu_schedule
    rng = GaussianSampler(cfg.seed)
    rec = _Recorder(monitor, constraint, cfg.record_gap, callback)
    full = oracle.full()

    x = _start(oracle, x0)
    U = rng.gaussian_matrix(d, cfg.b)
    tracker = tracker_init(full, x, U, _mu(rec, mus, 0, gamma.at(0)), cfg.p, cfg.sample_size)
    rec(0, x, oracle.queries, NA)
    branches = []
    for t in range(cfg.T):
        if _out_of_budget(cfg, oracle):
            break
        step = gamma.at(t)
        s = constraint.lmo(tracker.g)
        x_next = x + step * (s - x)
        U = rng.gaussian_matrix(d, cfg.b)
        z = rng.uniform()
        mu = _mu(rec, mus, t + 1, gamma.at(t + 1))
        try:
            if z < cfg.p:
                tracker = tracker_full_update(tracker, full, x_next, U, mu)
                branch = FULL
            else:
                S = rng.indices(n, cfg.sample_size)
                tracker = tracker_minibatch_update(tracker, oracle.subset(S), x, x_next, U, mu)
                branch = MINIBATCH
        except FloatingPointError as exc:
            raise FloatingPointError(f"iteration {t}: {exc}") from exc
        x = x_next
        branches.append(branch)
        rec(t + 1, x, oracle.queries, branch)
    return SolverResult(x, rec.trace, branches)


def zofwgd(oracle, constraint, cfg: SolverConfig, monitor=None, x0=None, callback=None) -> SolverResult:
    """Deterministic zeroth-order Frank-Wolfe.

    Coordinate-wise central differences of the full objective at every
    iteration (``2 d n`` queries), then a Frank-Wolfe step.
    """
    gamma, mus = cfg.gamma_schedule, cfg.mu_schedule
    rec = _Recorder(monitor, constraint, cfg.record_gap, callback)
    full = oracle.full()
    x = _start(oracle, x0)
    rec(0, x, oracle.queries, NA)
    for t in range(cfg.T):
        if _out_of_budget(cfg, oracle):
            break
        step = gamma.at(t)
        v = coordinate_estimate(full, x, _mu(rec, mus, t, step))
        x = x + step * (constraint.lmo(v) - x)
        rec(t + 1, x, oracle.queries, NA)
    return SolverResult(x, rec.trace, [])


def zofwsgd(oracle, constraint, cfg: SolverConfig, monitor=None, x0=None, callback=None) -> SolverResult:
    """Stochastic zeroth-order Frank-Wolfe.

    Each iteration draws ``b`` fresh directions and a minibatch of ``batch``
    components with replacement, and steps towards the LMO of their two-point
    estimate (``2 b batch`` queries).
    """
    n, d = oracle.n, oracle.d
    gamma, mus = cfg.gamma_schedule, cfg.mu_schedule
    rng = GaussianSampler(cfg.seed)
    rec = _Recorder(monitor, constraint, cfg.record_gap, callback)
    x = _start(oracle, x0)
    rec(0, x, oracle.queries, NA)
    for t in range(cfg.T):
        if _out_of_budget(cfg, oracle):
            break
        step = gamma.at(t)
        U = rng.gaussian_matrix(d, cfg.b)
        S = rng.indices(n, cfg.batch)
        v = estimate_batch(oracle.subset(S), x, U, _mu(rec, mus, t, step))
        x = x + step * (constraint.lmo(v) - x)
        rec(t + 1, x, oracle.queries, NA)
    return SolverResult(x, rec.trace, [])


def acc_szofw(oracle, constraint, cfg: SolverConfig, monitor=None, x0=None, callback=None) -> SolverResult:
    """SPIDER-style zeroth-order Frank-Wolfe with coordinate estimates.

    Every ``q`` iterations the estimate ``v`` is rebuilt from coordinate
    differences of the full objective (``2 d n`` queries); in between it is
    corrected by the change of a minibatch coordinate estimate from the
    previous iterate to the current one (``4 d batch`` queries).
    """
    n = oracle.n
    gamma, mus = cfg.gamma_schedule, cfg.mu_schedule
    rng = GaussianSampler(cfg.seed)
    rec = _Recorder(monitor, constraint, cfg.record_gap, callback)
    full = oracle.full()
    x = _start(oracle, x0)
    x_prev = x
    v = None
    rec(0, x, oracle.queries, NA)
    for t in range(cfg.T):
        if _out_of_budget(cfg, oracle):
            break
        step = gamma.at(t)
        mu = _mu(rec, mus, t, step)
        if t % cfg.q == 0:
            v = coordinate_estimate(full, x, mu)
            branch = FULL
        else:
            h = oracle.subset(rng.indices(n, cfg.batch))
            v = v + coordinate_estimate(h, x, mu) - coordinate_estimate(h, x_prev, mu)
            branch = MINIBATCH
        x_prev = x
        x = x + step * (constraint.lmo(v) - x)
        rec(t + 1, x, oracle.queries, branch)
    return SolverResult(x, rec.trace, [r.branch for r in rec.trace.records[1:]])


SOLVERS = {
    "zsfw_dvr": zsfw_dvr,
    "zofwgd": zofwgd,
    "zofwsgd": zofwsgd,
    "acc_szofw": acc_szofw,
}


def zsfw_dvr_queries(branches, n, b, sample_size) -> int:
    full = sum(1 for br in branches if br == FULL)
    mini = sum(1 for br in branches if br == MINIBATCH)
    return 2 * n * b * (1 + full) + 4 * b * sample_size * mini


def zofwgd_queries(iterations, n, d) -> int:
    return 2 * d * n * iterations


def zofwsgd_queries(iterations, b, batch) -> int:
    return 2 * b * batch * iterations


def acc_szofw_queries(branches, n, d, batch) -> int:
    full = sum(1 for br in branches if br == FULL)
    mini = sum(1 for br in branches if br == MINIBATCH)
    return 2 * d * n * full + 4 * d * batch * mini


def iterations_for_budget(budget, n, b, p, sample_size) -> int:
    """Number of ZSFW-DVR iterations whose expected cost fits in ``budget``."""
    per_iter = p * 2 * n * b + (1 - p) * 4 * b * sample_size
    return max(1, int((budget - 2 * n * b) // per_iter))


def pgd_reference(obj, constraint, iters=10_000, lr=None, x0=None, tol=0.0) -> ReferenceSolution:
    """Projected gradient descent with white-box gradients.

    The step defaults to ``1/L`` and is halved whenever a step fails to
    decrease the objective. Stops after ``iters`` steps, when no decrease is
    possible, or when the Frank-Wolfe gap drops to ``tol``. Returns the best
    iterate with its value and Frank-Wolfe gap (an optimality certificate for
    convex problems).
    """
    if lr is None:
        lr = 1.0 / obj.smoothness()[0]
    x = np.zeros(obj.d) if x0 is None else constraint.project(np.asarray(x0, dtype=np.float64))
    fx = obj.value(x)
    k = 0
    for k in range(1, iters + 1):
        g = obj.gradient(x)
        if tol > 0 and fw_gap(g, x, constraint) <= tol:
            break
        while True:
            xn = constraint.project(x - lr * g)
            fn = obj.value(xn)
            if fn <= fx or lr < 1e-16:
                break
            lr *= 0.5
        if fn > fx or np.array_equal(xn, x):
            break
        x, fx = xn, fn
    return ReferenceSolution(x, fx, fw_gap(obj.gradient(x), x, constraint), k)
