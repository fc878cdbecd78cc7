"""Monte-Carlo checks of the identities and bounds the solver relies on.

Each check returns a :class:`CheckResult` with the estimate, its target, the
tolerance used and a verdict. :func:`run_checks` runs the whole suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimators import tracker_full_update, tracker_minibatch_update, VRTracker
from .numerics import GaussianSampler
from .objectives import QuadraticExampleObjective, QueryOracle

__all__ = [
    "CheckResult",
    "second_moment_target",
    "check_second_moment",
    "check_gaussian_norm_moments",
    "check_bias_bound",
    "check_frozen_contraction",
    "check_frozen_expectation",
    "frozen_contraction_estimate",
    "run_checks",
    "SECOND_MOMENT_CASES",
    "CONTRACTION_CASES",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    estimate: float
    target: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        s = f"[{verdict}] {self.name}: estimate={self.estimate:.6g} target={self.target:.6g} tol={self.tolerance:.3g}"
        return s + (f" ({self.detail})" if self.detail else "")


def second_moment_target(alpha, b, d) -> float:
    """``E|alpha U U^T x - x|^2 / |x|^2`` for a ``d x b`` standard Gaussian ``U``."""
    return 1.0 + alpha**2 * b * (d + b + 1) - 2.0 * b * alpha


SECOND_MOMENT_CASES = [
    (d, b, kind) for d in (5, 20) for b in (1, 4) for kind in ("1/(d+b+1)", "1/b")
]


def _alpha(kind, d, b):
    return 1.0 / (d + b + 1) if kind == "1/(d+b+1)" else 1.0 / b


def check_second_moment(d, b, alpha, samples=100_000, seed=0, rtol=0.05, chunk=20_000) -> CheckResult:
    rng = GaussianSampler(seed)
    x = rng.normal(d)
    xx = float(x @ x)
    vals = []
    left = samples
    while left > 0:
        m = min(chunk, left)
        U = rng.normal((m, d, b))
        Ux = np.einsum("mdb,d->mb", U, x)
        r = alpha * np.einsum("mdb,mb->md", U, Ux) - x
        vals.append(np.einsum("md,md->m", r, r) / xx)
        left -= m
    v = np.concatenate(vals)
    est = float(v.mean())
    target = second_moment_target(alpha, b, d)
    se = float(v.std(ddof=1) / math.sqrt(samples))
    ok = abs(est - target) <= rtol * target
    return CheckResult(f"second moment d={d} b={b} alpha={alpha:.4g}", est, target, rtol * target, ok,
                       f"MC s.e. {se:.2g}")


def check_gaussian_norm_moments(d=10, power=2, samples=100_000, seed=1) -> CheckResult:
    """``d^{p/2} <= E|u|^p <= (d+p)^{p/2}``, each side allowed 3 standard errors."""
    u = GaussianSampler(seed).normal((samples, d))
    v = np.einsum("ij,ij->i", u, u) ** (power / 2)
    est = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(samples))
    lo, hi = d ** (power / 2), (d + power) ** (power / 2)
    ok = lo - 3 * se <= est <= hi + 3 * se
    return CheckResult(f"E|u|^{power} bounds d={d}", est, lo, 3 * se, ok, f"interval [{lo:.6g}, {hi:.6g}]")


def check_bias_bound(trials=10_000, d=4, seed=2) -> CheckResult:
    """Two-point bias against ``L mu |u|^2 / 2`` for ``h(x) = sum x_i^4``.

    ``L`` is the largest Hessian eigenvalue on the segment ``x +- mu u``,
    i.e. ``12 max_i max(|x_i - mu u_i|, |x_i + mu u_i|)^2``.
    """
    rng = GaussianSampler(seed)
    worst = 0.0
    for _ in range(trials):
        x = rng.normal(d)
        u = rng.normal(d)
        mu = 10.0 ** (-3.0 + 3.0 * rng.uniform())
        hp = np.sum((x + mu * u) ** 4)
        hm = np.sum((x - mu * u) ** 4)
        tau = (hp - hm - 2 * mu * float(4 * x**3 @ u)) / (2 * mu)
        L = 12.0 * float(np.max(np.maximum(np.abs(x + mu * u), np.abs(x - mu * u))) ** 2)
        bound = L * mu * float(u @ u) / 2
        worst = max(worst, abs(tau) / bound)
    return CheckResult("two-point bias bound (ratio |tau| / bound)", worst, 1.0, 1e-12, worst <= 1.0 + 1e-12,
                       f"{trials} random (x, u, mu)")


CONTRACTION_CASES = [(10, 2, 0.5, 1), (20, 4, 0.2, 2)]


def frozen_contraction_estimate(d, b, p, sample_size, replicas=10_000, steps=8, mu=1e-8, seed=3, a=1.0):
    """Per-step decay of ``E|g_t - grad f(x)|^2`` with the iterate held fixed.

    Runs the mixed update (full refresh with probability ``p``, otherwise the
    minibatch correction with ``x_next == x_prev``) on the quadratic example
    objective with ``n = d``. Returns ``(factor, standard_error)`` where the
    factor is the geometric per-step mean of the decay over ``steps`` steps.
    """
    obj = QuadraticExampleObjective(a, d)
    oracle = QueryOracle(obj)
    full = oracle.full()
    rng = GaussianSampler(seed)
    x = rng.normal(d)
    grad = obj.gradient(x)
    ratios = np.empty(replicas)
    for r in range(replicas):
        e0 = rng.normal(d)
        e0 /= np.linalg.norm(e0)
        tr = VRTracker(grad + e0, d, b, p, sample_size)
        for _ in range(steps):
            U = rng.gaussian_matrix(d, b)
            if rng.uniform() < p:
                tr = tracker_full_update(tr, full, x, U, mu)
            else:
                S = rng.indices(d, sample_size)
                tr = tracker_minibatch_update(tr, oracle.subset(S), x, x, U, mu)
        e = tr.g - grad
        ratios[r] = float(e @ e)
    m = float(ratios.mean())
    se_m = float(ratios.std(ddof=1) / math.sqrt(replicas))
    factor = m ** (1.0 / steps)
    se = factor / (steps * m) * se_m
    return factor, se


def check_frozen_contraction(d, b, p, sample_size, rate=None, replicas=10_000, steps=8, seed=3) -> CheckResult:
    """Measured decay factor must not exceed ``1 - rate`` beyond 3 standard errors.

    ``rate`` defaults to ``p b / (8 (d + b + 1))``.
    """
    if rate is None:
        rate = p * b / (8.0 * (d + b + 1))
    factor, se = frozen_contraction_estimate(d, b, p, sample_size, replicas, steps, seed=seed)
    bound = 1.0 - rate
    ok = factor - 3 * se <= bound
    exact = 1.0 - p * b / (d + b + 1)
    return CheckResult(f"frozen-point contraction d={d} b={b} p={p} |S|={sample_size}", factor, bound, 3 * se,
                       ok, f"frozen-point expectation {exact:.6g}")


def check_frozen_expectation(d, b, p, sample_size, replicas=10_000, steps=8, seed=4) -> CheckResult:
    """Measured frozen-point decay must match ``1 - p b / (d + b + 1)`` within 3 standard errors.

    At a fixed iterate with exact directional differences the minibatch branch
    leaves the error unchanged and a full refresh multiplies its expected
    square by ``1 - b/(d+b+1)``, so this is the exact expected factor. It
    catches implementations whose correction term is off even when the
    contraction bound still holds.
    """
    factor, se = frozen_contraction_estimate(d, b, p, sample_size, replicas, steps, seed=seed)
    exact = 1.0 - p * b / (d + b + 1)
    return CheckResult(f"frozen-point expectation d={d} b={b} p={p} |S|={sample_size}", factor, exact, 3 * se,
                       abs(factor - exact) <= 3 * se)


def run_checks(seed=0, samples=100_000, replicas=10_000, contraction_rate=None):
    """Run every check; ``contraction_rate`` overrides the claimed decay rate (a callable of d, b, p)."""
    out = []
    for k, (d, b, kind) in enumerate(SECOND_MOMENT_CASES):
        out.append(check_second_moment(d, b, _alpha(kind, d, b), samples, seed=seed + k))
    for k, power in enumerate((2, 4, 6)):
        out.append(check_gaussian_norm_moments(10, power, samples, seed=seed + 100 + k))
    out.append(check_bias_bound(seed=seed + 200))
    for k, (d, b, p, S) in enumerate(CONTRACTION_CASES):
        rate = None if contraction_rate is None else contraction_rate(d, b, p)
        out.append(check_frozen_contraction(d, b, p, S, rate, replicas, seed=seed + 300 + k))
        out.append(check_frozen_expectation(d, b, p, S, replicas, seed=seed + 400 + k))
    return out
