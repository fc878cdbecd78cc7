"""Zeroth-order gradient estimators and the variance-reduced tracker.

A "function" here is anything callable on a single point that returns a
float. If it also has a ``batch(X)`` method (as the views handed out by
:class:`~zofw.objectives.QueryOracle` do), all stencil points are evaluated
in one call; the values and the query count are the same either way.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

MU_FLOOR = 1e-12

__all__ = [
    "MU_FLOOR",
    "EstimatorError",
    "TwoPointConfig",
    "VRTracker",
    "estimate_direction",
    "estimate_batch",
    "coordinate_estimate",
    "tracker_init",
    "tracker_full_update",
    "tracker_minibatch_update",
]


class EstimatorError(FloatingPointError):
    """A function query returned a non-finite value."""

    def __init__(self, x, directions, mu, values):
        self.x = x
        self.directions = directions
        self.mu = mu
        self.values = values
        super().__init__(
            f"non-finite function value in two-point estimate (mu={mu:g}, |x|={np.linalg.norm(x):.3g})"
        )


@dataclass(frozen=True)
class TwoPointConfig:
    b: int
    mu: float

    def __post_init__(self):
        if self.b < 1:
            raise ValueError("b must be at least 1")
        if not self.mu >= MU_FLOOR:
            raise ValueError(f"mu must be >= {MU_FLOOR}")


def _evaluate(h, X):
    batch = getattr(h, "batch", None)
    if batch is not None:
        return np.asarray(batch(X), dtype=np.float64)
    return np.array([h(p) for p in X], dtype=np.float64)


def _check_mu(mu):
    if not mu >= MU_FLOOR:
        raise ValueError(f"smoothing radius {mu!r} is below the floor {MU_FLOOR}")


def _differences(h, x, D, mu):
    """Central differences ``(h(x + mu d) - h(x - mu d)) / (2 mu)`` per column of ``D``."""
    _check_mu(mu)
    x = np.asarray(x, dtype=np.float64)
    k = D.shape[1]
    step = mu * D.T
    X = np.concatenate([x + step, x - step], axis=0)
    try:
        vals = _evaluate(h, X)
    except FloatingPointError as exc:
        raise EstimatorError(x, D, mu, None) from exc
    if not np.all(np.isfinite(vals)):
        raise EstimatorError(x, D, mu, vals)
    return (vals[:k] - vals[k:]) / (2.0 * mu)


def estimate_direction(h, x, u, mu) -> np.ndarray:
    """Two-point estimate along one direction: 2 queries."""
    u = np.asarray(u, dtype=np.float64)
    return _differences(h, x, u[:, None], mu)[0] * u


def estimate_batch(h, x, U, mu) -> np.ndarray:
    """Average of two-point estimates over the columns of ``U``: ``2 b`` queries."""
    U = np.asarray(U, dtype=np.float64)
    return U @ _differences(h, x, U, mu) / U.shape[1]


def coordinate_estimate(h, x, mu) -> np.ndarray:
    """Central difference along every coordinate axis: ``2 d`` queries."""
    x = np.asarray(x, dtype=np.float64)
    return _differences(h, x, np.eye(x.size), mu)


@dataclass(frozen=True)
class VRTracker:
    """Running gradient estimate ``g`` with its update parameters."""

    g: np.ndarray
    d: int
    b: int
    p: float
    sample_size: int

    def __post_init__(self):
        if self.g.shape != (self.d,):
            raise ValueError("g must have dimension d")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")
        if self.b < 1 or self.sample_size < 1:
            raise ValueError("b and sample_size must be positive")


def tracker_init(h_full, x0, U0, mu0, p=1.0, sample_size=1) -> VRTracker:
    """Start the tracker from a plain batch estimate at ``x0``."""
    U0 = np.asarray(U0, dtype=np.float64)
    g0 = estimate_batch(h_full, x0, U0, mu0)
    return VRTracker(g0, U0.shape[0], U0.shape[1], float(p), int(sample_size))


def tracker_full_update(t: VRTracker, h_full, x_next, U, mu) -> VRTracker:
    """Refresh step on the full objective with a projection correction.

    ``g+ = g + b/(d+b+1) * est(x_next) - U (U^T g) / (d+b+1)``.
    """
    U = np.asarray(U, dtype=np.float64)
    c = t.d + t.b + 1
    est = estimate_batch(h_full, x_next, U, mu)
    g = t.g + (t.b / c) * est - (U @ (U.T @ t.g)) / c
    return replace(t, g=g)


def tracker_minibatch_update(t: VRTracker, h_batch, x_prev, x_next, U, mu) -> VRTracker:
    """Incremental step: add the change of the minibatch estimate between points.

    ``h_batch`` is the average of the sampled components; the same ``U`` and
    ``mu`` are used at both points, so ``x_next == x_prev`` leaves ``g``
    unchanged.
    """
    U = np.asarray(U, dtype=np.float64)
    delta = estimate_batch(h_batch, x_next, U, mu) - estimate_batch(h_batch, x_prev, U, mu)
    return replace(t, g=t.g + delta)
