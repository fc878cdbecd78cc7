"""Norm-ball constraint sets with linear minimization oracles and projections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["L1Ball", "L2Ball", "fw_gap", "project_l1_ball"]


def project_l1_ball(x, r: float) -> np.ndarray:
    """Euclidean projection onto ``{v : |v|_1 <= r}`` by sorting.

    Soft-thresholds ``x`` at the level ``theta`` that puts the result on the
    sphere, found from the sorted magnitudes in O(d log d).
    """
    x = np.asarray(x, dtype=np.float64)
    a = np.abs(x)
    if a.sum() <= r:
        return x.copy()
    srt = np.sort(a)[::-1]
    css = np.cumsum(srt)
    k = np.arange(1, a.size + 1)
    rho = np.nonzero(srt * k > css - r)[0][-1]
    theta = (css[rho] - r) / (rho + 1.0)
    return np.sign(x) * np.maximum(a - theta, 0.0)


@dataclass(frozen=True)
class L1Ball:
    """``{x : |x|_1 <= r}``."""

    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("radius must be positive")

    def lmo(self, g) -> np.ndarray:
        # ties -> smallest index; sign(0) = +1
        g = np.asarray(g, dtype=np.float64)
        i = int(np.argmax(np.abs(g)))
        s = np.zeros_like(g)
        s[i] = -self.r if g[i] >= 0 else self.r
        return s

    def project(self, x) -> np.ndarray:
        return project_l1_ball(x, self.r)

    def diameter(self) -> float:
        return 2.0 * self.r

    def norm(self, x) -> float:
        return float(np.abs(x).sum())

    def contains(self, x, tol=1e-9) -> bool:
        return self.norm(x) <= self.r * (1.0 + tol)

    def vertices(self, d: int) -> np.ndarray:
        eye = np.eye(d) * self.r
        return np.concatenate([eye, -eye])


@dataclass(frozen=True)
class L2Ball:
    """``{x : |x|_2 <= r}``."""

    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("radius must be positive")

    def lmo(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=np.float64)
        nrm = np.linalg.norm(g)
        if nrm == 0:
            return np.zeros_like(g)
        return -self.r * g / nrm

    def project(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        nrm = np.linalg.norm(x)
        if nrm <= self.r:
            return x.copy()
        return x * (self.r / nrm)

    def diameter(self) -> float:
        return 2.0 * self.r

    def norm(self, x) -> float:
        return float(np.linalg.norm(x))

    def contains(self, x, tol=1e-9) -> bool:
        return self.norm(x) <= self.r * (1.0 + tol)


def fw_gap(grad, x, constraint) -> float:
    """Frank-Wolfe gap ``max_{v in X} <grad, x - v>``."""
    grad = np.asarray(grad, dtype=np.float64)
    s = constraint.lmo(grad)
    return float(grad @ x - grad @ s)
