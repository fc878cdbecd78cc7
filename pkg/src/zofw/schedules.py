"""Step-size and smoothing-radius schedules.

Step sizes
    ``convex_ss``        constant ``pb / (8(d+b+1))`` for short runs and the first
                         half of long runs, then ``2 / (16(d+b+1)/(pb) + t - t0)``
                         with ``t0 = ceil(T/2)``.
    ``nonconvex_sqrt``   ``1 / sqrt(T)``.
    ``harmonic``         ``min(1, lr / (t + 1))``.
    ``constant``         fixed value.

Smoothing radii
    ``thm1``     ``sqrt(p L_hat^2 / |S| + 4 p L^2) * R * gamma_t / (d+6)^{3/2}``.
    ``thm2``     ``sqrt(p / (|S| (d+6)^3 T)) * R``.
    ``constant`` fixed value.

Radii below :data:`~zofw.estimators.MU_FLOOR` are clamped up to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .estimators import MU_FLOOR

__all__ = ["GammaSchedule", "MuSchedule", "gamma_at", "mu_at"]


@dataclass(frozen=True)
class GammaSchedule:
    kind: str
    params: dict = field(default_factory=dict)

    KINDS = ("convex_ss", "nonconvex_sqrt", "constant", "harmonic")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown step-size schedule {self.kind!r}; expected one of {self.KINDS}")

    @classmethod
    def convex_ss(cls, p, b, d, T):
        return cls("convex_ss", {"p": float(p), "b": int(b), "d": int(d), "T": int(T)})

    @classmethod
    def nonconvex_sqrt(cls, T):
        return cls("nonconvex_sqrt", {"T": int(T)})

    @classmethod
    def constant(cls, gamma):
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("a constant step must lie in [0, 1]")
        return cls("constant", {"gamma": float(gamma)})

    @classmethod
    def harmonic(cls, lr):
        if not lr > 0:
            raise ValueError("lr must be positive")
        return cls("harmonic", {"lr": float(lr)})

    def at(self, t: int) -> float:
        k, q = self.kind, self.params
        if k == "convex_ss":
            a = 8.0 * (q["d"] + q["b"] + 1) / (q["p"] * q["b"])
            T = q["T"]
            t0 = math.ceil(T / 2)
            if T <= a or t < t0:
                return 1.0 / a
            return 2.0 / (2.0 * a + t - t0)
        if k == "nonconvex_sqrt":
            return 1.0 / math.sqrt(q["T"])
        if k == "harmonic":
            return min(1.0, q["lr"] / (t + 1))
        return q["gamma"]


@dataclass(frozen=True)
class MuSchedule:
    kind: str
    params: dict = field(default_factory=dict)

    KINDS = ("thm1", "thm2", "constant")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown smoothing schedule {self.kind!r}; expected one of {self.KINDS}")

    @classmethod
    def thm1(cls, L, L_hat, R, p, sample_size, d):
        c = math.sqrt(p * L_hat**2 / sample_size + 4.0 * p * L**2) * R / (d + 6) ** 1.5
        return cls("thm1", {"L": L, "L_hat": L_hat, "R": R, "p": p, "sample_size": sample_size,
                            "d": d, "coef": c})

    @classmethod
    def thm2(cls, p, sample_size, d, T, R):
        mu = math.sqrt(p / (sample_size * (d + 6) ** 3 * T)) * R
        return cls("thm2", {"p": p, "sample_size": sample_size, "d": d, "T": T, "R": R, "mu": mu})

    @classmethod
    def constant(cls, mu):
        if not mu > 0:
            raise ValueError("mu must be positive")
        return cls("constant", {"mu": float(mu)})

    def raw(self, t: int, gamma: float) -> float:
        if self.kind == "thm1":
            return self.params["coef"] * gamma
        return self.params["mu"]

    def at(self, t: int, gamma: float) -> tuple[float, bool]:
        """Return ``(mu, clamped)``."""
        mu = self.raw(t, gamma)
        if mu < MU_FLOOR:
            return MU_FLOOR, True
        return mu, False


def gamma_at(schedule: GammaSchedule, t: int) -> float:
    return schedule.at(t)


def mu_at(schedule: MuSchedule, t: int, gamma: float) -> float:
    return schedule.at(t, gamma)[0]
