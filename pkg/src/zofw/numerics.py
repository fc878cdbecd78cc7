"""Vector helpers and the seeded random source shared by every solver.

Dense vectors are plain 1-d ``float64`` numpy arrays. Sparse rows use
:class:`SparseVector`, although datasets store all rows together in a CSR
matrix and only hand out ``SparseVector`` views on request.

Random numbers come from :class:`GaussianSampler`, a thin wrapper over
``numpy.random.Generator`` driven by the PCG64 bit generator. Normals are
produced by numpy's ziggurat sampler, uniforms by the 53-bit double
conversion. Both are specified by numpy and identical across platforms for a
given seed, which is what makes traces reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SparseVector:
    """Sorted-index sparse vector of dimension ``d``."""

    indices: np.ndarray
    values: np.ndarray
    d: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
            if idx[0] < 0 or idx[-1] >= self.d:
                raise ValueError(f"indices must lie in [0, {self.d})")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.d)
        out[self.indices] = self.values
        return out


def _check_dims(a, b):
    da = a.d if isinstance(a, SparseVector) else np.shape(a)[0]
    db = b.d if isinstance(b, SparseVector) else np.shape(b)[0]
    if da != db:
        raise ValueError(f"dimension mismatch: {da} != {db}")


def dot(a, b) -> float:
    """Inner product; a sparse operand only touches its stored entries."""
    _check_dims(a, b)
    if isinstance(a, SparseVector) and isinstance(b, SparseVector):
        return float(a.to_dense() @ b.to_dense())
    if isinstance(a, SparseVector):
        return float(a.values @ np.asarray(b)[a.indices])
    if isinstance(b, SparseVector):
        return float(b.values @ np.asarray(a)[b.indices])
    return float(np.dot(a, b))


def axpy(alpha: float, x, y) -> np.ndarray:
    """Return ``alpha * x + y`` as a new dense vector."""
    _check_dims(x, y)
    out = np.array(y, dtype=np.float64, copy=True)
    if isinstance(x, SparseVector):
        out[x.indices] += alpha * x.values
    else:
        out += alpha * np.asarray(x, dtype=np.float64)
    return out


def scale(alpha: float, x) -> np.ndarray:
    return alpha * np.asarray(x, dtype=np.float64)


def sub(x, y) -> np.ndarray:
    _check_dims(x, y)
    return np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)


def norm2(x) -> float:
    if isinstance(x, SparseVector):
        return float(np.linalg.norm(x.values))
    return float(np.linalg.norm(x))


class GaussianSampler:
    """Seeded stream of standard normals, uniforms and indices.

    One sampler drives a whole solver run. ``position`` counts the number of
    scalar draws handed out so far (normals, uniforms and integers alike),
    which is handy when checking that two runs consumed the stream in the
    same order.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._rng = np.random.Generator(np.random.PCG64(self.seed))
        self.position = 0

    def gaussian_matrix(self, d: int, b: int) -> np.ndarray:
        """Return a ``d x b`` matrix of iid N(0, 1) entries.

        Entries are drawn in row-major order, so column ``j`` of the result is
        not a contiguous slice of the stream.
        """
        out = self._rng.standard_normal((d, b))
        self.position += d * b
        return out

    def normal(self, size=None):
        out = self._rng.standard_normal(size)
        self.position += int(np.prod(size)) if size is not None else 1
        return out

    def uniform(self) -> float:
        self.position += 1
        return float(self._rng.random())

    def uniforms(self, size) -> np.ndarray:
        self.position += int(np.prod(size))
        return self._rng.random(size)

    def indices(self, n: int, size: int) -> np.ndarray:
        """Uniform draw of ``size`` indices from ``range(n)`` with replacement."""
        self.position += size
        return self._rng.integers(0, n, size=size)


def gaussian_matrix(sampler: GaussianSampler, d: int, b: int) -> np.ndarray:
    return sampler.gaussian_matrix(d, b)
