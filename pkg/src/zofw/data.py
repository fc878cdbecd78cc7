"""Datasets: LIBSVM text ingestion, summary statistics and synthetic generators."""

from __future__ import annotations

import io
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .numerics import GaussianSampler, SparseVector

__all__ = [
    "Dataset",
    "DatasetStats",
    "LibsvmParseError",
    "parse_libsvm",
    "load_libsvm",
    "write_libsvm",
    "dataset_stats",
    "scale_labels_pm1",
    "max_abs_scale",
    "synth_logistic",
    "synth_regression",
]


class LibsvmParseError(ValueError):
    """Malformed LIBSVM input. ``line`` and ``column`` are 1-based."""

    def __init__(self, message, line, column, token=None):
        self.line = line
        self.column = column
        self.token = token
        where = f"line {line}, column {column}"
        if token is not None:
            where += f", token {token!r}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Dataset:
    """Sparse feature rows with one real label per row.

    ``features`` is an ``n x d`` CSR matrix with sorted column indices.
    """

    features: sp.csr_matrix
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        X = sp.csr_matrix(self.features, dtype=np.float64)
        X.sort_indices()
        y = np.array(self.labels, dtype=np.float64).ravel()
        if X.shape[0] < 1:
            raise ValueError("a dataset needs at least one row")
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"{X.shape[0]} rows but {y.shape[0]} labels")
        y.flags.writeable = False
        for a in (X.data, X.indices, X.indptr):
            a.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def nnz(self) -> int:
        return int(self.features.nnz)

    def row(self, i: int) -> SparseVector:
        X = self.features
        lo, hi = X.indptr[i], X.indptr[i + 1]
        return SparseVector(X.indices[lo:hi].copy(), X.data[lo:hi].copy(), self.d)

    @property
    def rows(self) -> list[SparseVector]:
        return [self.row(i) for i in range(self.n)]

    def with_labels(self, labels) -> "Dataset":
        return Dataset(self.features, labels, self.name)


def _tokens(line):
    """Yield (token, 1-based column) pairs for whitespace-separated tokens."""
    col = 0
    n = len(line)
    while col < n:
        while col < n and line[col].isspace():
            col += 1
        if col >= n:
            break
        start = col
        while col < n and not line[col].isspace():
            col += 1
        yield line[start:col], start + 1


def parse_libsvm(stream, declared_d: int | None = None, name: str = "libsvm") -> Dataset:
    """Parse LIBSVM/SVMlight text into a :class:`Dataset`.

    Each non-blank line is ``label idx:val idx:val ...`` with 1-based,
    strictly ascending indices. Text after ``#`` is ignored. Indices are
    shifted to 0-based in memory. Without ``declared_d`` the dimension is the
    largest index seen.

    Raises
    ------
    LibsvmParseError
        On a non-numeric token, non-ascending indices, or an index beyond
        ``declared_d``. The error carries the line and column.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    if declared_d is not None and declared_d < 1:
        raise ValueError("declared_d must be positive")

    labels, indptr, indices, values = [], [0], [], []
    max_index = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].rstrip("\r\n")
        toks = list(_tokens(line))
        if not toks:
            continue
        label_tok, label_col = toks[0]
        try:
            label = float(label_tok)
        except ValueError:
            raise LibsvmParseError("label is not a number", lineno, label_col, label_tok) from None
        if not np.isfinite(label):
            raise LibsvmParseError("label is not finite", lineno, label_col, label_tok)
        prev = 0
        for tok, col in toks[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise LibsvmParseError("expected index:value", lineno, col, tok)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise LibsvmParseError("non-numeric index or value", lineno, col, tok) from None
            if not np.isfinite(val):
                raise LibsvmParseError("value is not finite", lineno, col, tok)
            if idx < 1:
                raise LibsvmParseError("indices are 1-based", lineno, col, tok)
            if idx <= prev:
                raise LibsvmParseError("indices must be strictly ascending", lineno, col, tok)
            if declared_d is not None and idx > declared_d:
                raise LibsvmParseError(f"index exceeds declared dimension {declared_d}", lineno, col, tok)
            prev = idx
            indices.append(idx - 1)
            values.append(val)
        max_index = max(max_index, prev)
        labels.append(label)
        indptr.append(len(indices))

    if not labels:
        raise LibsvmParseError("no data rows", 1, 1)
    d = declared_d if declared_d is not None else max(max_index, 1)
    X = sp.csr_matrix(
        (np.asarray(values, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(labels), d),
    )
    return Dataset(X, np.asarray(labels), name)


def load_libsvm(path, declared_d: int | None = None) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_libsvm(fh, declared_d, name=os.path.basename(str(path)))


def _fmt(v: float) -> str:
    if float(v).is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(float(v))


def write_libsvm(ds: Dataset, stream=None) -> str | None:
    """Emit ``ds`` in LIBSVM format; values use shortest round-trip repr."""
    out = io.StringIO() if stream is None else stream
    X = ds.features
    for i in range(ds.n):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        parts = [_fmt(ds.labels[i])]
        parts += [f"{j + 1}:{_fmt(v)}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi])]
        out.write(" ".join(parts) + "\n")
    if stream is None:
        return out.getvalue()
    return None


@dataclass(frozen=True)
class DatasetStats:
    n: int
    d: int
    nnz: int
    label_counts: dict = field(default_factory=dict)
    max_row_norm_sq: float = 0.0
    logistic_L_hat: float = 0.0

    def lines(self):
        hist = ", ".join(f"{_fmt(k)}:{v}" for k, v in sorted(self.label_counts.items()))
        return [
            f"n = {self.n}",
            f"d = {self.d}",
            f"nnz = {self.nnz}",
            f"labels = {{{hist}}}",
            f"max ||z_i||^2 = {self.max_row_norm_sq:.6g}",
            f"logistic L_hat = {self.logistic_L_hat:.6g}",
        ]


def dataset_stats(ds: Dataset) -> DatasetStats:
    sq = np.asarray(ds.features.multiply(ds.features).sum(axis=1)).ravel()
    m = float(sq.max()) if sq.size else 0.0
    counts = Counter(float(v) for v in ds.labels)
    return DatasetStats(ds.n, ds.d, ds.nnz, dict(counts), m, m / 4.0)


def scale_labels_pm1(ds: Dataset) -> Dataset:
    """Map {0, 1} labels to {-1, +1}; {-1, +1} labels pass through."""
    vals = set(np.unique(ds.labels).tolist())
    if vals <= {-1.0, 1.0}:
        return ds
    if vals <= {0.0, 1.0}:
        return ds.with_labels(2.0 * ds.labels - 1.0)
    bad = sorted(vals - {-1.0, 0.0, 1.0}) or sorted(vals)
    raise ValueError(f"labels must be {{0,1}} or {{-1,+1}}; offending values: {bad}")


def max_abs_scale(ds: Dataset) -> Dataset:
    """Divide each feature column by its largest absolute value."""
    X = ds.features.tocsc(copy=True)
    m = np.asarray(abs(X).max(axis=0).todense()).ravel()
    m[m == 0] = 1.0
    X = X @ sp.diags(1.0 / m)
    return Dataset(X.tocsr(), ds.labels, ds.name)


def _sparse_gaussian(n, d, sparsity, sampler):
    # mask first, then values, so the stream layout is fixed
    mask = sampler.uniforms((n, d)) < sparsity
    vals = sampler.normal((n, d))
    return sp.csr_matrix(np.where(mask, vals, 0.0))


def synth_logistic(nsamples, d, sparsity=1.0, label_noise=0.0, sampler=None, seed=0):
    """Planted-weight binary classification data.

    Features are Gaussian, each entry kept with probability ``sparsity``.
    Labels are ``sign(z . w)`` for a hidden Gaussian ``w`` (``sign(0) = +1``),
    then flipped with probability ``label_noise``. Returns ``(dataset, w)``.
    """
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError("sparsity must lie in [0, 1]")
    if not 0.0 <= label_noise <= 1.0:
        raise ValueError("label_noise must lie in [0, 1]")
    if sampler is None:
        sampler = GaussianSampler(seed)
    w = sampler.normal(d)
    X = _sparse_gaussian(nsamples, d, sparsity, sampler)
    y = np.where(X @ w >= 0, 1.0, -1.0)
    flip = sampler.uniforms(nsamples) < label_noise
    y[flip] *= -1.0
    return Dataset(X, y, f"synth-logistic-{nsamples}x{d}"), w


def synth_regression(nsamples, d, sparsity=1.0, noise=0.1, outlier_frac=0.1,
                     outlier_scale=10.0, sampler=None, seed=0):
    """Linear regression data with a fraction of gross outliers in the labels.

    Returns ``(dataset, w)``.
    """
    if sampler is None:
        sampler = GaussianSampler(seed)
    w = sampler.normal(d) / np.sqrt(d)
    X = _sparse_gaussian(nsamples, d, sparsity, sampler)
    y = X @ w + noise * sampler.normal(nsamples)
    out = sampler.uniforms(nsamples) < outlier_frac
    y[out] += outlier_scale * sampler.normal(int(out.sum()))
    return Dataset(X, y, f"synth-regression-{nsamples}x{d}"), w
