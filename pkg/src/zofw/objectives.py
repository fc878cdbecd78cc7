"""Finite-sum objectives and the metered black-box view the solvers consume.

Every objective evaluates ``f_i`` at a whole batch of points at once through
:meth:`FiniteSumObjective.values`, returning a ``(components, points)``
array. Objectives are white-box: they also expose gradients and smoothness
constants, which the tests and the projected-gradient reference solver use.
Solvers never see an objective directly. They receive a :class:`QueryOracle`,
which only answers function-value queries and counts each one.
"""

from __future__ import annotations

import os
from importlib import resources

import numpy as np
import scipy.sparse as sp

from .data import Dataset
from .numerics import GaussianSampler

__all__ = [
    "CapabilityError",
    "QueryMeter",
    "QueryOracle",
    "FiniteSumObjective",
    "LogisticObjective",
    "CorrentropyObjective",
    "QuadraticExampleObjective",
    "SoftmaxAttackObjective",
    "true_gradient",
    "central_difference",
    "load_attack_model",
    "save_attack_model",
    "generate_attack_model",
    "toy_attack_targets",
    "BUNDLED_ATTACK_MODEL",
]

BUNDLED_ATTACK_MODEL = "toy_softmax_3x64.txt"


class CapabilityError(RuntimeError):
    """The objective does not provide the requested white-box quantity."""


class QueryMeter:
    """Monotone counter of component function evaluations."""

    def __init__(self):
        self._count = 0

    @property
    def count(self) -> int:
        return self._count

    def add(self, k: int) -> None:
        if k < 0:
            raise ValueError("a query meter never decreases")
        self._count += int(k)

    def __repr__(self):
        return f"QueryMeter(count={self._count})"


def _as_points(X, d):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {X.shape}")
    return X


class FiniteSumObjective:
    """Base class for ``f(x) = (1/n) sum_i f_i(x)``.

    Subclasses implement :meth:`_values` and, when they can, the gradient
    hooks. ``n`` and ``d`` must be set by the subclass constructor.
    """

    n: int
    d: int

    def _values(self, indices, X):
        raise NotImplementedError

    def values(self, indices, X) -> np.ndarray:
        """Component values ``f_i(X[j])`` as an ``(len(indices), len(X))`` array.

        ``indices=None`` selects all components in index order.
        """
        X = _as_points(X, self.d)
        if indices is not None:
            indices = np.asarray(indices, dtype=np.int64)
            if indices.size and (indices.min() < 0 or indices.max() >= self.n):
                raise IndexError(f"component index out of range [0, {self.n})")
        return self._values(indices, X)

    def component_value(self, i: int, x) -> float:
        return float(self.values([i], x)[0, 0])

    def value(self, x) -> float:
        return float(self.values(None, x).mean(axis=0)[0])

    def full_values(self, X) -> np.ndarray:
        return self.values(None, X).mean(axis=0)

    def gradient(self, x) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} has no analytic gradient")

    def component_gradient(self, i: int, x) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} has no analytic component gradient")

    def smoothness(self) -> tuple[float, float]:
        """Return ``(L, L_hat)``: smoothness of ``f`` and of every ``f_i``."""
        raise CapabilityError(f"{type(self).__name__} has no known smoothness constants")


def true_gradient(obj: FiniteSumObjective, x) -> np.ndarray:
    """Exact gradient of the full objective. Never metered."""
    return obj.gradient(np.asarray(x, dtype=np.float64))


def central_difference(fun, x, h=1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


class _ScalarView:
    """Callable view of a (sub)average of components for the estimators.

    Calling it on one point returns a float; :meth:`batch` evaluates many
    points in one go. Both meter ``len(indices)`` queries per point.
    """

    def __init__(self, oracle, indices):
        self._oracle = oracle
        self._indices = indices

    def batch(self, X) -> np.ndarray:
        return self._oracle.eval_components(self._indices, X).mean(axis=0)

    def __call__(self, x) -> float:
        return float(self.batch(x)[0])


class QueryOracle:
    """Function-value-only access to an objective, with a query meter.

    Each evaluation of one component at one point adds one to ``meter``.
    """

    def __init__(self, objective: FiniteSumObjective, meter: QueryMeter | None = None):
        self._objective = objective
        self.meter = meter if meter is not None else QueryMeter()
        self.n = objective.n
        self.d = objective.d

    @property
    def queries(self) -> int:
        return self.meter.count

    def eval_components(self, indices, X) -> np.ndarray:
        X = _as_points(X, self.d)
        k = self.n if indices is None else len(indices)
        out = self._objective.values(indices, X)
        self.meter.add(k * X.shape[0])
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("objective returned a non-finite value")
        return out

    def eval_component(self, i: int, x) -> float:
        if not 0 <= i < self.n:
            raise IndexError(f"component index {i} out of range [0, {self.n})")
        return float(self.eval_components([i], x)[0, 0])

    def eval_full(self, x) -> float:
        return float(self.eval_components(None, x).mean(axis=0)[0])

    def full(self) -> _ScalarView:
        return _ScalarView(self, None)

    def subset(self, indices) -> _ScalarView:
        return _ScalarView(self, np.asarray(indices, dtype=np.int64))

    def component(self, i: int) -> _ScalarView:
        return self.subset([i])


class _LinearModelObjective(FiniteSumObjective):
    # dense copy for small problems, CSR otherwise
    _DENSE_LIMIT = 4_000_000

    def __init__(self, dataset: Dataset):
        self.dataset = dataset
        self.n, self.d = dataset.n, dataset.d
        self.labels = dataset.labels
        Z = dataset.features
        self._Z = Z.toarray() if self.n * self.d <= self._DENSE_LIMIT else Z
        self._row_sq = np.asarray(Z.multiply(Z).sum(axis=1)).ravel()

    def _scores(self, indices, X):
        Z = self._Z if indices is None else self._Z[indices]
        S = Z @ X.T
        return np.asarray(S.todense()) if sp.issparse(S) else S

    def _labels(self, indices):
        return self.labels if indices is None else self.labels[indices]

    def _row(self, i):
        z = self._Z[i]
        return z.toarray().ravel() if sp.issparse(z) else np.asarray(z, dtype=np.float64)

    def _spectral_sq(self):
        """Largest eigenvalue of ``Z^T Z / n``."""
        Z = self.dataset.features
        if min(Z.shape) <= 500:
            s = np.linalg.norm(Z.toarray(), 2)
        else:
            from scipy.sparse.linalg import svds

            s = svds(Z, k=1, return_singular_vectors=False)[0]
        return float(s) ** 2 / self.n


class LogisticObjective(_LinearModelObjective):
    """``f_i(x) = log(1 + exp(-y_i x.z_i))`` with labels in {-1, +1}."""

    def __init__(self, dataset: Dataset):
        super().__init__(dataset)
        if not set(np.unique(self.labels).tolist()) <= {-1.0, 1.0}:
            raise ValueError("logistic labels must be -1/+1; see data.scale_labels_pm1")
        self.L_hat_components = self._row_sq / 4.0

    def _values(self, indices, X):
        margins = self._labels(indices)[:, None] * self._scores(indices, X)
        return np.logaddexp(0.0, -margins)

    def gradient(self, x):
        x = np.asarray(x, dtype=np.float64)
        y = self.labels
        m = y * self._scores(None, x[None, :])[:, 0]
        w = -y * _sigmoid(-m) / self.n
        return np.asarray(self._Z.T @ w).ravel()

    def component_gradient(self, i, x):
        z = self._row(i)
        y = self.labels[i]
        return -y * _sigmoid(-y * float(z @ x)) * z

    def smoothness(self):
        return self._spectral_sq() / 4.0, float(self.L_hat_components.max())


def _sigmoid(t):
    return np.exp(-np.logaddexp(0.0, -t))


class CorrentropyObjective(_LinearModelObjective):
    """Correntropy-induced robust loss ``f_i(x) = 50 (1 - exp(-(y_i - x.z_i)^2 / 100))``.

    As a function of the residual ``r`` the second derivative is
    ``(1 - r^2/50) exp(-r^2/100)``, bounded by 1 in magnitude, which gives the
    smoothness constants below.
    """

    scale = 50.0
    width = 100.0

    def _values(self, indices, X):
        r = self._labels(indices)[:, None] - self._scores(indices, X)
        return self.scale * -np.expm1(-(r * r) / self.width)

    def _dloss(self, r):
        return -(2.0 * self.scale / self.width) * r * np.exp(-(r * r) / self.width)

    def gradient(self, x):
        x = np.asarray(x, dtype=np.float64)
        r = self.labels - self._scores(None, x[None, :])[:, 0]
        return np.asarray(self._Z.T @ (self._dloss(r) / self.n)).ravel()

    def component_gradient(self, i, x):
        z = self._row(i)
        r = self.labels[i] - float(z @ x)
        return self._dloss(r) * z

    def smoothness(self):
        c = 2.0 * self.scale / self.width
        return c * self._spectral_sq(), c * float(self._row_sq.max())


class QuadraticExampleObjective(FiniteSumObjective):
    """``f_i(x) = |x|^2 / 2 + (n/2) a x_i^2`` in dimension ``d = n``.

    The average is ``(1 + a)|x|^2 / 2``, so ``L = 1 + a`` while every
    component is only ``(1 + n a)``-smooth.
    """

    def __init__(self, a: float, n: int):
        if a <= 0:
            raise ValueError("a must be positive")
        self.a = float(a)
        self.n = self.d = int(n)
        self.L = 1.0 + self.a
        self.L_hat = 1.0 + self.n * self.a

    def _values(self, indices, X):
        half_sq = 0.5 * np.einsum("ij,ij->i", X, X)
        coord = X.T if indices is None else X[:, indices].T
        return half_sq[None, :] + 0.5 * self.n * self.a * coord * coord

    def gradient(self, x):
        return self.L * np.asarray(x, dtype=np.float64)

    def component_gradient(self, i, x):
        g = np.array(x, dtype=np.float64, copy=True)
        g[i] += self.n * self.a * g[i]
        return g

    def smoothness(self):
        return self.L, self.L_hat


class SoftmaxAttackObjective(FiniteSumObjective):
    """Universal perturbation loss against a linear-softmax classifier.

    A perturbation ``x`` maps image ``z`` to ``w = tanh(atanh(2 z) + x) / 2``,
    which always stays inside ``(-0.5, 0.5)^d``. The component loss is the
    log-probability margin ``log P_y(w) - max_{j != y} log P_j(w)``; with a
    linear model the softmax normaliser cancels and this equals the logit
    margin. Ties in the max go to the smallest class index.
    """

    eps0 = 1e-6

    def __init__(self, images, labels, weights, bias):
        Z = np.asarray(images, dtype=np.float64)
        self.W = np.asarray(weights, dtype=np.float64)
        self.c = np.asarray(bias, dtype=np.float64)
        self.K = self.W.shape[0]
        if Z.ndim != 2 or Z.shape[1] != self.W.shape[1]:
            raise ValueError("images must be (n, d) with d matching the model")
        self.n, self.d = Z.shape
        self.labels = np.asarray(labels, dtype=np.int64)
        lim = 0.5 - self.eps0
        self.images = Z
        self._base = np.arctanh(2.0 * np.clip(Z, -lim, lim))

    def transform(self, indices, X):
        """Perturbed images, shape ``(len(indices), len(X), d)``."""
        base = self._base if indices is None else self._base[indices]
        return 0.5 * np.tanh(base[:, None, :] + X[None, :, :])

    def _margins(self, logits, y):
        true = np.take_along_axis(logits, y[:, None, None], axis=2)[..., 0]
        others = logits.copy()
        np.put_along_axis(others, y[:, None, None], -np.inf, axis=2)
        j = np.argmax(others, axis=2)
        best = np.take_along_axis(others, j[..., None], axis=2)[..., 0]
        return true - best, j

    def _values(self, indices, X):
        y = self.labels if indices is None else self.labels[indices]
        logits = self.transform(indices, X) @ self.W.T + self.c
        return self._margins(logits, y)[0]

    def predict(self, x) -> np.ndarray:
        """Class predicted for every perturbed image (argmax, smallest index on ties)."""
        w = self.transform(None, np.asarray(x, dtype=np.float64)[None, :])[:, 0, :]
        return np.argmax(w @ self.W.T + self.c, axis=1)

    def attack_success_rate(self, x) -> float:
        return float(np.mean(self.predict(x) != self.labels))

    def _grad_rows(self, indices, x):
        y = self.labels if indices is None else self.labels[indices]
        w = self.transform(indices, x[None, :])
        logits = w @ self.W.T + self.c
        _, j = self._margins(logits, y)
        dW = self.W[y] - self.W[j[:, 0]]
        return dW * 0.5 * (1.0 - 4.0 * w[:, 0, :] ** 2)

    def gradient(self, x):
        return self._grad_rows(None, np.asarray(x, dtype=np.float64)).mean(axis=0)

    def component_gradient(self, i, x):
        return self._grad_rows(np.array([i]), np.asarray(x, dtype=np.float64))[0]


def load_attack_model(path=None):
    """Read a linear-softmax model file: header ``K d`` then K rows of d+1 reals.

    Each row holds the class weights followed by the class bias. With no path
    the bundled 3-class, 64-dimensional toy model is loaded.
    """
    if path is None:
        text = resources.files("zofw").joinpath("data", BUNDLED_ATTACK_MODEL).read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    lines = [ln for ln in (l.split("#", 1)[0].strip() for l in text.splitlines()) if ln]
    if not lines:
        raise ValueError("empty model file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError("model header must be 'K d'")
    K, d = int(head[0]), int(head[1])
    if len(lines) - 1 != K:
        raise ValueError(f"expected {K} weight rows, found {len(lines) - 1}")
    rows = np.array([[float(t) for t in ln.split()] for ln in lines[1:]])
    if rows.shape != (K, d + 1):
        raise ValueError(f"each row needs {d + 1} numbers")
    return rows[:, :d], rows[:, d]


def save_attack_model(path, weights, bias):
    W = np.asarray(weights, dtype=np.float64)
    c = np.asarray(bias, dtype=np.float64)
    K, d = W.shape
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(f"{K} {d}\n")
        for k in range(K):
            fh.write(" ".join(repr(float(v)) for v in (*W[k], c[k])) + "\n")
    os.replace(tmp, path)


def generate_attack_model(K=3, d=64, seed=2024):
    """Random linear-softmax model; rows are unit-norm class directions."""
    rng = GaussianSampler(seed)
    W = rng.normal((K, d))
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    W *= 4.0
    c = 0.1 * rng.normal(K)
    return W, c


def toy_attack_targets(weights, bias, n, seed=0, target_class=None, min_margin=0.0):
    """Draw images the model classifies confidently, labelled by the model.

    Images are uniform on ``[-0.5, 0.5]^d``. An image is kept when its logit
    margin exceeds ``min_margin`` and, if ``target_class`` is given, it is
    predicted as that class. Every kept image is correctly classified by
    construction, so the zero perturbation has attack success rate 0.
    """
    W = np.asarray(weights)
    c = np.asarray(bias)
    rng = GaussianSampler(seed)
    imgs, labs = [], []
    while len(imgs) < n:
        Z = rng.uniforms((256, W.shape[1])) - 0.5
        logits = Z @ W.T + c
        pred = np.argmax(logits, axis=1)
        srt = np.sort(logits, axis=1)
        ok = (srt[:, -1] - srt[:, -2]) > min_margin
        if target_class is not None:
            ok &= pred == target_class
        for z, y in zip(Z[ok], pred[ok]):
            imgs.append(z)
            labs.append(y)
    return np.array(imgs[:n]), np.array(labs[:n], dtype=np.int64)
