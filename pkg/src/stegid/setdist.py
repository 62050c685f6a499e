"""Column normalization and distances between actors' feature sets."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist

MEASURES = ("mmd", "mean", "avg", "euclidean")


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind == "linear":
            if self.gamma is not None:
                raise ValueError("linear kernel takes no gamma")
        elif self.kind == "gaussian":
            if self.gamma is None or not self.gamma > 0:
                raise ValueError("gaussian kernel needs gamma > 0")
        else:
            raise ValueError(f"unknown kernel {self.kind!r}")

    def gram(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return a @ b.T
        return np.exp(-self.gamma * cdist(a, b, "sqeuclidean"))

    def __call__(self, x, y) -> float:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        return float(self.gram(x, y)[0, 0])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "gamma": self.gamma}


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray
    ids: tuple = ()
    measure: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.all(np.isfinite(v)):
            raise ValueError("distances must be finite")
        if not np.array_equal(v, v.T):
            raise ValueError("distance matrix must be symmetric")
        if np.any(np.diag(v) != 0):
            raise ValueError("distance matrix must have a zero diagonal")
        ids = tuple(self.ids) if self.ids else tuple(range(v.shape[0]))
        if len(ids) != v.shape[0]:
            raise ValueError("one id per row required")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def scaled(self, factor: float) -> "DistanceMatrix":
        return DistanceMatrix(self.values * factor, self.ids, dict(self.measure))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("# " + json.dumps(self.measure, sort_keys=True) + "\n")
            f.write(",".join(["actor"] + [str(i) for i in self.ids]) + "\n")
            for i, row in zip(self.ids, self.values):
                f.write(",".join([str(i)] + [repr(float(x)) for x in row]) + "\n")

    @classmethod
    def from_csv(cls, path) -> "DistanceMatrix":
        with open(path, encoding="utf-8") as f:
            lines = [ln.rstrip("\n") for ln in f if ln.strip()]
        measure = {}
        if lines[0].startswith("#"):
            measure = json.loads(lines.pop(0)[1:])
        ids = [_parse_id(s) for s in lines[0].split(",")[1:]]
        vals = [[float(x) for x in ln.split(",")[1:]] for ln in lines[1:]]
        return cls(np.array(vals), tuple(ids), measure)


def _parse_id(s: str):
    try:
        return int(s)
    except ValueError:
        return s


def normalize_columns(X, tol: float = 1e-12) -> np.ndarray:
    """Shift/scale each column to zero mean and unit mean square.

    Columns whose spread is below ``tol`` relative to their magnitude are
    treated as constant and set to zero.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a matrix with at least 2 rows")
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    const = sd <= tol * np.maximum(1.0, np.abs(mu))
    out = (X - mu) / np.where(const, 1.0, sd)
    out[:, const] = 0.0
    return out


def normalize_sets(sets: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Normalize over all rows of all sets jointly, then split back per set."""
    arrays = [np.asarray(s, dtype=np.float64) for s in sets]
    sizes = np.cumsum([len(a) for a in arrays])[:-1]
    return np.split(normalize_columns(np.vstack(arrays)), sizes)


def whiten_sets(sets: Sequence[np.ndarray], rel_tol: float = 1e-10) -> list[np.ndarray]:
    """PCA-whiten all rows of all sets jointly, then split back per set.

    Directions with variance below ``rel_tol`` times the largest are dropped,
    so the output may have fewer columns than the input.
    """
    arrays = [np.asarray(s, dtype=np.float64) for s in sets]
    sizes = np.cumsum([len(a) for a in arrays])[:-1]
    X = np.vstack(arrays)
    X = X - X.mean(axis=0)
    vals, vecs = np.linalg.eigh(X.T @ X / len(X))
    keep = vals > rel_tol * max(vals[-1], np.finfo(float).tiny)
    Z = X @ (vecs[:, keep] / np.sqrt(vals[keep]))
    return np.split(Z, sizes)


def prepare_sets(sets: Sequence[np.ndarray], mode: str = "standardize") -> list[np.ndarray]:
    """Joint preprocessing of actor feature sets: standardize, whiten or none."""
    if mode == "standardize":
        return normalize_sets(sets)
    if mode == "whiten":
        return whiten_sets(sets)
    if mode == "none":
        return [np.asarray(s, dtype=np.float64) for s in sets]
    raise ValueError(f"unknown preprocessing {mode!r}")


def _equalize(X: np.ndarray, Y: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    if len(X) == len(Y):
        return X, Y
    if rng is None:
        rng = np.random.default_rng(0)
    m = min(len(X), len(Y))
    if len(X) > m:
        X = X[np.sort(rng.choice(len(X), size=m, replace=False))]
    else:
        Y = Y[np.sort(rng.choice(len(Y), size=m, replace=False))]
    return X, Y


def mmd_squared(X, Y, kernel: KernelSpec = KernelSpec(), rng=None) -> float:
    """Unbiased U-statistic estimate of MMD^2 (may be negative)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    X, Y = _equalize(X, Y, rng)
    m = len(X)
    if m < 2:
        raise ValueError("unbiased MMD needs at least 2 vectors per set")

    def offdiag(a, b):
        if kernel.kind == "linear":
            return float(a.sum(axis=0) @ b.sum(axis=0)) - float(np.einsum("ij,ij->", a, b))
        g = kernel.gram(a, b)
        return float(g.sum()) - float(np.trace(g))

    s = offdiag(X, X) + offdiag(Y, Y) - 2.0 * offdiag(X, Y)
    return s / (m * m - m)


def mmd_unbiased(X, Y, kernel: KernelSpec = KernelSpec(), rng=None) -> float:
    """Signed square root of the unbiased MMD^2 estimate."""
    s = mmd_squared(X, Y, kernel, rng)
    return float(np.sign(s) * np.sqrt(abs(s)))


def median_gamma(vectors) -> float:
    """Gaussian width 1/eta^2 with eta the median pairwise L2 distance."""
    V = np.asarray(vectors, dtype=np.float64)
    if V.ndim != 2 or len(V) < 2:
        raise ValueError("need at least 2 vectors")
    eta = float(np.median(pdist(V)))
    if eta == 0.0:
        raise ValueError("all vectors coincide; median distance is zero")
    return 1.0 / eta**2


def mean_embedding_distance(X, Y) -> float:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if len(X) == 0 or len(Y) == 0:
        raise ValueError("sets must be non-empty")
    return float(np.linalg.norm(X.mean(axis=0) - Y.mean(axis=0)))


def set_distance_avg(Fi, Fj) -> float:
    """Mean Euclidean distance over all cross pairs of the two sets."""
    Fi = np.atleast_2d(np.asarray(Fi, dtype=np.float64))
    Fj = np.atleast_2d(np.asarray(Fj, dtype=np.float64))
    if len(Fi) == 0 or len(Fj) == 0:
        raise ValueError("sets must be non-empty")
    return float(cdist(Fi, Fj).mean())


def set_distance(X, Y, measure: str = "mmd", kernel: KernelSpec = KernelSpec(), rng=None) -> float:
    if measure == "mmd":
        if min(len(X), len(Y)) < 2:
            return float(np.linalg.norm(np.asarray(X)[0] - np.asarray(Y)[0]))
        return mmd_unbiased(X, Y, kernel, rng)
    if measure == "mean":
        return mean_embedding_distance(X, Y)
    if measure == "avg":
        return set_distance_avg(X, Y)
    if measure == "euclidean":
        X, Y = np.atleast_2d(X), np.atleast_2d(Y)
        if len(X) != 1 or len(Y) != 1:
            raise ValueError("euclidean measure is defined for single vectors")
        return float(np.linalg.norm(X[0] - Y[0]))
    raise ValueError(f"unknown measure {measure!r}")


def actor_distance_matrix(
    sets: Sequence[np.ndarray],
    measure: str = "mmd",
    kernel: KernelSpec | str = KernelSpec(),
    seed: int = 0,
    ids: Sequence | None = None,
) -> DistanceMatrix:
    """Pairwise distances between (already normalized) feature sets.

    ``kernel='gaussian-median'`` picks gamma from the median distance over
    all rows of all sets.
    """
    arrays = [np.atleast_2d(np.asarray(s, dtype=np.float64)) for s in sets]
    if len({a.shape[1] for a in arrays}) > 1:
        raise ValueError("feature sets must share one dimension")
    if kernel == "gaussian-median":
        kernel = KernelSpec("gaussian", median_gamma(np.vstack(arrays)))
    elif isinstance(kernel, str):
        kernel = KernelSpec(kernel)
    n = len(arrays)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            rng = np.random.default_rng([seed, i, j]) if _needs_rng(arrays[i], arrays[j], measure) else None
            d[i, j] = d[j, i] = set_distance(arrays[i], arrays[j], measure, kernel, rng)
    tag = {"measure": measure, "kernel": kernel.to_dict() if measure == "mmd" else None, "seed": seed}
    return DistanceMatrix(d, tuple(ids) if ids is not None else tuple(range(n)), tag)


def _needs_rng(a, b, measure) -> bool:
    return measure == "mmd" and len(a) != len(b)
