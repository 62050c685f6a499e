"""Local outlier factor on a precomputed distance matrix and the LOF-based
identification of a guilty actor."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .setdist import DistanceMatrix, KernelSpec, actor_distance_matrix, normalize_sets

DEFAULT_K = 10


@dataclass(frozen=True)
class SuspicionRanking:
    actors: tuple[int, ...]
    scores: tuple[float, ...]

    def rank_of(self, actor: int) -> int:
        return self.actors.index(actor) + 1

    @property
    def top(self) -> int:
        return self.actors[0]

    @classmethod
    def from_scores(cls, scores, ids: Sequence[int] | None = None) -> "SuspicionRanking":
        """Descending score, ties by ascending actor id."""
        scores = np.asarray(scores, dtype=np.float64)
        ids = np.arange(len(scores)) if ids is None else np.asarray(ids)
        order = np.lexsort((ids, -scores))
        return cls(tuple(int(ids[i]) for i in order), tuple(float(scores[i]) for i in order))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["rank", "actor", "score"])
            for r, (a, s) in enumerate(zip(self.actors, self.scores), 1):
                w.writerow([r, a, repr(s)])

    def to_json(self) -> str:
        return json.dumps({"actors": list(self.actors), "scores": list(self.scores)})


def _as_array(d) -> np.ndarray:
    return d.values if isinstance(d, DistanceMatrix) else np.asarray(d, dtype=np.float64)


def _others(d: np.ndarray, p: int) -> np.ndarray:
    return np.delete(d[p], p)


def k_distance(p: int, d, k: int) -> float:
    """Distance from point ``p`` to its k-th nearest other point."""
    d = np.maximum(_as_array(d), 0.0)
    if not 1 <= k < d.shape[0]:
        raise ValueError(f"k={k} needs more than k points (have {d.shape[0]})")
    return float(np.sort(_others(d, p))[k - 1])


def _safe_ratio(num: np.ndarray, den: float) -> np.ndarray:
    # infinite densities come from coincident points
    if np.isinf(den):
        return np.where(np.isinf(num), 1.0, 0.0)
    return np.where(np.isinf(num), np.inf, num / den)


def lof_scores(d, k: int = DEFAULT_K) -> np.ndarray:
    """LOF of every point of a distance matrix.

    Neighborhoods include all ties at the k-distance. A zero reachability
    sum gives an infinite density; ratios of two infinite densities count
    as 1, so clusters of coincident points score exactly 1. Negative
    entries (signed MMD estimates) are treated as zero distance.
    """
    d = np.maximum(_as_array(d), 0.0)
    n = d.shape[0]
    if not 1 <= k or n <= k + 1:
        raise ValueError(f"LOF needs more than k+1 points (k={k}, n={n})")
    off = d.copy()
    np.fill_diagonal(off, np.inf)
    kdist = np.sort(off, axis=1)[:, k - 1]
    neigh = off <= kdist[:, None]
    reach = np.maximum(kdist[None, :], d)
    sums = np.where(neigh, reach, 0.0).sum(axis=1)
    counts = neigh.sum(axis=1)
    with np.errstate(divide="ignore"):
        lrd = np.where(sums > 0, counts / np.where(sums > 0, sums, 1.0), np.inf)
    out = np.empty(n)
    for p in range(n):
        out[p] = _safe_ratio(lrd[neigh[p]], lrd[p]).mean()
    return out


def identify_lof(
    sets: Sequence[np.ndarray],
    k: int = DEFAULT_K,
    measure: str = "mmd",
    kernel: KernelSpec | str = KernelSpec(),
    seed: int = 0,
    normalize: bool = True,
) -> SuspicionRanking:
    """Rank actors by the LOF of their feature sets (most suspicious first)."""
    if normalize:
        sets = normalize_sets(sets)
    d = actor_distance_matrix(sets, measure, kernel, seed)
    return SuspicionRanking.from_scores(lof_scores(d, k))
