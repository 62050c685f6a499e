"""Agglomerative clustering on an actor distance matrix and the
clustering-based steganographer identification framework.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .setdist import DistanceMatrix, KernelSpec, actor_distance_matrix, normalize_sets

LINKAGES = ("single", "complete", "centroid", "average")


@dataclass(frozen=True)
class Merge:
    a: tuple[int, ...]
    b: tuple[int, ...]
    height: float


@dataclass(frozen=True)
class Dendrogram:
    merges: tuple[Merge, ...]
    n: int

    def to_csv(self, path, ids: Sequence | None = None) -> None:
        ids = list(ids) if ids is not None else list(range(self.n))
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("step,membersA,membersB,height\n")
            for s, m in enumerate(self.merges, 1):
                a = " ".join(str(ids[i]) for i in m.a)
                b = " ".join(str(ids[i]) for i in m.b)
                f.write(f"{s},{a},{b},{m.height!r}\n")

    def to_dot(self, path, ids: Sequence | None = None) -> None:
        """Graphviz description: leaves, internal nodes with heights, edges."""
        ids = list(ids) if ids is not None else list(range(self.n))
        node = {(i,): f"leaf{i}" for i in range(self.n)}
        lines = ["digraph dendrogram {"]
        for i in range(self.n):
            lines.append(f'  leaf{i} [label="{ids[i]}", height=0];')
        for s, m in enumerate(self.merges, 1):
            name = f"merge{s}"
            lines.append(f'  {name} [label="{m.height:.6g}", height={m.height!r}];')
            lines.append(f"  {name} -> {node[m.a]};")
            lines.append(f"  {name} -> {node[m.b]};")
            node[tuple(sorted(m.a + m.b))] = name
        lines.append("}")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class Accusation:
    accused: tuple[int, ...]
    c1: tuple[int, ...]
    c2: tuple[int, ...]
    order: tuple[int, ...]

    def rank_of(self, actor: int) -> int:
        return self.order.index(actor) + 1


def linkage_distance(d: np.ndarray, a: Sequence[int], b: Sequence[int], linkage: str, average: str = "literal") -> float:
    """Cluster distance computed from the original point distances."""
    block = d[np.ix_(a, b)]
    if linkage == "single":
        return float(block.min())
    if linkage == "complete":
        return float(block.max())
    if linkage == "centroid":
        return float(block.mean())
    if linkage == "average":
        if average == "upgma":
            return float(block.mean())
        u = list(a) + list(b)
        k = len(u)
        # all ordered pairs u != v inside the union
        return float(d[np.ix_(u, u)].sum() / (k * k - k))
    raise ValueError(f"unknown linkage {linkage!r}")


def agglomerate(d, linkage: str = "single", average: str = "literal") -> Dendrogram:
    """Merge the closest active pair until one cluster remains.

    Ties go to the pair whose first cluster has the lowest minimum member,
    then the second cluster's lowest member.
    """
    dist = d.values if isinstance(d, DistanceMatrix) else np.asarray(d, dtype=np.float64)
    n = dist.shape[0]
    if n < 2:
        raise ValueError("need at least 2 items")
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}")
    active: list[tuple[int, ...]] = [(i,) for i in range(n)]
    cache: dict[tuple, float] = {}

    def D(x, y):
        key = (x, y)
        if key not in cache:
            cache[key] = linkage_distance(dist, x, y, linkage, average)
        return cache[key]

    merges = []
    while len(active) > 1:
        best = None
        for x, y in itertools.combinations(active, 2):
            key = (D(x, y), x[0], y[0])
            if best is None or key < best[0]:
                best = (key, x, y)
        (h, _, _), x, y = best
        merges.append(Merge(x, y, h))
        active.remove(x)
        active.remove(y)
        active.append(tuple(sorted(x + y)))
        active.sort()
    return Dendrogram(tuple(merges), n)


def final_two_clusters(t: Dendrogram) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Operands of the last merge, smaller cluster first."""
    last = t.merges[-1]
    a, b = last.a, last.b
    if (len(b), b[0]) < (len(a), a[0]):
        a, b = b, a
    return a, b


def accuse(c1, c2, k: int, rng: np.random.Generator) -> Accusation:
    """Pick ``k`` suspects, exhausting the smaller cluster first.

    The full suspicion order is a seeded shuffle of ``c1`` followed by a
    seeded shuffle of ``c2``; the accused are its first ``k`` entries.
    """
    c1, c2 = tuple(sorted(c1)), tuple(sorted(c2))
    if not 1 <= k <= len(c1) + len(c2):
        raise ValueError(f"cannot accuse {k} of {len(c1) + len(c2)} actors")
    order = tuple(int(i) for i in rng.permutation(c1)) + tuple(int(i) for i in rng.permutation(c2))
    return Accusation(order[:k], c1, c2, order)


def identify_clustering(
    sets: Sequence[np.ndarray],
    linkage: str = "single",
    kernel: KernelSpec | str = KernelSpec(),
    k: int = 1,
    seed: int = 0,
    measure: str = "mmd",
    normalize: bool = True,
) -> Accusation:
    """Normalize, compute actor distances, cluster, and accuse ``k`` actors."""
    if len(sets) < 3:
        raise ValueError("need at least 3 actors")
    if normalize:
        sets = normalize_sets(sets)
    d = actor_distance_matrix(sets, measure, kernel, seed)
    tree = agglomerate(d, linkage)
    c1, c2 = final_two_clusters(tree)
    return accuse(c1, c2, k, np.random.default_rng([seed, 1]))
