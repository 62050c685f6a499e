"""Ensemble identification: the crop-based clustering ensemble with majority
voting, and the feature-subsampling ensemble that fuses LOF rankings of
image-partition points.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dctdomain import CoefArray, PixelImage, dequantize_pixels, quantize_pixels
from .features import li250_stack
from .outlier import DEFAULT_K, SuspicionRanking, lof_scores
from .setdist import KernelSpec, normalize_columns, normalize_sets, set_distance, set_distance_avg

DEFAULT_T = 9


@dataclass(frozen=True)
class CropSpec:
    """Cropped size, sub-model count and crop mode.

    ``aligned`` crops whole 8x8 blocks out of the coefficient array, which
    keeps every coefficient (and so every embedding change) intact. The
    pixel mode decompresses, crops at any offset and recompresses; the
    shifted grid then largely erases the embedding changes.
    """

    height: int
    width: int
    T: int = DEFAULT_T
    aligned: bool = True

    def __post_init__(self):
        if self.height < 24 or self.width < 24:
            raise ValueError("cropped images must be at least 24x24")
        if self.height % 8 or self.width % 8:
            raise ValueError("crop dimensions must be multiples of 8")
        if self.T < 1:
            raise ValueError("need at least one sub-model")


@dataclass(frozen=True)
class VoteTally:
    counts: dict
    winner: int

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def crop_offsets(h: int, w: int, ch: int, cw: int, rng: np.random.Generator) -> tuple[int, int]:
    if ch > h or cw > w:
        raise ValueError(f"crop {ch}x{cw} larger than image {h}x{w}")
    return int(rng.integers(0, h - ch + 1)), int(rng.integers(0, w - cw + 1))


def crop_random(img: PixelImage, height: int, width: int, rng: np.random.Generator) -> PixelImage:
    """Crop at a uniformly random pixel offset (not grid aligned)."""
    y, x = crop_offsets(img.height, img.width, height, width, rng)
    return PixelImage(img.samples[y : y + height, x : x + width])


def crop_recompress(c: CoefArray, height: int, width: int, rng: np.random.Generator) -> tuple[CoefArray, tuple[int, int]]:
    """Decompress, crop at a random offset, recompress with the same table."""
    pix = dequantize_pixels(c.coefs, c.table)
    y, x = crop_offsets(pix.shape[0], pix.shape[1], height, width, rng)
    return CoefArray(quantize_pixels(pix[y : y + height, x : x + width], c.table), c.table), (y, x)


def crop_blocks(c: CoefArray, height: int, width: int, rng: np.random.Generator) -> tuple[CoefArray, tuple[int, int]]:
    """Lossless crop on the block grid at a uniformly random block offset."""
    by, bx = crop_offsets(c.blocks_y, c.blocks_x, height // 8, width // 8, rng)
    sub = c.coefs[by : by + height // 8, bx : bx + width // 8]
    return CoefArray(sub, c.table), (8 * by, 8 * bx)


def li_survivor(d: np.ndarray) -> int:
    """Absorb actors into the cluster grown from the closest pair; return the last one left.

    The distance of a candidate to the cluster is its mean distance to the
    members. Ties go to the lower actor index.
    """
    d = np.asarray(d, dtype=np.float64)
    n = d.shape[0]
    if n < 3:
        raise ValueError("need at least 3 actors")
    iu = np.triu_indices(n, 1)
    best = np.lexsort((iu[1], iu[0], d[iu]))[0]
    members = [int(iu[0][best]), int(iu[1][best])]
    rest = [i for i in range(n) if i not in members]
    while len(rest) > 1:
        score = d[np.ix_(rest, members)].mean(axis=1)
        pick = rest[int(np.argmin(score))]
        members.append(pick)
        rest.remove(pick)
    return rest[0]


def set_distance_matrix(sets: Sequence[np.ndarray]) -> np.ndarray:
    n = len(sets)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = set_distance_avg(sets[i], sets[j])
    return d


def li_submodel(sets: Sequence[np.ndarray], normalize: bool = True) -> int:
    """Suspicious actor of one sub-model from per-actor feature sets."""
    if normalize:
        sets = normalize_sets(sets)
    return li_survivor(set_distance_matrix(sets))


def majority_vote(results: Sequence[int], rng: np.random.Generator) -> VoteTally:
    """Most frequent verdict; a seeded uniform pick among tied maxima."""
    if len(results) == 0:
        raise ValueError("no votes")
    counts = Counter(int(r) for r in results)
    top = max(counts.values())
    tied = sorted(a for a, c in counts.items() if c == top)
    winner = tied[0] if len(tied) == 1 else int(tied[rng.integers(len(tied))])
    return VoteTally(dict(sorted(counts.items())), winner)


def partition_points(F, p: int, q: int) -> list[np.ndarray]:
    """Split an actor's m = p*q ordered vectors into p contiguous sets of q."""
    F = np.asarray(F)
    if p < 1 or q < 1 or len(F) != p * q:
        raise ValueError(f"cannot split {len(F)} vectors into {p} sets of {q}")
    return [F[j * q : (j + 1) * q] for j in range(p)]


def fusion_score(triples: Sequence[tuple], p: int, n: int) -> np.ndarray:
    """Per-actor score from points sorted by decreasing anomaly score.

    ``triples`` holds (score, actor, point index); the j-th point (1-based)
    contributes (pn + 1 - j) / p to its actor.
    """
    if len(triples) != p * n:
        raise ValueError(f"expected {p * n} triples, got {len(triples)}")
    u = [t[0] for t in triples]
    if any(a < b for a, b in zip(u, u[1:])):
        raise ValueError("triples must be sorted by decreasing anomaly score")
    s = np.zeros(n)
    for j, (_, actor, _) in enumerate(triples, 1):
        if not 0 <= actor < n:
            raise ValueError(f"actor {actor} out of range")
        s[actor] += (p * n + 1 - j) / p
    return s


def rank_fusion(rankings: Sequence[Sequence[int]], n: int) -> np.ndarray:
    """Average of (n + 1 - rank) over sub-model rankings, per actor."""
    if len(rankings) == 0:
        raise ValueError("no rankings")
    s = np.zeros(n)
    for r in rankings:
        if sorted(r) != list(range(n)):
            raise ValueError("each ranking must be a permutation of the actors")
        for k, actor in enumerate(r, 1):
            s[actor] += n + 1 - k
    return s / len(rankings)


def feature_subsample(H: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted random subset of d distinct indices, d uniform in [ceil(H/2), H-1]."""
    if H < 2:
        raise ValueError("need at least 2 features")
    d = int(rng.integers(math.ceil(H / 2), H))
    return np.sort(rng.choice(H, size=d, replace=False))


def point_lof_ranking(
    sets: Sequence[np.ndarray],
    p: int,
    k: int = DEFAULT_K,
    kernel: KernelSpec = KernelSpec(),
    seed: int = 0,
) -> tuple[SuspicionRanking, list[tuple]]:
    """Partition every actor into p points, score points by LOF, fuse per actor."""
    n = len(sets)
    m = len(sets[0])
    if m % p:
        raise ValueError(f"m={m} is not divisible by p={p}")
    q = m // p
    points, owner = [], []
    for a, F in enumerate(sets):
        for w, P in enumerate(partition_points(F, p, q)):
            points.append(P)
            owner.append((a, w))
    N = len(points)
    d = np.zeros((N, N))
    for i in range(N):
        for j in range(i + 1, N):
            rng = np.random.default_rng([seed, i, j])
            d[i, j] = d[j, i] = set_distance(points[i], points[j], "mmd", kernel, rng)
    scores = lof_scores(d, min(k, N - 2))
    order = sorted(range(N), key=lambda i: (-scores[i], owner[i]))
    triples = [(float(scores[i]), owner[i][0], owner[i][1]) for i in order]
    fused = fusion_score(triples, p, n)
    return SuspicionRanking.from_scores(fused), triples


@dataclass
class EnsembleResult:
    verdict: int | None
    ranking: SuspicionRanking | None
    manifest: dict = field(default_factory=dict)


def li_ensemble(
    images: Sequence[Sequence[CoefArray]],
    crop: CropSpec,
    seed: int = 0,
) -> EnsembleResult:
    """T rounds of crop -> LI-250 -> normalize -> absorb, then majority vote."""
    cut = crop_blocks if crop.aligned else crop_recompress
    ss = np.random.SeedSequence(seed)
    sub = ss.spawn(crop.T + 1)
    verdicts, rounds = [], []
    for t in range(crop.T):
        rng = np.random.default_rng(sub[t])
        sets, offsets = [], []
        for actor_imgs in images:
            cropped = []
            for c in actor_imgs:
                cc, off = cut(c, crop.height, crop.width, rng)
                cropped.append(cc.coefs)
                offsets.append(list(off))
            sets.append(li250_stack(np.stack(cropped)))
        v = li_submodel(sets)
        verdicts.append(v)
        rounds.append({"seed": int(sub[t].generate_state(1)[0]), "offsets": offsets, "verdict": v})
    tally = majority_vote(verdicts, np.random.default_rng(sub[-1]))
    manifest = {
        "method": "li",
        "master_seed": seed,
        "crop": [crop.height, crop.width],
        "aligned": crop.aligned,
        "T": crop.T,
        "submodels": rounds,
        "votes": {str(a): c for a, c in tally.counts.items()},
        "verdict": tally.winner,
    }
    return EnsembleResult(tally.winner, None, manifest)


def wu_ensemble(
    sets: Sequence[np.ndarray],
    p: int = 1,
    T: int = DEFAULT_T,
    k: int = DEFAULT_K,
    seed: int = 0,
    subsample: bool = True,
    normalize: bool = True,
) -> EnsembleResult:
    """T feature-subsampled point-LOF sub-models fused by mean reversed rank."""
    if normalize:
        sets = normalize_sets(sets)
    n = len(sets)
    H = sets[0].shape[1]
    ss = np.random.SeedSequence(seed)
    rankings, rounds = [], []
    for t, child in enumerate(ss.spawn(T)):
        rng = np.random.default_rng(child)
        cols = feature_subsample(H, rng) if subsample else np.arange(H)
        sub_seed = int(child.generate_state(1)[0])
        ranking, triples = point_lof_ranking([s[:, cols] for s in sets], p, k, seed=sub_seed)
        rankings.append(ranking.actors)
        rounds.append(
            {
                "seed": sub_seed,
                "features": cols.tolist(),
                "ranking": list(ranking.actors),
                "points": [[u, v, w] for u, v, w in triples],
            }
        )
    final = SuspicionRanking.from_scores(rank_fusion(rankings, n))
    manifest = {
        "method": "wu",
        "master_seed": seed,
        "p": p,
        "T": T,
        "k": k,
        "submodels": rounds,
        "scores": list(final.scores),
        "ranking": list(final.actors),
        "verdict": final.top,
    }
    return EnsembleResult(final.top, final, manifest)
