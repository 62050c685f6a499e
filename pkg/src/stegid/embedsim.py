"""Batch steganography simulation: capacities, payload-spreading strategies
and nsF5-style embedding at the change-rate level.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .dctdomain import CoefArray

logger = logging.getLogger(__name__)

STRATEGIES = ("max-greedy", "max-random", "linear", "even")
CHANGE_MODELS = ("entropy", "linear")


@dataclass(frozen=True)
class Allocation:
    lengths: np.ndarray
    strategy: str

    @property
    def total(self) -> int:
        return int(self.lengths.sum())


@dataclass(frozen=True)
class EmbedRecord:
    image_id: int
    payload_bits: int
    rho: float
    changes: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _ac_mask() -> np.ndarray:
    m = np.ones((8, 8), dtype=bool)
    m[0, 0] = False
    return m


_AC = _ac_mask()


def capacity(c: CoefArray) -> int:
    """Number of nonzero AC coefficients (one bit each at full rate)."""
    return int(np.count_nonzero(c.coefs[..., _AC]))


def capacity_profile(images: Sequence[CoefArray]) -> np.ndarray:
    return np.array([capacity(c) for c in images], dtype=np.int64)


def _fill(order: np.ndarray, caps: np.ndarray, L: int) -> np.ndarray:
    out = np.zeros_like(caps)
    rest = L
    for i in order:
        if rest <= 0:
            break
        take = min(int(caps[i]), rest)
        out[i] = take
        rest -= take
    return out


def _by_capacity(caps: np.ndarray) -> np.ndarray:
    # decreasing capacity, lower index first among equals
    return np.lexsort((np.arange(len(caps)), -caps))


def _spread_remainder(lengths: np.ndarray, caps: np.ndarray, rest: int) -> int:
    """Hand out ``rest`` bits one at a time, largest capacity first."""
    order = _by_capacity(caps)
    while rest > 0:
        moved = 0
        for i in order:
            if rest == 0:
                break
            if lengths[i] < caps[i]:
                lengths[i] += 1
                rest -= 1
                moved += 1
        if moved == 0:
            break
    return rest


def allocate(strategy: str, capacities, L: int, rng: np.random.Generator | None = None) -> Allocation:
    """Split a message of ``L`` bits over images with the given capacities."""
    caps = np.asarray(capacities, dtype=np.int64)
    if caps.ndim != 1 or len(caps) == 0:
        raise ValueError("capacities must be a non-empty 1-D sequence")
    if np.any(caps < 0):
        raise ValueError("capacities must be non-negative")
    L = int(L)
    if L < 0:
        raise ValueError("message length must be non-negative")
    if L > caps.sum():
        raise ValueError(f"message of {L} bits exceeds total capacity {int(caps.sum())}")
    n = len(caps)

    if strategy == "max-greedy":
        lengths = _fill(_by_capacity(caps), caps, L)
    elif strategy == "max-random":
        if rng is None:
            raise ValueError("max-random needs an rng")
        lengths = _fill(rng.permutation(n), caps, L)
    elif strategy == "linear":
        total = int(caps.sum())
        lengths = caps * L // total if total else np.zeros_like(caps)
        _spread_remainder(lengths, caps, L - int(lengths.sum()))
    elif strategy == "even":
        target = np.full(n, L // n, dtype=np.int64)
        lengths = np.minimum(target, caps)
        overflow = L - int(lengths.sum())
        if np.any(target > caps):
            logger.debug("even allocation: %d bits overflow past full images", int((target - lengths).sum()))
        _spread_remainder(lengths, caps, overflow)
    else:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    return Allocation(lengths.astype(np.int64), strategy)


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def inv_binary_entropy(alpha: float, tol: float = 1e-10) -> float:
    """Change rate in [0, 0.5] whose binary entropy equals ``alpha``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return 0.0
    if alpha == 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def change_rate(alpha: float, model: str = "entropy") -> float:
    if model == "entropy":
        return inv_binary_entropy(alpha)
    if model == "linear":
        return alpha / 2.0
    raise ValueError(f"unknown change model {model!r}")


def nsf5_simulate(
    c: CoefArray,
    payload_bits: int,
    rng: np.random.Generator,
    model: str = "entropy",
    image_id: int = 0,
) -> tuple[CoefArray, EmbedRecord]:
    """Simulate nsF5 embedding of ``payload_bits`` into ``c``.

    Every nonzero AC coefficient shrinks one step toward zero with
    probability rho, where rho follows from the relative payload.
    """
    cap = capacity(c)
    payload_bits = int(payload_bits)
    if payload_bits < 0:
        raise ValueError("payload must be non-negative")
    if payload_bits > cap:
        raise ValueError(f"payload {payload_bits} exceeds capacity {cap}")
    if payload_bits == 0:
        return c, EmbedRecord(image_id, 0, 0.0, 0)
    rho = change_rate(payload_bits / cap, model)
    coefs = c.coefs.copy()
    ac = coefs[..., _AC]
    hit = (ac != 0) & (rng.random(ac.shape) < rho)
    ac[hit] -= np.sign(ac[hit])
    coefs[..., _AC] = ac
    return c.replace(coefs), EmbedRecord(image_id, payload_bits, rho, int(hit.sum()))


def embed_proportion(
    images: Sequence[CoefArray],
    bpnc: float,
    proportion: float,
    rng: np.random.Generator,
    model: str = "entropy",
) -> tuple[list[CoefArray], list[EmbedRecord]]:
    """Embed ``bpnc`` into each of ceil(proportion * m) randomly chosen images."""
    m = len(images)
    k = math.ceil(proportion * m - 1e-9)
    chosen = set(rng.choice(m, size=k, replace=False).tolist()) if k else set()
    out, records = [], []
    for i, c in enumerate(images):
        if i in chosen and bpnc > 0:
            bits = int(math.floor(bpnc * capacity(c)))
            c, rec = nsf5_simulate(c, bits, rng, model, image_id=i)
            records.append(rec)
        out.append(c)
    return out, records


def embed_batch(
    images: Sequence[CoefArray],
    strategy: str,
    bpnc: float,
    rng: np.random.Generator,
    model: str = "entropy",
) -> tuple[list[CoefArray], list[EmbedRecord]]:
    """Spread ``bpnc`` times the total capacity over ``images`` by ``strategy``."""
    caps = capacity_profile(images)
    L = int(math.floor(bpnc * caps.sum()))
    alloc = allocate(strategy, caps, L, rng)
    out, records = [], []
    for i, (c, bits) in enumerate(zip(images, alloc.lengths)):
        if bits > 0:
            c, rec = nsf5_simulate(c, int(bits), rng, model, image_id=i)
            records.append(rec)
        out.append(c)
    return out, records


def write_manifest(records: Sequence[EmbedRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(r.to_json() + "\n")
