"""Seeded multi-actor experiments: synthetic actors, embedding, features,
detection, and average-rank / accuracy / confusion-matrix reporting.

Seeds split hierarchically. The master seed yields one seed per trial, and
each trial seed yields independent streams for cover sources, cover
content, embedding, and the detector, so a component can be re-run alone.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from .cluster import LINKAGES, identify_clustering
from .dctdomain import CoefArray, compress, draw_source_params, quality_to_table, synth_cover
from .embedsim import CHANGE_MODELS, STRATEGIES, capacity, embed_batch, embed_proportion, nsf5_simulate
from .ensemble import CropSpec, li_ensemble, wu_ensemble
from .features import SCHEMAS, extract
from .outlier import identify_lof
from .project import apply_projection, cls, mcv, ols, pct
from .setdist import KernelSpec, prepare_sets

logger = logging.getLogger(__name__)

DETECTORS = ("cluster", "lof", "li-ensemble", "wu-ensemble")
PREPROCESS = ("standardize", "whiten", "none")

# Published figures from a private corpus of real photos. Reports carry them
# for context only; they are never compared against.
REFERENCE_NUMBERS = {
    "note": "real-photo corpus - not comparable",
    "clustering_confusion_0.25bpnc_25pct_overall_accuracy": 0.903,
    "clustering_confusion_0.3bpnc_30pct_overall_accuracy": 0.999,
}


@dataclass(frozen=True)
class DetectorSpec:
    kind: str = "cluster"
    linkage: str = "single"
    kernel: str = "linear"
    gamma: float | None = None
    measure: str = "mmd"
    k: int = 10
    T: int = 9
    p: int = 1
    crop: int | None = None
    crop_aligned: bool = True

    def __post_init__(self):
        if self.kind not in DETECTORS:
            raise ValueError(f"unknown detector {self.kind!r}")
        if self.linkage not in LINKAGES:
            raise ValueError(f"unknown linkage {self.linkage!r}")

    def kernel_spec(self):
        if self.kernel == "gaussian-median":
            return self.kernel
        return KernelSpec(self.kernel, self.gamma)


@dataclass(frozen=True)
class ProjectionSpec:
    method: str = "CLS"
    k: int = 50
    lam: float | None = None
    train_images: int = 200
    label: str = "change-rate"
    rates: tuple[float, ...] = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5)

    def __post_init__(self):
        if self.method not in ("PCT", "MCV", "OLS", "CLS"):
            raise ValueError(f"unknown projection {self.method!r}")
        if self.label not in ("change-rate", "payload"):
            raise ValueError("label must be 'change-rate' or 'payload'")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 20
    m: int = 50
    guilty: int = 1
    payload: float = 0.3
    proportion: float | None = 0.3
    strategy: str = "max-greedy"
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    schema: str = "PEV274"
    projection: ProjectionSpec | None = None
    trials: int = 100
    seed: int = 0
    height: int = 64
    width: int = 64
    quality: int = 80
    source_spread: float = 1.0
    change_model: str = "entropy"
    preprocess: str = "standardize"
    fixed_sources: bool = False

    def __post_init__(self):
        if isinstance(self.detector, dict):
            object.__setattr__(self, "detector", DetectorSpec(**self.detector))
        if isinstance(self.projection, dict):
            proj = dict(self.projection)
            if "rates" in proj:
                proj["rates"] = tuple(proj["rates"])
            object.__setattr__(self, "projection", ProjectionSpec(**proj))
        if not 1 <= self.guilty < self.n:
            raise ValueError("guilty count must be in [1, n)")
        if self.n < 3 or self.m < 2:
            raise ValueError("need n >= 3 actors with m >= 2 images")
        if not 0.0 <= self.payload <= 1.0:
            raise ValueError("payload must be in [0, 1]")
        if self.proportion is not None and not 0.0 < self.proportion <= 1.0:
            raise ValueError("proportion must be in (0, 1]")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.schema not in SCHEMAS:
            raise ValueError(f"unknown schema {self.schema!r}")
        if self.change_model not in CHANGE_MODELS:
            raise ValueError(f"unknown change model {self.change_model!r}")
        if self.preprocess not in PREPROCESS:
            raise ValueError(f"unknown preprocessing {self.preprocess!r}")
        if self.trials < 1:
            raise ValueError("need at least one trial")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["projection"] is not None:
            d["projection"]["rates"] = list(d["projection"]["rates"])
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def identity(self) -> str:
        """Hash of everything except trial count and master seed."""
        d = self.to_dict()
        d.pop("trials")
        d.pop("seed")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class TrialResult:
    seed: int
    guilty: tuple[int, ...]
    order: tuple[int, ...]
    ranks: tuple[int, ...]
    config_id: str = ""
    wall_time: float = 0.0

    @property
    def identified(self) -> int:
        return self.order[0]

    def to_dict(self) -> dict:
        # wall time is left out so artifacts stay byte-identical across reruns
        return {
            "seed": self.seed,
            "guilty": list(self.guilty),
            "order": list(self.order),
            "ranks": list(self.ranks),
        }


def trial_seeds(master: int, trials: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(master).spawn(trials)]


def _streams(seed: int) -> dict[str, np.random.Generator]:
    names = ("sources", "covers", "embed", "detect")
    return {k: np.random.default_rng(s) for k, s in zip(names, np.random.SeedSequence(seed).spawn(len(names)))}


def make_actors(cfg: ExperimentConfig, src_rng, cover_rng, params=None) -> tuple[list, list[list[CoefArray]]]:
    if params is None:
        params = draw_source_params(cfg.n, src_rng, cfg.height, cfg.width, cfg.source_spread)
    table = quality_to_table(cfg.quality)
    covers = [[compress(synth_cover(p, cover_rng), table=table) for _ in range(cfg.m)] for p in params]
    return params, covers


def embed_actor(images: Sequence[CoefArray], cfg: ExperimentConfig, payload: float, strategy: str, rng) -> list[CoefArray]:
    if payload == 0.0:
        return list(images)
    if cfg.proportion is not None:
        stego, _ = embed_proportion(images, payload, cfg.proportion, rng, cfg.change_model)
    else:
        stego, _ = embed_batch(images, strategy, payload, rng, cfg.change_model)
    return stego


def _order_from_votes(votes: dict, n: int) -> tuple[int, ...]:
    counts = np.zeros(n)
    for a, c in votes.items():
        counts[int(a)] = c
    return tuple(int(i) for i in np.lexsort((np.arange(n), -counts)))


def detect(sets: Sequence[np.ndarray], spec: DetectorSpec, preprocess: str, seed: int, images=None) -> tuple[int, ...]:
    """Full suspicion order of the actors, most suspicious first."""
    if spec.kind == "li-ensemble":
        if images is None:
            raise ValueError("the crop ensemble needs coefficient images")
        n = len(images)
        h = 8 * images[0][0].blocks_y
        w = 8 * images[0][0].blocks_x
        side = spec.crop or max(24, min(h, w) - 8)
        res = li_ensemble(images, CropSpec(min(side, h), min(side, w), spec.T, spec.crop_aligned), seed)
        order = _order_from_votes(res.manifest["votes"], n)
        # the tie-broken winner leads
        return (res.verdict,) + tuple(a for a in order if a != res.verdict)
    sets = prepare_sets(sets, preprocess)
    if spec.kind == "cluster":
        acc = identify_clustering(sets, spec.linkage, spec.kernel_spec(), 1, seed, spec.measure, normalize=False)
        return acc.order
    if spec.kind == "lof":
        return identify_lof(sets, spec.k, spec.measure, spec.kernel_spec(), seed, normalize=False).actors
    res = wu_ensemble(sets, spec.p, spec.T, spec.k, seed, normalize=False)
    return res.ranking.actors


def _train_projection(cfg: ExperimentConfig, rng: np.random.Generator):
    """Fit a projection on held-out covers embedded at a grid of rates.

    Returns the fitted basis and the column statistics used to normalize
    the training features.
    """
    spec = cfg.projection
    table = quality_to_table(cfg.quality)
    params = draw_source_params(cfg.n, rng, cfg.height, cfg.width, cfg.source_spread)
    covers = [compress(synth_cover(params[i % cfg.n], rng), table=table) for i in range(spec.train_images)]
    stego, ys = [], []
    for i, c in enumerate(covers):
        rate = spec.rates[i % len(spec.rates)]
        cap = capacity(c)
        s, rec = nsf5_simulate(c, int(rate * cap), rng, cfg.change_model)
        stego.append(s)
        ys.append(rec.changes / max(cap, 1) if spec.label == "change-rate" else rate)
    Xc = extract(covers, cfg.schema)
    Xs = extract(stego, cfg.schema)
    both = np.vstack([Xc, Xs])
    mu, sd = both.mean(axis=0), both.std(axis=0)
    sd = np.where(sd > 1e-12, sd, np.inf)
    Xc, Xs = (Xc - mu) / sd, (Xs - mu) / sd
    y = np.asarray(ys)
    k = min(spec.k, Xc.shape[1])
    if spec.method == "PCT":
        basis = pct(np.vstack([Xc, Xs]), k).W
    elif spec.method == "MCV":
        basis = mcv(Xs, y, k).W
    elif spec.method == "OLS":
        basis = ols(Xs, y, spec.lam)[:, None]
    else:
        basis = cls(Xs, y, Xc, spec.lam, k).W
    return basis, mu, sd


def _features(cfg: ExperimentConfig, actors: Sequence[Sequence[CoefArray]]) -> list[np.ndarray]:
    return [extract(a, cfg.schema) for a in actors]


def _project(sets, proj):
    if proj is None:
        return sets
    W, mu, sd = proj
    return [apply_projection((s - mu) / sd, W) for s in sets]


def _result(cfg, seed, guilty, order, t0) -> TrialResult:
    ranks = tuple(order.index(g) + 1 for g in guilty)
    return TrialResult(seed, tuple(guilty), tuple(order), ranks, cfg.identity(), time.perf_counter() - t0)


def run_trial(cfg: ExperimentConfig, seed: int, guilty: Sequence[int] | None = None, params=None) -> TrialResult:
    """One complete seeded trial: actors, embedding, features, detection."""
    t0 = time.perf_counter()
    rs = _streams(seed)
    params, covers = make_actors(cfg, rs["sources"], rs["covers"], params)
    if guilty is None:
        guilty = sorted(int(g) for g in rs["sources"].choice(cfg.n, cfg.guilty, replace=False))
    actors = list(covers)
    for g in guilty:
        actors[g] = embed_actor(covers[g], cfg, cfg.payload, cfg.strategy, rs["embed"])
    proj = _train_projection(cfg, rs["embed"]) if cfg.projection else None
    det_seed = int(rs["detect"].integers(2**32))
    sets = [] if cfg.detector.kind == "li-ensemble" else _project(_features(cfg, actors), proj)
    order = detect(sets, cfg.detector, cfg.preprocess, det_seed, images=actors)
    return _result(cfg, seed, guilty, order, t0)


def _run_indexed(args) -> TrialResult:
    cfg, index, seed, params = args
    guilty = [index % cfg.n] if cfg.fixed_sources and cfg.guilty == 1 else None
    res = run_trial(cfg, seed, guilty, params)
    logger.info("trial %d seed %d guilty %s rank %s (%.2fs)", index, seed, res.guilty, res.ranks, res.wall_time)
    return res


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> list[TrialResult]:
    """All trials of a config, reduced in trial order.

    With ``fixed_sources`` every trial shares one set of cover sources drawn
    from the master seed and the single guilty actor cycles through them.
    """
    seeds = trial_seeds(cfg.seed, cfg.trials)
    params = None
    if cfg.fixed_sources:
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(cfg.trials + 1)[-1])
        params = draw_source_params(cfg.n, rng, cfg.height, cfg.width, cfg.source_spread)
    jobs = [(cfg, i, s, params) for i, s in enumerate(seeds)]
    if threads <= 1:
        return [_run_indexed(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_indexed, jobs))


def _single_guilty(results: Sequence[TrialResult]) -> None:
    if not results:
        raise ValueError("no results")
    if len({r.config_id for r in results}) > 1:
        raise ValueError("results come from different configurations")
    if any(len(r.guilty) != 1 for r in results):
        raise ValueError("expected single-guilty trials")


def average_rank(results: Sequence[TrialResult]) -> float:
    _single_guilty(results)
    return float(np.mean([r.ranks[0] for r in results]))


def rank_stderr(results: Sequence[TrialResult]) -> float:
    ranks = [r.ranks[0] for r in results]
    return float(np.std(ranks, ddof=1) / math.sqrt(len(ranks))) if len(ranks) > 1 else 0.0


def accuracy(results: Sequence[TrialResult]) -> float:
    """Correct top-1 identifications over trials."""
    if not results:
        raise ValueError("no results")
    return sum(r.identified in r.guilty for r in results) / len(results)


def confusion_matrix(results: Sequence[TrialResult], n: int) -> np.ndarray:
    """Counts with rows = planted guilty actor, columns = identified actor."""
    _single_guilty(results)
    cm = np.zeros((n, n), dtype=np.int64)
    for r in results:
        cm[r.guilty[0], r.identified] += 1
    return cm


def guess_rank_std(n: int) -> float:
    """Standard deviation of a uniformly random rank in 1..n."""
    return math.sqrt((n * n - 1) / 12.0)


@dataclass
class Report:
    config: ExperimentConfig
    results: list[TrialResult]

    def summary(self) -> dict:
        cfg = self.config
        out = {
            "config": cfg.to_dict(),
            "trials": len(self.results),
            "accuracy": accuracy(self.results),
            "accuracy_definition": "correct top-1 identifications / trials",
            "reference": REFERENCE_NUMBERS,
        }
        if cfg.guilty == 1:
            out["average_rank"] = average_rank(self.results)
            out["rank_stderr"] = rank_stderr(self.results)
            out["random_guess_rank"] = (cfg.n + 1) / 2
            out["confusion_matrix"] = confusion_matrix(self.results, cfg.n).tolist()
        out["per_trial"] = [r.to_dict() for r in self.results]
        return out

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2) + "\n"

    def write(self, out_dir) -> None:
        from pathlib import Path

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json(), encoding="utf-8")
        with open(out / "trials.csv", "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["trial", "seed", "guilty", "identified", "rank"])
            for i, r in enumerate(self.results):
                w.writerow([i, r.seed, " ".join(map(str, r.guilty)), r.identified, " ".join(map(str, r.ranks))])
        if self.config.guilty == 1:
            cm = confusion_matrix(self.results, self.config.n)
            with open(out / "confusion.csv", "w", encoding="utf-8", newline="") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow(["guilty"] + [str(j) for j in range(self.config.n)])
                for i, row in enumerate(cm):
                    w.writerow([i] + row.tolist())


@dataclass(frozen=True)
class SweepCell:
    strategy: str
    payload: float
    ranks: tuple[int, ...]

    @property
    def mean_rank(self) -> float:
        return float(np.mean(self.ranks))

    @property
    def stderr(self) -> float:
        r = np.asarray(self.ranks, dtype=np.float64)
        return float(r.std(ddof=1) / math.sqrt(len(r))) if len(r) > 1 else 0.0


@dataclass
class SweepReport:
    config: ExperimentConfig
    cells: list[SweepCell]

    def curve(self, strategy: str) -> list[tuple[float, float]]:
        return [(c.payload, c.mean_rank) for c in self.cells if c.strategy == strategy]

    def mean_rank(self, strategy: str, payload: float) -> float:
        for c in self.cells:
            if c.strategy == strategy and c.payload == payload:
                return c.mean_rank
        raise KeyError((strategy, payload))

    def to_json(self) -> str:
        doc = {
            "config": self.config.to_dict(),
            "cells": [
                {"strategy": c.strategy, "payload": c.payload, "mean_rank": c.mean_rank, "stderr": c.stderr, "ranks": list(c.ranks)}
                for c in self.cells
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def write_plot_data(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["strategy", "payload", "mean_rank", "stderr"])
            for c in self.cells:
                w.writerow([c.strategy, repr(c.payload), repr(c.mean_rank), repr(c.stderr)])


def _sweep_trial(args) -> list[list[int]]:
    cfg, seed, strategies, payloads = args
    rs = _streams(seed)
    _, covers = make_actors(cfg, rs["sources"], rs["covers"])
    g = int(rs["sources"].integers(cfg.n))
    base = _features(cfg, covers)
    det_seed = int(rs["detect"].integers(2**32))
    emb_key = int(rs["embed"].integers(2**32))
    out = []
    for strategy in strategies:
        row = []
        for pi, payload in enumerate(payloads):
            # same embedding stream for every strategy at a payload level
            rng = np.random.default_rng([emb_key, pi])
            sets = list(base)
            sets[g] = extract(embed_actor(covers[g], cfg, payload, strategy, rng), cfg.schema)
            order = detect(sets, cfg.detector, cfg.preprocess, det_seed)
            row.append(order.index(g) + 1)
        out.append(row)
    logger.info("sweep trial seed %d guilty %d ranks %s", seed, g, out)
    return out


def strategy_sweep(
    cfg: ExperimentConfig,
    strategies: Sequence[str] = STRATEGIES,
    payloads: Sequence[float] = (0.05, 0.1, 0.2, 0.3),
    threads: int = 1,
) -> SweepReport:
    """Mean guilty rank per (strategy, payload) with shared covers per trial.

    Within a trial every cell sees the same actors, the same guilty actor and
    the same cover features, so cells differ only by how the payload is
    spread over the guilty actor's images.
    """
    if cfg.proportion is not None:
        cfg = replace(cfg, proportion=None)
    for s in strategies:
        if s not in STRATEGIES:
            raise ValueError(f"unknown strategy {s!r}")
    jobs = [(cfg, s, tuple(strategies), tuple(payloads)) for s in trial_seeds(cfg.seed, cfg.trials)]
    if threads <= 1:
        per_trial = [_sweep_trial(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            per_trial = list(pool.map(_sweep_trial, jobs))
    cells = []
    for si, s in enumerate(strategies):
        for pi, p in enumerate(payloads):
            cells.append(SweepCell(s, float(p), tuple(t[si][pi] for t in per_trial)))
    return SweepReport(cfg, cells)
