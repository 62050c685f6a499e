"""Command-line interface: ``stegid <subcommand> [options]``.

Directory layout shared by the subcommands: a coefficient corpus is one
sub-directory per actor (``actor000/``) holding ``.stca`` files, and a
feature corpus is one ``actorNNN.stfm`` matrix per actor.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import formats
from .bench import ExperimentConfig, Report, run_experiment, strategy_sweep
from .cluster import agglomerate, accuse, final_two_clusters
from .dctdomain import compress, decompress, draw_source_params, quality_to_table, synth_cover
from .embedsim import STRATEGIES, embed_batch, embed_proportion, write_manifest
from .ensemble import CropSpec, li_ensemble, wu_ensemble
from .features import extract
from .outlier import SuspicionRanking, lof_scores
from .project import ProjectionBasis, apply_projection, cls, mcv, ols, pct
from .setdist import DistanceMatrix, KernelSpec, actor_distance_matrix, prepare_sets

log = logging.getLogger("stegid")


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _seed(args, cfg=None) -> int:
    if args.seed is not None:
        return args.seed
    return cfg.seed if cfg is not None else 0


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _actor_dirs(root: Path) -> list[Path]:
    dirs = sorted(p for p in Path(root).iterdir() if p.is_dir() and p.name.startswith("actor"))
    if not dirs:
        raise SystemExit(f"no actor directories under {root}")
    return dirs


def _load_corpus(root: Path):
    return [[formats.load_coef(f) for f in sorted(d.glob("*.stca"))] for d in _actor_dirs(root)]


def _load_feature_sets(root: Path) -> tuple[list[np.ndarray], str]:
    files = sorted(Path(root).glob("actor*.stfm"))
    if not files:
        raise SystemExit(f"no actor*.stfm files under {root}")
    loaded = [formats.load_features(f) for f in files]
    return [F for F, _ in loaded], loaded[0][1]


def cmd_gen_covers(args) -> None:
    cfg = _load_config(args)
    out = _out(args)
    ss = np.random.SeedSequence(_seed(args, cfg))
    src_rng, cov_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    params = draw_source_params(cfg.n, src_rng, cfg.height, cfg.width, cfg.source_spread)
    table = quality_to_table(cfg.quality)
    for p in params:
        d = out / f"actor{p.source_id:03d}"
        d.mkdir(exist_ok=True)
        for j in range(cfg.m):
            c = compress(synth_cover(p, cov_rng), table=table)
            formats.save_coef(c, d / f"img{j:03d}.stca")
            if args.pgm:
                formats.save_pgm(decompress(c), d / f"img{j:03d}.pgm")
    _write_json(out / "sources.json", [p.to_dict() for p in params])


def cmd_embed(args) -> None:
    cfg = _load_config(args)
    out = _out(args)
    files = sorted(Path(args.input).glob("*.stca"))
    if not files:
        raise SystemExit(f"no .stca files in {args.input}")
    images = [formats.load_coef(f) for f in files]
    rng = np.random.default_rng(_seed(args, cfg))
    payload = cfg.payload if args.payload is None else args.payload
    if args.strategy:
        stego, records = embed_batch(images, args.strategy, payload, rng, cfg.change_model)
    else:
        proportion = cfg.proportion if args.proportion is None else args.proportion
        stego, records = embed_proportion(images, payload, proportion or 1.0, rng, cfg.change_model)
    for f, c in zip(files, stego):
        formats.save_coef(c, out / f.name)
    write_manifest(records, out / "manifest.jsonl")


def cmd_features(args) -> None:
    out = _out(args)
    for d in _actor_dirs(Path(args.input)):
        images = [formats.load_coef(f) for f in sorted(d.glob("*.stca"))]
        F = extract(images, args.schema)
        formats.save_features(F, args.schema, out / f"{d.name}.stfm")
        if args.csv:
            formats.save_features_csv(F, args.schema, out / f"{d.name}.csv")


def _distances(args, sets) -> DistanceMatrix:
    sets = prepare_sets(sets, args.preprocess)
    kernel = args.kernel if args.kernel == "gaussian-median" else KernelSpec(args.kernel, args.gamma)
    return actor_distance_matrix(sets, args.measure, kernel, _seed(args))


def cmd_distances(args) -> None:
    sets, _ = _load_feature_sets(Path(args.input))
    _distances(args, sets).to_csv(_out(args) / "distances.csv")


def _distance_input(args) -> DistanceMatrix:
    path = Path(args.input)
    if path.is_file():
        return DistanceMatrix.from_csv(path)
    sets, _ = _load_feature_sets(path)
    return _distances(args, sets)


def cmd_detect_cluster(args) -> None:
    out = _out(args)
    d = _distance_input(args)
    tree = agglomerate(d, args.linkage, args.average)
    tree.to_csv(out / "dendrogram.csv", d.ids)
    tree.to_dot(out / "dendrogram.dot", d.ids)
    c1, c2 = final_two_clusters(tree)
    acc = accuse(c1, c2, args.accuse, np.random.default_rng([_seed(args), 1]))
    ids = list(d.ids)
    _write_json(
        out / "accusation.json",
        {
            "accused": [ids[i] for i in acc.accused],
            "c1": [ids[i] for i in acc.c1],
            "c2": [ids[i] for i in acc.c2],
            "order": [ids[i] for i in acc.order],
        },
    )


def cmd_detect_lof(args) -> None:
    out = _out(args)
    d = _distance_input(args)
    ranking = SuspicionRanking.from_scores(lof_scores(d, args.k), d.ids)
    ranking.to_csv(out / "ranking.csv")
    (out / "ranking.json").write_text(ranking.to_json() + "\n", encoding="utf-8")


def cmd_ensemble_li(args) -> None:
    images = _load_corpus(Path(args.input))
    res = li_ensemble(images, CropSpec(args.crop, args.crop, args.T, not args.pixel_crop), _seed(args))
    _write_json(_out(args) / "ensemble.json", res.manifest)


def cmd_ensemble_wu(args) -> None:
    out = _out(args)
    sets, _ = _load_feature_sets(Path(args.input))
    res = wu_ensemble(prepare_sets(sets, args.preprocess), args.p, args.T, args.k, _seed(args), normalize=False)
    res.ranking.to_csv(out / "ranking.csv")
    _write_json(out / "ensemble.json", res.manifest)


def cmd_project_fit(args) -> None:
    out = _out(args)
    Xs, _ = formats.load_features(args.stego)
    ys = np.loadtxt(args.labels, dtype=np.float64, ndmin=1)
    if args.method == "PCT":
        basis = pct(np.vstack([Xs] + ([formats.load_features(args.cover)[0]] if args.cover else [])), args.k)
    elif args.method == "MCV":
        basis = mcv(Xs, ys, args.k)
    elif args.method == "OLS":
        basis = ProjectionBasis(ols(Xs, ys, args.lam), "OLS", args.lam or 0.0)
    else:
        if not args.cover:
            raise SystemExit("CLS needs --cover features")
        basis = cls(Xs, ys, formats.load_features(args.cover)[0], args.lam, args.k)
    basis.save(out / "basis.stpb")
    basis.to_csv(out / "basis.csv")


def cmd_project_apply(args) -> None:
    out = _out(args)
    basis = ProjectionBasis.load(args.basis)
    for f in sorted(Path(args.input).glob("actor*.stfm")):
        F, _ = formats.load_features(f)
        formats.save_features(apply_projection(F, basis), "PROJECTED", out / f.name)


def cmd_bench(args) -> None:
    cfg = _load_config(args)
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    report = Report(cfg, run_experiment(cfg, args.threads))
    report.write(_out(args))
    s = report.summary()
    msg = f"accuracy {s['accuracy']:.3f}"
    if "average_rank" in s:
        msg += f", average rank {s['average_rank']:.3f} (random guess {s['random_guess_rank']:.1f})"
    print(msg)


def cmd_sweep(args) -> None:
    cfg = _load_config(args)
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    rep = strategy_sweep(cfg, args.strategies, args.payloads, args.threads)
    out = _out(args)
    (out / "sweep.json").write_text(rep.to_json(), encoding="utf-8")
    rep.write_plot_data(out / "plot-data.csv")
    for s in args.strategies:
        print(s, " ".join(f"{p:g}:{r:.2f}" for p, r in rep.curve(s)))


def _add_distance_opts(p) -> None:
    p.add_argument("--measure", default="mmd", choices=["mmd", "mean", "avg", "euclidean"])
    p.add_argument("--kernel", default="linear", choices=["linear", "gaussian", "gaussian-median"])
    p.add_argument("--gamma", type=float)
    p.add_argument("--preprocess", default="standardize", choices=["standardize", "whiten", "none"])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker processes for independent trials")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="stegid", description="Steganographer identification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-covers", parents=[common], help="synthesize per-actor cover corpora")
    p.add_argument("--pgm", action="store_true", help="also write decompressed PGM images")
    p.set_defaults(func=cmd_gen_covers)

    p = sub.add_parser("embed", parents=[common], help="simulate nsF5 on one actor's images")
    p.add_argument("--input", required=True, help="directory of .stca files")
    p.add_argument("--payload", type=float, help="bits per nonzero AC coefficient")
    p.add_argument("--proportion", type=float, help="fraction of images carrying payload")
    p.add_argument("--strategy", choices=STRATEGIES, help="batch strategy instead of a proportion")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("features", parents=[common], help="extract per-actor feature matrices")
    p.add_argument("--input", required=True, help="coefficient corpus root")
    p.add_argument("--schema", default="PEV274", choices=["PEV274", "LI250"])
    p.add_argument("--csv", action="store_true", help="also write CSV copies")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("distances", parents=[common], help="actor distance matrix")
    p.add_argument("--input", required=True, help="feature corpus root")
    _add_distance_opts(p)
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("detect-cluster", parents=[common], help="hierarchical clustering accusation")
    p.add_argument("--input", required=True, help="distances.csv or feature corpus root")
    p.add_argument("--linkage", default="single", choices=["single", "complete", "centroid", "average"])
    p.add_argument("--average", default="literal", choices=["literal", "upgma"])
    p.add_argument("--accuse", type=int, default=1, help="number of actors to accuse")
    _add_distance_opts(p)
    p.set_defaults(func=cmd_detect_cluster)

    p = sub.add_parser("detect-lof", parents=[common], help="LOF suspicion ranking")
    p.add_argument("--input", required=True, help="distances.csv or feature corpus root")
    p.add_argument("--k", type=int, default=10)
    _add_distance_opts(p)
    p.set_defaults(func=cmd_detect_lof)

    p = sub.add_parser("ensemble-li", parents=[common], help="crop ensemble with majority voting")
    p.add_argument("--input", required=True, help="coefficient corpus root")
    p.add_argument("--crop", type=int, default=56, help="cropped side length in pixels")
    p.add_argument("--T", type=int, default=9)
    p.add_argument(
        "--pixel-crop", action="store_true", help="crop at any pixel offset and recompress instead of cutting whole blocks"
    )
    p.set_defaults(func=cmd_ensemble_li)

    p = sub.add_parser("ensemble-wu", parents=[common], help="feature-subsampling LOF ensemble")
    p.add_argument("--input", required=True, help="feature corpus root")
    p.add_argument("--p", type=int, default=1, help="points per actor")
    p.add_argument("--T", type=int, default=9)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--preprocess", default="standardize", choices=["standardize", "whiten", "none"])
    p.set_defaults(func=cmd_ensemble_wu)

    p = sub.add_parser("project-fit", parents=[common], help="fit a linear projection")
    p.add_argument("--method", default="CLS", choices=["PCT", "MCV", "OLS", "CLS"])
    p.add_argument("--stego", required=True, help="STFM stego feature matrix")
    p.add_argument("--labels", required=True, help="text file, one change rate per stego row")
    p.add_argument("--cover", help="STFM cover feature matrix (CLS, PCT)")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--lam", type=float, help="ridge; default is relative to the Gram trace")
    p.set_defaults(func=cmd_project_fit)

    p = sub.add_parser("project-apply", parents=[common], help="project a feature corpus")
    p.add_argument("--basis", required=True)
    p.add_argument("--input", required=True, help="feature corpus root")
    p.set_defaults(func=cmd_project_apply)

    p = sub.add_parser("bench", parents=[common], help="seeded multi-trial experiment")
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", parents=[common], help="strategy x payload sweep")
    p.add_argument("--trials", type=int)
    p.add_argument("--strategies", nargs="+", default=list(STRATEGIES), choices=STRATEGIES)
    p.add_argument("--payloads", nargs="+", type=float, default=[0.05, 0.1, 0.2, 0.3])
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
