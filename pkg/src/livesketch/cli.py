"""Command-line entry point: dataset prep, training, indexing, serving, evaluation."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import jointspace, rasternet, seqvae
from .config import Config, load_config
from .corpus import CorpusConfig, GENERATORS, build_toy_corpus, load_dataset, save_dataset
from .sketch import load_ndjson


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="livesketch", description="stroke-based image search toolkit")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--config", default=None, help="path to a JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a dataset from captured drawings or synthetic shapes")
    p.add_argument("--input", default=None, help="newline-delimited JSON drawing records")
    p.add_argument("--synthetic", action="store_true", help="generate parametric shapes instead of reading --input")
    p.add_argument("--classes", default=None, help="comma-separated class list")
    p.add_argument("--per-class", type=int, default=50, help="training sketches per class")
    p.add_argument("--per-class-test", type=int, default=10)
    p.add_argument("--per-class-gallery", type=int, default=10)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-vae", help="train the stroke-sequence autoencoder")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="models directory")
    p.add_argument("--epochs", type=int, default=None)

    p = sub.add_parser("train-raster", help="train the structure and semantic raster encoders")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="models directory")
    p.add_argument("--epochs", type=int, default=None)

    p = sub.add_parser("train-joint", help="train the joint-space projection layers")
    p.add_argument("--dataset", required=True)
    p.add_argument("--models", required=True, help="directory holding the vae and raster checkpoints")
    p.add_argument("--out", default=None, help="models directory (defaults to --models)")
    p.add_argument("--epochs", type=int, default=None)

    p = sub.add_parser("index", help="encode a dataset's gallery and build the search indexes")
    p.add_argument("--dataset", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the HTTP search service")
    p.add_argument("--index", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)

    p = sub.add_parser("eval", help="run retrieval/suggestion experiments and write reports")
    p.add_argument("--experiment", choices=("s2s", "s2i", "perturb", "all"), default="all")
    p.add_argument("--dataset", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("perturb-demo", help="emit a suggestion morph sequence for a sampled query")
    p.add_argument("--dataset", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--method", choices=("linear", "slerp", "backprop", "all"), default="all")
    p.add_argument("--out", required=True)
    return parser


def _cmd_ingest(args, cfg: Config) -> int:
    classes = args.classes.split(",") if args.classes else None
    corpus_cfg = CorpusConfig(
        classes=tuple(classes) if classes else CorpusConfig.classes,
        per_class_train=args.per_class,
        per_class_test=args.per_class_test,
        per_class_gallery=args.per_class_gallery,
        raster_size=cfg.dims.raster_size,
        max_len=cfg.dims.max_len,
        seed=cfg.seed,
    )
    source = None
    if not args.synthetic:
        if not args.input:
            print("ingest: need --input FILE or --synthetic", file=sys.stderr)
            return 1
        sketches, issues = load_ndjson(args.input)
        for issue in issues:
            print(f"ingest: line {issue.line_no}: {issue.message}", file=sys.stderr)
        source = {}
        for s in sketches:
            source.setdefault(s.label, []).append(s)
        if classes is None:
            corpus_cfg.classes = tuple(sorted(source))
    else:
        unknown = [c for c in (classes or []) if c not in GENERATORS]
        if unknown:
            print(f"ingest: unknown shape classes {unknown}; known: {sorted(GENERATORS)}", file=sys.stderr)
            return 1
    dataset = build_toy_corpus(corpus_cfg, source)
    save_dataset(dataset, args.out)
    print(f"ingest: wrote {len(dataset.train)} train / {len(dataset.test)} test sketches, "
          f"{len(dataset.gallery)} gallery items to {args.out}")
    return 0


def _cmd_train_vae(args, cfg: Config) -> int:
    dataset = load_dataset(args.dataset)
    vcfg = seqvae.VaeConfig(
        latent_dim=cfg.dims.latent_dim,
        encoder_hidden=cfg.dims.encoder_hidden,
        decoder_hidden=cfg.dims.decoder_hidden,
        max_len=dataset.max_len,
        epochs=args.epochs or cfg.vae_train.epochs,
        batch_size=cfg.vae_train.batch_size,
        learning_rate=cfg.vae_train.learning_rate,
        lr_decay_at=cfg.vae_train.lr_decay_at,
        offset_weight=cfg.vae_train.offset_weight,
        seed=cfg.seed,
    )
    enc, dec, curve = seqvae.train_vae(dataset.train_sketches(), vcfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seqvae.save_vae(out / "vae.npz", enc, dec)
    (out / "vae_curve.json").write_text(json.dumps(curve, default=float, indent=2))
    acc = seqvae.classification_accuracy(dataset.train_sketches(), enc, dataset.max_len)
    print(f"train-vae: {len(curve)} epochs, final total loss "
          f"{curve[-1].get('total', float('nan')):.3f}, train accuracy {acc:.3f}")
    return 0


def _cmd_train_raster(args, cfg: Config) -> int:
    dataset = load_dataset(args.dataset)
    tcfg = rasternet.TrainConfig(
        epochs=args.epochs or cfg.cnn_train.epochs,
        batch_size=cfg.cnn_train.batch_size,
        learning_rate=cfg.cnn_train.learning_rate,
        seed=cfg.seed,
    )
    struct, hist_s = rasternet.train_structure(dataset, tcfg, cfg.dims.raster_dim, cfg.dims.conv_channels)
    sem_cfg = rasternet.TrainConfig(
        epochs=tcfg.epochs, batch_size=tcfg.batch_size, learning_rate=3e-3, seed=cfg.seed + 1
    )
    sem, hist_z = rasternet.train_semantic(dataset, sem_cfg, cfg.dims.semantic_dim, cfg.dims.conv_channels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rasternet.save_encoders(out / "raster.npz", struct, sem)
    (out / "raster_curves.json").write_text(json.dumps({"structure": hist_s, "semantic": hist_z}, indent=2))
    print(f"train-raster: structure loss {hist_s[-1].get('triplet_loss', float('nan')):.4f}, "
          f"semantic accuracy {hist_z[-1].get('train_accuracy', float('nan')):.3f}")
    return 0


def _cmd_train_joint(args, cfg: Config) -> int:
    dataset = load_dataset(args.dataset)
    models = Path(args.models)
    enc, _ = seqvae.load_vae(models / "vae.npz")
    struct, _ = rasternet.load_encoders(models / "raster.npz")
    jcfg = jointspace.JointTrainConfig(
        epochs=args.epochs or cfg.joint_train.epochs,
        batch_size=cfg.joint_train.batch_size,
        learning_rate=cfg.joint_train.learning_rate,
        hidden=cfg.dims.fc_hidden,
        search_dim=cfg.dims.search_dim,
        seed=cfg.seed,
    )
    fc, hist = jointspace.train_joint(dataset, enc, struct, jcfg)
    out = Path(args.out or args.models)
    out.mkdir(parents=True, exist_ok=True)
    jointspace.save_fc(out / "fc.npz", fc)
    (out / "models_meta.json").write_text(json.dumps({"max_len": dataset.max_len}))
    (out / "joint_curve.json").write_text(json.dumps(hist, indent=2))
    print(f"train-joint: validation triplet accuracy {hist[-1].get('val_triplet_accuracy', float('nan')):.3f}, "
          f"branch gap {hist[-1].get('branch_gap', float('nan')):.3f}")
    return 0


def _cmd_index(args, cfg: Config) -> int:
    from .indexing import index_corpus
    from .stack import load_stack

    dataset = load_dataset(args.dataset)
    stack = load_stack(args.models)
    bundle = index_corpus(dataset, stack, args.out, cfg)
    print(f"index: {bundle.meta['gallery_count']} gallery items, "
          f"{bundle.meta['sketch_count']} corpus sketches -> {args.out}")
    return 0


def _cmd_serve(args, cfg: Config) -> int:
    import uvicorn

    from .indexing import load_bundle
    from .runtime import SearchRuntime
    from .server import create_app
    from .stack import load_stack

    try:
        bundle = load_bundle(args.index)
        stack = load_stack(args.models)
        runtime = SearchRuntime(stack, bundle, cfg)
    except (FileNotFoundError, ValueError) as exc:
        print(f"serve: cannot start: {exc}", file=sys.stderr)
        return 1
    host = args.host or cfg.service.host
    port = args.port or cfg.service.port
    uvicorn.run(create_app(runtime), host=host, port=port, log_level="warning")
    return 0


def _load_stack_for_eval(args):
    from .stack import load_stack

    return load_dataset(args.dataset), load_stack(args.models)


def _cmd_eval(args, cfg: Config) -> int:
    from . import experiments
    from .reporting import contact_sheet, write_reports

    dataset, stack = _load_stack_for_eval(args)
    reports = []
    if args.experiment in ("s2s", "all"):
        for modality in ("V-R", "R-V"):
            for shuffle in (False, True):
                reports.append(experiments.run_s2s(modality, shuffle, dataset, stack, seed=cfg.seed))
    if args.experiment in ("s2i", "all"):
        reports.extend(experiments.run_s2i(dataset, stack, seed=cfg.seed))
    out = Path(args.out)
    if args.experiment in ("perturb", "all"):
        bench = experiments.run_perturbation_bench(dataset, stack, seed=cfg.seed)
        sheet = {method: r.sequences[0] for method, r in bench.items()}
        contact_sheet(sheet, out / "perturbation_sheet.svg", dataset.raster_size)
        (out / "perturbation_bench.json").write_text(
            json.dumps(
                {
                    m: {
                        "improved_fraction": r.improved_fraction,
                        "decode_validity_rate": r.decode_validity_rate,
                        "start_distances": r.per_pair_start_distance,
                        "end_distances": r.per_pair_end_distance,
                    }
                    for m, r in bench.items()
                },
                indent=2,
            )
        )
    if reports:
        paths = write_reports(reports, out)
        from .reporting import report_table

        print(report_table(reports))
        print(f"eval: wrote {', '.join(sorted(paths))} under {args.out}")
    else:
        print(f"eval: wrote perturbation bench under {args.out}")
    return 0


def _cmd_perturb_demo(args, cfg: Config) -> int:
    from . import experiments
    from .reporting import contact_sheet

    dataset, stack = _load_stack_for_eval(args)
    methods = ("linear", "slerp", "backprop") if args.method == "all" else (args.method,)
    bench = experiments.run_perturbation_bench(dataset, stack, pairs=1, seed=cfg.seed)
    sheet = {m: bench[m].sequences[0] for m in methods}
    out = Path(args.out)
    path = contact_sheet(sheet, out / "perturb_demo.svg", dataset.raster_size)
    summary = {m: {"start": bench[m].per_pair_start_distance[0], "end": bench[m].per_pair_end_distance[0]}
               for m in methods}
    (out / "perturb_demo.json").write_text(json.dumps(summary, indent=2))
    print(f"perturb-demo: wrote {path}")
    for m, row in summary.items():
        print(f"  {m}: target distance {row['start']:.4f} -> {row['end']:.4f}")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "train-vae": _cmd_train_vae,
    "train-raster": _cmd_train_raster,
    "train-joint": _cmd_train_joint,
    "index": _cmd_index,
    "serve": _cmd_serve,
    "eval": _cmd_eval,
    "perturb-demo": _cmd_perturb_demo,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"livesketch: bad config: {exc}", file=sys.stderr)
        return 1
    np.seterr(all="ignore")
    try:
        return _COMMANDS[args.command](args, cfg)
    except (FileNotFoundError, ValueError) as exc:
        print(f"livesketch {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
