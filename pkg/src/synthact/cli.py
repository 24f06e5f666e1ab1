"""Command-line entry point.

Subcommands: generate (render a randomized dataset), convert-motion
(positions text file to BVH), split (build a train/test split from a
manifest), train (fit a classifier with one transfer strategy), eval
(score saved weights on a manifest split). Every train/eval/generate run
writes a run record JSON next to its outputs. Exit code 0 on success, 2 on
any structured error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .genmodel import (
    GenerationConfig,
    builtin_library,
    generate_dataset,
    load_library,
    load_manifest,
    pseudo_real_config,
    synthetic_config,
)
from .learn import (
    STRATEGIES,
    FeatureConfig,
    TrainConfig,
    load_weights,
    save_curves,
    save_weights,
    train,
)
from .motion import named_topology, parse_positions, positions_to_local_rotations, write_bvh
from .randomize import load_config


def _add_generate(sub):
    p = sub.add_parser("generate", help="render a randomized clip dataset")
    p.add_argument("--config", help="nuisance config file (key = value lines)")
    p.add_argument("--preset", choices=["synthetic", "pseudo-real"],
                   help="built-in nuisance preset, alternative to --config")
    p.add_argument("--out", required=True, help="output root directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--domain", choices=["synthetic", "pseudo-real", "real"],
                   default="synthetic", help="domain tag written to the manifest")
    p.add_argument("--classes", help="comma-separated action labels (default: all built-ins)")
    p.add_argument("--videos-per-class", type=int, default=4)
    p.add_argument("--frames", type=int, default=32)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--format", choices=["png", "ppm"], default="png")
    p.add_argument("--motions", help="directory of <action>/<clip>.bvh (default: built-in catalog)")
    p.add_argument("--no-groundtruth", action="store_true")
    p.set_defaults(func=cmd_generate)


def cmd_generate(args) -> int:
    if bool(args.config) == bool(args.preset):
        raise SystemExit("generate: pass exactly one of --config or --preset")
    if args.preset:
        nuis = pseudo_real_config() if args.preset == "pseudo-real" else synthetic_config()
    else:
        nuis = load_config(args.config)
    library = load_library(args.motions) if args.motions else builtin_library()
    classes = tuple(c.strip() for c in args.classes.split(",")) if args.classes \
        else tuple(library.actions)
    cfg = GenerationConfig(
        master_seed=args.seed,
        videos_per_class=args.videos_per_class,
        classes=classes,
        nuisances=nuis,
        out_root=args.out,
        n_frames=args.frames,
        fps=args.fps,
        width=args.width,
        height=args.height,
        domain=args.domain,
        frame_format=args.format,
        write_groundtruth=not args.no_groundtruth,
    )
    records = generate_dataset(cfg, library)
    from .harness import write_run_record

    write_run_record(os.path.join(args.out, "run.json"), "generate",
                     {k: v for k, v in vars(args).items() if k != "func"},
                     seed=args.seed)
    print(f"wrote {len(records)} videos under {args.out}")
    return 0


def _add_convert(sub):
    p = sub.add_parser("convert-motion", help="positions text file to BVH")
    p.add_argument("--positions", required=True,
                   help="text file: 'frame_time <s>' header, then 'frame joint x y z' rows")
    p.add_argument("--topology", required=True, help="skeleton topology name")
    p.add_argument("--out", required=True, help="output BVH path")
    p.set_defaults(func=cmd_convert)


def _prep_out(path: str) -> str:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return path


def cmd_convert(args) -> int:
    with open(args.positions, "r", encoding="utf-8") as fh:
        positions, frame_time = parse_positions(fh.read())
    topology = named_topology(args.topology)
    clip = positions_to_local_rotations(positions, topology, frame_time)
    with open(_prep_out(args.out), "w", encoding="utf-8") as fh:
        fh.write(write_bvh(clip))
    print(f"wrote {args.out} ({positions.shape[0]} frames, {positions.shape[1]} joints)")
    return 0


def _parse_band(text: str) -> tuple:
    for sep in (":", ",", ".."):
        if sep in text:
            lo, hi = text.split(sep, 1)
            return float(lo), float(hi)
    raise SystemExit(f"split: cannot parse azimuth band {text!r}; use LO:HI degrees")


def _add_split(sub):
    p = sub.add_parser("split", help="build a train/test split from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--loso", metavar="SCENE", help="leave this scene id out")
    p.add_argument("--hold-azimuth", metavar="LO:HI", help="held-out azimuth band, degrees")
    p.add_argument("--hold-texture", metavar="IDS", help="comma-separated texture pool ids")
    p.add_argument("--hold-humanoid", metavar="IDS", help="comma-separated body shape ids")
    p.add_argument("--out", help="write the split JSON here (default: stdout)")
    p.set_defaults(func=cmd_split)


def cmd_split(args) -> int:
    from .harness import build_disjoint_split, build_loso_split, save_split

    records = load_manifest(args.manifest)
    disjoint = args.hold_azimuth or args.hold_texture or args.hold_humanoid
    if bool(args.loso) == bool(disjoint):
        raise SystemExit("split: pass either --loso or at least one --hold-* option")
    if args.loso:
        split = build_loso_split(records, args.loso)
    else:
        split = build_disjoint_split(
            records,
            hold_azimuth=_parse_band(args.hold_azimuth) if args.hold_azimuth else None,
            hold_textures=set(args.hold_texture.split(","))
            if args.hold_texture else None,
            hold_humanoids=set(args.hold_humanoid.split(","))
            if args.hold_humanoid else None,
        )
    if args.out:
        save_split(_prep_out(args.out), split)
        print(f"wrote {args.out}: {len(split.train_ids)} train, "
              f"{len(split.test_ids)} test, {len(split.discarded_ids)} discarded")
    else:
        import json

        json.dump(split.to_dict(), sys.stdout, indent=2, sort_keys=True)
        print()
    return 0


def _add_train(sub):
    p = sub.add_parser("train", help="fit a classifier with one transfer strategy")
    p.add_argument("--strategy", required=True, choices=list(STRATEGIES))
    p.add_argument("--synthetic", help="synthetic-domain manifest path")
    p.add_argument("--real", help="real/pseudo-real-domain manifest path")
    p.add_argument("--split", help="split JSON; restricts the real domain to its train ids")
    p.add_argument("--out", required=True, help="output weights path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--lambda-adv", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=32)
    p.set_defaults(func=cmd_train)


def _load_domain(manifest_path: str, domain: str, classes, ids=None):
    from .harness import dataset_from_records

    records = load_manifest(manifest_path)
    root = os.path.dirname(os.path.abspath(manifest_path))
    return dataset_from_records(root, records, classes, domain, ids=ids)


def cmd_train(args) -> int:
    from .harness import figure_loss_curve, load_split, write_run_record

    needed = {"real-only": ("real",), "synthetic-only": ("synthetic",)}.get(
        args.strategy, ("synthetic", "real"))
    for key in needed:
        if not getattr(args, key):
            raise SystemExit(f"train: strategy {args.strategy} needs --{key}")

    actions = set()
    for key in needed:
        for r in load_manifest(getattr(args, key)):
            actions.add(r["action"])
    classes = sorted(actions)

    split = load_split(args.split) if args.split else None
    datasets = {}
    if "synthetic" in needed:
        datasets["synthetic"] = _load_domain(args.synthetic, "synthetic", classes)
    if "real" in needed:
        ids = split.train_ids if split else None
        datasets["real"] = _load_domain(args.real, "real", classes, ids=ids)

    cfg = TrainConfig(strategy=args.strategy, lr=args.lr, lambda_adv=args.lambda_adv,
                      batch_size=args.batch_size, epochs=args.epochs, seed=args.seed)
    model, curves = train(datasets, cfg, classes)
    save_weights(_prep_out(args.out), model)
    base = os.path.splitext(args.out)[0]
    save_curves(base + "_loss.csv", curves)
    figure_loss_curve(base + "_loss.png", curves)
    write_run_record(base + "_run.json", "train",
                     {k: v for k, v in vars(args).items() if k != "func"},
                     seed=args.seed)
    print(f"trained {args.strategy} on {sorted(datasets)} -> {args.out} "
          f"({len(curves)} steps, final L_cls {curves[-1][2]:.4f})")
    return 0


def _add_eval(sub):
    p = sub.add_parser("eval", help="score saved weights on a manifest")
    p.add_argument("--weights", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", help="split JSON; evaluates on its test ids")
    p.add_argument("--report", required=True, help="output CSV path")
    p.set_defaults(func=cmd_eval)


def cmd_eval(args) -> int:
    from .harness import (
        dataset_from_records,
        evaluate,
        figure_confusion,
        figure_f1_bars,
        load_split,
        write_confusion_csv,
        write_metrics_report,
        write_run_record,
    )

    model = load_weights(args.weights)
    records = load_manifest(args.manifest)
    root = os.path.dirname(os.path.abspath(args.manifest))
    ids = load_split(args.split).test_ids if args.split else None
    dataset = dataset_from_records(root, records, model.classes, "eval", ids=ids)
    metrics = evaluate(model, dataset)

    write_metrics_report(_prep_out(args.report), metrics)
    base = os.path.splitext(args.report)[0]
    write_confusion_csv(base + "_confusion.csv", metrics)
    figure_confusion(base + "_confusion.png", metrics)
    figure_f1_bars(base + "_f1.png", metrics)
    write_run_record(base + "_run.json", "eval",
                     {k: v for k, v in vars(args).items() if k != "func"}, seed=None)
    print(f"accuracy {metrics.accuracy:.4f} on {len(dataset)} videos -> {args.report}")
    if metrics.undefined_f1:
        print(f"note: F1 undefined (reported 0) for: {', '.join(metrics.undefined_f1)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthact",
        description="Randomized synthetic action clips: generate, split, train, evaluate.")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_convert(sub)
    _add_split(sub)
    _add_train(sub)
    _add_eval(sub)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
