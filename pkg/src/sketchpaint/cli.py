"""Command-line entry points; thin wrappers over the library functions."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dataset import build_pairs, list_source_images, split, square_crop_resize
from .hints import BlockGrowthParams, parse_scribbles, synthesize_hints
from .image import load_png, replicate_rgb, save_png
from .painter import Painter, bench
from .sketch import XdogParams, extract_sketch_set
from .votes import ingest_votes, read_vote_records, summarize


def _parse_gammas(text: str) -> list[float]:
    return [float(g) for g in text.split(",") if g.strip()]


def cmd_extract_sketch(args) -> int:
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    gammas = _parse_gammas(args.gamma)
    base = XdogParams(sigma=args.sigma, k=args.k, epsilon=args.eps, phi=args.phi)
    n = 0
    for src in list_source_images(args.input):
        image = load_png(src)
        for gamma, sk in zip(gammas, extract_sketch_set(image, gammas, base)):
            save_png(sk, out_dir / f"{src.stem}_g{gamma:g}.png")
            n += 1
    print(f"wrote {n} sketch(es) to {out_dir}")
    return 0


def cmd_make_hints(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = BlockGrowthParams(
        blur_sigma=args.blur_sigma,
        min_blocks=args.min_blocks,
        max_blocks=args.max_blocks,
        block_side=args.block_side,
        step=args.step,
        threshold=args.threshold,
        max_steps=args.max_steps,
    )
    targets = {p.stem: p for p in list_source_images(args.targets)}
    n = 0
    for sk_path in sorted(Path(args.sketches).glob("*.png")):
        stem = sk_path.stem.rsplit("_g", 1)[0]
        if stem not in targets:
            print(f"no target for sketch {sk_path.name}, skipping", file=sys.stderr)
            continue
        sketch = load_png(sk_path)
        target = replicate_rgb(load_png(targets[stem]))
        if target.shape[:2] != sketch.shape[:2]:
            target = square_crop_resize(target, sketch.shape[0])
        hint, _ = synthesize_hints(
            target, sketch, params, seed=args.seed + n
        )
        save_png(hint, out_dir / f"{sk_path.stem}_hint.png")
        n += 1
    print(f"wrote {n} hint image(s) to {out_dir}")
    return 0


def cmd_build_dataset(args) -> int:
    out_dir = Path(args.out)
    manifest = build_pairs(
        args.images,
        out_dir,
        gammas=_parse_gammas(args.gammas),
        seed=args.seed,
        size=args.size,
        with_hints=not args.no_hints,
    )
    train, test = split(manifest, train_fraction=args.train_frac, seed=args.seed)
    train.save(out_dir / "train.manifest.jsonl")
    test.save(out_dir / "test.manifest.jsonl")
    print(
        f"{len(manifest.entries)} pairs from {len({e.source for e in manifest.entries})} "
        f"sources -> {len(train.entries)} train / {len(test.entries)} test"
    )
    return 0


def cmd_train(args) -> int:
    from .training import TrainConfig, calibrate, train

    config = TrainConfig.from_file(args.config)
    if args.calibrate:
        report = calibrate(config)
        print(json.dumps(report, indent=2))
        return 0
    final, metrics = train(config, resume_from=args.resume)
    last = metrics[-1] if metrics else None
    print(f"final checkpoint: {final}")
    if last:
        print(last.to_log_line())
    return 0


def cmd_evaluate_votes(args) -> int:
    result = ingest_votes(read_vote_records(args.records))
    if result.rejected:
        print(f"rejected {result.rejected} record(s) with best == worst", file=sys.stderr)
    report = summarize(result.tallies, c=args.c, sample_variance=args.sample_variance)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(report.to_table())
    return 0


def cmd_paint(args) -> int:
    painter = Painter(args.checkpoint)
    if args.bench:
        report = bench(painter, runs=args.bench_runs)
        status = "within" if report["within_target"] else "over"
        print(json.dumps(report, indent=2))
        print(f"median latency {report['p50_s']:.3f}s is {status} the {report['target_s']:.1f}s target")
        return 0
    sketch = load_png(args.sketch)
    scribbles = None
    if args.scribbles:
        scribbles = parse_scribbles(Path(args.scribbles).read_text(encoding="utf-8"))
    painted, box = painter.paint(sketch, scribbles, noise_seed=args.seed)
    save_png(painted, args.out)
    print(f"painted {args.sketch} -> {args.out} (crop box {box.to_dict()})")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.checkpoint, workers=args.workers, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_export_backbone(args) -> int:
    from .losses import export_pretrained_backbone

    path = export_pretrained_backbone(args.out)
    print(f"wrote feature extractor weights to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketchpaint",
        description="Sketch-to-cartoon painting toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-sketch", help="XDoG line sketches from color images")
    p.add_argument("--input", required=True, help="directory of source images")
    p.add_argument("--output", required=True, help="output directory for sketches")
    p.add_argument("--gamma", default="0.96,0.97,0.98,0.99", help="comma-separated gamma values")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--k", type=float, default=1.6)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--phi", type=float, default=200.0)
    p.set_defaults(func=cmd_extract_sketch)

    p = sub.add_parser("make-hints", help="synthesize color-hint images for sketches")
    p.add_argument("--targets", required=True, help="directory of color targets")
    p.add_argument("--sketches", required=True, help="directory of extracted sketches")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blur-sigma", type=float, default=8.0)
    p.add_argument("--min-blocks", type=int, default=2)
    p.add_argument("--max-blocks", type=int, default=8)
    p.add_argument("--block-side", type=int, default=12)
    p.add_argument("--step", type=int, default=12)
    p.add_argument("--threshold", type=float, default=0.12)
    p.add_argument("--max-steps", type=int, default=6)
    p.set_defaults(func=cmd_make_hints)

    p = sub.add_parser("build-dataset", help="full paired-dataset build with split manifests")
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--gammas", default="0.96,0.97,0.98,0.99")
    p.add_argument("--train-frac", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-hints", action="store_true", help="inputs are plain sketches")
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train", help="adversarial training from a config file")
    p.add_argument("--config", required=True, help="JSON config (keys mirror TrainConfig)")
    p.add_argument("--resume", default=None, help="checkpoint manifest to resume from")
    p.add_argument("--calibrate", action="store_true",
                   help="report per-term loss magnitudes on one batch and exit")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate-votes", help="popularity report from vote records")
    p.add_argument("--records", required=True, help="line-delimited JSON vote records")
    p.add_argument("--c", type=float, default=1.0, help="smoothing constant")
    p.add_argument("--sample-variance", action="store_true")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_evaluate_votes)

    p = sub.add_parser("paint", help="paint one sketch with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sketch", help="sketch image to paint")
    p.add_argument("--scribbles", default=None, help="scribble JSON file")
    p.add_argument("--seed", type=int, default=None, help="noise seed (zeros if omitted)")
    p.add_argument("--out", help="output PNG path")
    p.add_argument("--bench", action="store_true", help="report latency instead of painting")
    p.add_argument("--bench-runs", type=int, default=10)
    p.set_defaults(func=cmd_paint)

    p = sub.add_parser("serve", help="run the HTTP painting service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--workers", type=int, default=4, help="max concurrent inferences")
    p.add_argument("--ui", default=None, help="static directory to serve at / (painting UI)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export-backbone", help="convert pretrained feature-extractor weights")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_backbone)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "paint" and not args.bench:
        if not args.sketch or not args.out:
            build_parser().error("paint requires --sketch and --out (or --bench)")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
