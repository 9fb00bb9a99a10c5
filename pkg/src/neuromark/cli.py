"""Command line surface: train, encode, decode, eval, preview."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import bits as bitmod
from . import imageio
from .bundle import load_bundle, save_bundle
from .presets import make_config, preset_names
from .recognizer import decode as decode_scores
from .recognizer import probabilities
from .renderer import BackgroundPool, phi_preset, render, sample_nuisance
from .tensor import substream
from .trainer import evaluate, train


def _entropy_seed():
    return int.from_bytes(os.urandom(8), "little") >> 1


def _load_config(args):
    overrides = dict(
        seed=args.seed,
        iterations=getattr(args, "iters", None),
    )
    if getattr(args, "style_prototype", None):
        overrides["style_prototype"] = args.style_prototype
    if getattr(args, "backgrounds", None):
        overrides["phi_overrides"] = {"backgrounds": args.backgrounds}
    if args.config:
        with open(args.config) as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")
        preset = data.pop("preset", args.preset)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return make_config(preset, **data)
    if not args.preset:
        raise ValueError("either --preset or --config is required")
    return make_config(args.preset, **overrides)


def cmd_train(args):
    config = _load_config(args)
    config.validate()

    def progress(record):
        print(
            f"iter {record.iteration:>6d}  loss {record.loss:+.4f}  "
            f"p {record.accuracy:.4f}  C {record.capacity:.2f}  [{record.seconds:.1f}s]",
            flush=True,
        )

    model, stats = train(config, progress=progress)
    save_bundle(model, args.out)
    if args.stats:
        stats.write_csv(args.stats)
    print(f"saved {args.out}")
    print(f"final p={model.metrics['accuracy']:.4f} C={model.metrics['capacity']:.2f}")
    return 0


def cmd_encode(args):
    model = load_bundle(args.model)
    payload = bitmod.parse_bits(args.bits, model.n)
    marker = model.encode(payload)
    if args.out.endswith(".ppm"):
        imageio.save_ppm(marker, args.out)
    else:
        imageio.save_png(marker, args.out, scale=args.scale, resample=args.resample)
    print(f"wrote {args.out}")
    return 0


def cmd_decode(args):
    model = load_bundle(args.model)
    image = imageio.load_image(args.image, model.c)
    image = imageio.resize_center_crop(image, model.s)
    scores = model.recognize(image)
    decoded = decode_scores(scores)
    probs = probabilities(scores)
    text = bitmod.format_bits(decoded)
    print(f"bits: {text}")
    if model.n % 4 == 0:
        print(f"hex:  {bitmod.bits_to_hex(decoded)}")
    print("p(+1): " + " ".join(f"{p:.3f}" for p in probs))
    correct = None
    if args.true_bits:
        truth = bitmod.parse_bits(args.true_bits, model.n)
        correct = int((decoded == truth).sum())
        print(f"{correct}/{model.n} correct")
    if args.json:
        report = {
            "bits": text,
            "scores": [float(v) for v in scores],
            "probabilities": [float(v) for v in probs],
        }
        if correct is not None:
            report["correct"] = correct
        with open(args.json, "w") as f:
            json.dump(report, f, indent=2)
            f.write("\n")
    return 0


def cmd_eval(args):
    model = load_bundle(args.model)
    phi = model.phi if args.phi is None else phi_preset(args.phi)
    phi.canvas = model.s
    pool = None
    if phi.backgrounds:
        pool = BackgroundPool.from_dir(phi.backgrounds, model.c, model.s)
    seed = args.seed if args.seed is not None else _entropy_seed()
    rng = substream(seed, "cli-eval")
    p, cap, loss = evaluate(model, phi, args.samples, rng, pool=pool)
    print(f"p={p:.6f} C={cap:.4f} loss={loss:+.4f} (N={args.samples}, seed={seed})")
    row = f"{args.samples},{seed},{p!r},{cap!r},{loss!r}"
    if args.csv:
        fresh = not os.path.exists(args.csv)
        with open(args.csv, "a") as f:
            if fresh:
                f.write("samples,seed,accuracy,capacity,loss\n")
            f.write(row + "\n")
    else:
        print("samples,seed,accuracy,capacity,loss")
        print(row)
    return 0


def cmd_preview(args):
    seed = args.seed if args.seed is not None else _entropy_seed()
    source = None
    try:
        model = load_bundle(args.source)
    except ValueError:
        model = None
    if model is not None:
        if args.bits:
            payload = bitmod.parse_bits(args.bits, model.n)
        else:
            payload = bitmod.random_bits(substream(seed, "preview-bits"), 1, model.n)[0]
        source = model.encode(payload)
        channels, size = model.c, model.s
        phi = model.phi if args.phi is None else phi_preset(args.phi)
    else:
        source = imageio.load_image(args.source, 3)
        channels, size = source.shape[0], source.shape[1]
        phi = phi_preset(args.phi or "default")
    phi.canvas = size
    pool = None
    if phi.backgrounds:
        pool = BackgroundPool.from_dir(phi.backgrounds, channels, size)
    rng = substream(seed, "preview-phi")
    tiles = []
    for _ in range(args.count):
        params = sample_nuisance(phi, rng, channels=channels, pool=pool, canvas=size)
        img, _ = render(source, params, pool=pool, canvas=size)
        tiles.append(img)
    sheet = _contact_sheet(tiles)
    imageio.save_png(sheet, args.out)
    print(f"wrote {args.out} ({args.count} renders, seed={seed})")
    return 0


def _contact_sheet(tiles, pad=2):
    count = len(tiles)
    cols = math.ceil(math.sqrt(count))
    rows = math.ceil(count / cols)
    c, h, w = tiles[0].shape
    sheet = np.ones((c, rows * (h + pad) + pad, cols * (w + pad) + pad), tiles[0].dtype)
    for i, tile in enumerate(tiles):
        r, q = divmod(i, cols)
        top = pad + r * (h + pad)
        left = pad + q * (w + pad)
        sheet[:, top:top + h, left:left + w] = tile
    return sheet


def build_parser():
    parser = argparse.ArgumentParser(
        prog="neuromark",
        description="Train marker families, encode payloads into marker images, "
        "and decode them back from distorted photos.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a marker family")
    p.add_argument("--preset", choices=preset_names(), help="named configuration")
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--out", default="model.nmk", help="output bundle path")
    p.add_argument("--stats", help="write per-evaluation stats CSV here")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--iters", type=int, help="iteration budget override")
    p.add_argument("--backgrounds", help="directory of background images")
    p.add_argument("--style-prototype", help="texture image for stylized training")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="render a payload as a marker image")
    p.add_argument("model", help="trained bundle file")
    p.add_argument("bits", help="payload as 0/1 text or hex (MSB first)")
    p.add_argument("--out", default="marker.png", help="output image (.png or .ppm)")
    p.add_argument("--scale", type=int, default=1, help="integer upscale for print/display")
    p.add_argument("--resample", choices=("nearest", "bilinear"), default="bilinear")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="recover a payload from a marker photo")
    p.add_argument("model", help="trained bundle file")
    p.add_argument("image", help="PNG/JPEG containing the marker (roughly aligned)")
    p.add_argument("--true-bits", help="known payload; prints a correct/total line")
    p.add_argument("--json", help="also write a machine-readable report here")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="Monte-Carlo accuracy/capacity of a bundle")
    p.add_argument("model", help="trained bundle file")
    p.add_argument("--phi", choices=("default", "low-affine", "high-blur", "grayscale", "identity"),
                   help="override the distortion preset")
    p.add_argument("--samples", "-N", type=int, default=2048)
    p.add_argument("--seed", type=int)
    p.add_argument("--csv", help="append the result row to this CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("preview", help="contact sheet of rendered distortions")
    p.add_argument("source", help="bundle file or marker image")
    p.add_argument("--phi", help="distortion preset (default: model's own)")
    p.add_argument("--bits", help="payload to preview (default: random)")
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="preview.png")
    p.set_defaults(func=cmd_preview)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
