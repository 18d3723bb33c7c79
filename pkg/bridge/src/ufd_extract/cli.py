"""ufd-extract: embed an image folder into a .ufdb feature bank.

Exit codes: 0 success, 1 usage error, 2 data error (weights missing,
nothing decodable, bad paths), 3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import traceback
from pathlib import Path

from .augment import AugmentPolicy
from .encoders import ENCODERS, ExtractionSpec, list_encoders
from .errors import ExtractError
from .extract import extract

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".webp", ".tif", ".tiff")


class UsageError(Exception):
    pass


def _range(text: str, cast):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
    return cast(parts[0]), cast(parts[1])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ufd-extract",
        description="Embed an image folder with a pretrained encoder and write a .ufdb bank.",
    )
    p.add_argument("images", nargs="?", help="directory of images")
    p.add_argument("--list-encoders", action="store_true", help="print the encoder table and exit")
    p.add_argument("--encoder", choices=sorted(ENCODERS), help="encoder id")
    p.add_argument("--layer", default="", help="layer id (default: encoder's default layer)")
    p.add_argument("--label", choices=("real", "fake"), help="label for every image")
    p.add_argument("--class-id", type=int, default=-1)
    p.add_argument("--source-tag", default="")
    p.add_argument("--out", help="output bank path")
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--device", default="cpu")
    p.add_argument("--weights", help="local weights (model dir or state-dict file)")
    p.add_argument("--augment-prob", type=float, default=0.0,
                   help="pre-encoding blur/jpeg probability (0 disables)")
    p.add_argument("--sigma-range", type=lambda s: _range(s, float), default=(0.0, 3.0),
                   metavar="LO,HI")
    p.add_argument("--jpeg-range", type=lambda s: _range(s, int), default=(30, 100),
                   metavar="LO,HI")
    p.add_argument("--seed", type=int, default=0, help="augmentation seed")
    return p


def _print_encoders() -> None:
    rows = [("encoder", "layers", "default", "dims")]
    for info in list_encoders():
        dims = " ".join(f"{layer}:{info.dims[layer]}" for layer in info.layers)
        rows.append((info.encoder_id, ",".join(info.layers), info.default_layer, dims))
    widths = [max(len(r[c]) for r in rows) for c in range(4)]
    for r in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())


def _run(args) -> None:
    if args.list_encoders:
        _print_encoders()
        return
    missing = [flag for flag, val in
               (("--encoder", args.encoder), ("--label", args.label), ("--out", args.out))
               if not val]
    if missing or not args.images:
        raise UsageError(
            "need an image directory plus " + ", ".join(missing or ["nothing else"])
        )
    root = Path(args.images)
    if not root.is_dir():
        raise FileNotFoundError(f"not a directory: {root}")
    paths = sorted(
        p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file()
    )
    if not paths:
        raise FileNotFoundError(f"no images ({'/'.join(IMAGE_SUFFIXES)}) in {root}")

    policy = None
    if args.augment_prob > 0:
        policy = AugmentPolicy(
            probability=args.augment_prob,
            sigma_range=args.sigma_range,
            jpeg_quality_range=args.jpeg_range,
            seed=args.seed,
        )
    spec = ExtractionSpec(
        encoder_id=args.encoder,
        layer_id=args.layer,
        batch_size=args.batch_size,
        augment=policy,
        device=args.device,
    )
    report = extract(
        paths,
        spec,
        args.out,
        labels=args.label,
        class_ids=args.class_id,
        source_tag=args.source_tag,
        weights_path=args.weights,
    )
    note = f" ({len(report.skipped)} skipped)" if report.skipped else ""
    print(f"wrote {report.out_path}: {report.entries} entries, dim {report.dim}{note}")


def main(argv=None) -> int:
    logging.basicConfig(
        level=getattr(logging, os.environ.get("UFD_LOG", "warning").upper(), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        _run(args)
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ExtractError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
