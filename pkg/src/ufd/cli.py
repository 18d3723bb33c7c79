"""Command-line front end.

Thin wrappers over the library; no detection logic lives here. Exit codes:
0 success, 1 usage error, 2 data error (bad files, bad banks, bad values),
3 internal error. Set UFD_LOG=debug|info|warning|error to adjust logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shlex
import subprocess
import sys
import tempfile
import traceback
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import augment, harness, knn, metrics, probe, report, spectrum
from .bank import build_bank, load_bank, merge_banks, save_bank, subsample_bank
from .errors import UfdError
from .labels import Label, as_label

log = logging.getLogger("ufd")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; the contract here is exit 1
    def error(self, message):
        raise UsageError(message)


def _read_config(path: str) -> dict:
    """Flat key = value file; # starts a comment; values parse as
    int/float/bool when they look like one."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{ln}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if not key.isidentifier():
                raise UsageError(f"{path}:{ln}: bad key {key!r}")
            if len(val) >= 2 and val[0] == val[-1] and val[0] in "\"'":
                out[key] = val[1:-1]
                continue
            low = val.lower()
            if low in ("true", "false"):
                out[key] = low == "true"
                continue
            try:
                out[key] = int(val)
                continue
            except ValueError:
                pass
            try:
                out[key] = float(val)
                continue
            except ValueError:
                pass
            out[key] = val
    return out


def _load_npy(path, what: str) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise UfdError(f"{what} file does not exist: {p}")
    return np.load(p, allow_pickle=False)


def _out_path(args, name: str) -> Path:
    base = Path(args.out_dir)
    base.mkdir(parents=True, exist_ok=True)
    return base / name


def _meta_pairs(items) -> dict:
    meta = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--meta wants key=value, got {item!r}")
        k, v = item.split("=", 1)
        meta[k.strip()] = v.strip()
    return meta


# ---------------------------------------------------------------- bank

def cmd_bank_build(args) -> int:
    vectors = _load_npy(args.vectors, "vectors")
    if vectors.ndim != 2:
        raise UfdError(f"vectors must be 2-D, got shape {vectors.shape}")
    n, dim = vectors.shape
    if args.labels:
        labels = _load_npy(args.labels, "labels").reshape(-1)
        if labels.shape[0] != n:
            raise UfdError(f"{labels.shape[0]} labels for {n} vectors")
        labels = [as_label(int(v)) for v in labels]
    elif args.label:
        labels = [as_label(args.label)] * n
    else:
        raise UsageError("need --labels or --label")
    if args.class_ids:
        class_ids = _load_npy(args.class_ids, "class ids").reshape(-1).astype(np.int64)
        if class_ids.shape[0] != n:
            raise UfdError(f"{class_ids.shape[0]} class ids for {n} vectors")
    else:
        class_ids = np.full(n, -1, dtype=np.int64)
    if args.refs:
        refs = Path(args.refs).read_text(encoding="utf-8").splitlines()
        if len(refs) != n:
            raise UfdError(f"{len(refs)} refs for {n} vectors")
    else:
        refs = [""] * n
    meta = _meta_pairs(args.meta)
    meta["encoder_id"] = args.encoder_id
    meta["layer_id"] = args.layer_id
    records = (
        (vectors[i], labels[i], int(class_ids[i]), args.source_tag, refs[i])
        for i in range(n)
    )
    bank = build_bank(records, dim, meta)
    save_bank(bank, args.out)
    print(f"wrote {args.out}: {len(bank)} entries, dim {bank.dim}")
    return 0


def cmd_bank_merge(args) -> int:
    banks = [load_bank(p) for p in args.inputs]
    merged = merge_banks(banks)
    save_bank(merged, args.out)
    print(f"wrote {args.out}: {len(merged)} entries from {len(banks)} banks")
    return 0


def cmd_bank_subsample(args) -> int:
    bank = load_bank(args.bank)
    if (args.target_total is None) == (args.class_count is None):
        raise UsageError("pick exactly one of --target-total / --class-count")
    if args.target_total is not None:
        out = subsample_bank(bank, mode="uniform", target_total=args.target_total, seed=args.seed)
    else:
        out = subsample_bank(bank, mode="by_class_count", class_count=args.class_count, seed=args.seed)
    save_bank(out, args.out)
    print(f"wrote {args.out}: {len(out)} of {len(bank)} entries")
    return 0


def cmd_bank_inspect(args) -> int:
    bank = load_bank(args.bank)
    print(json.dumps(bank.summary(), indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------- classify

def _method_from_args(args):
    if args.method == "knn":
        if not args.bank:
            raise UsageError("knn needs --bank")
        return harness.KnnMethod(load_bank(args.bank), args.k)
    if not args.model:
        raise UsageError("linear needs --model")
    return harness.LinearMethod(probe.load_model(args.model))


def cmd_classify(args) -> int:
    method = _method_from_args(args)
    queries = load_bank(args.queries)
    scores = method.score_vectors(queries.vectors)
    threshold = args.threshold if args.threshold is not None else method.natural_threshold
    rows = [
        (float(s), Label(int(queries.labels[i])), queries.image_refs[i])
        for i, s in enumerate(scores)
    ]
    harness.write_scores(args.out, rows)
    n_fake = int(np.count_nonzero(scores > threshold))
    print(f"wrote {args.out}: {len(rows)} scores, {n_fake} over threshold {threshold:g}")
    return 0


# ---------------------------------------------------------------- train

def cmd_train(args) -> int:
    bank = load_bank(args.bank)
    config = probe.TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        early_stop_patience=args.patience,
        val_fraction=args.val_fraction,
        seed=args.seed,
    )
    model, train_report = probe.train_linear(bank, config)
    probe.save_model(model, args.out)
    summary = {
        "epochs_run": train_report.epochs_run,
        "best_epoch": train_report.best_epoch,
        "best_val_accuracy": train_report.best_val_accuracy,
        "final_train_loss": train_report.train_loss[-1],
    }
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(
                {**summary,
                 "train_loss": list(train_report.train_loss),
                 "val_accuracy": list(train_report.val_accuracy)},
                fh, indent=2)
            fh.write("\n")
    print(json.dumps(summary))
    return 0


# ---------------------------------------------------------------- calibrate

def cmd_calibrate(args) -> int:
    rows = harness.read_scores(args.scores)
    pairs = harness.labeled_pairs(rows)
    threshold, bal = metrics.calibrate_threshold(pairs)
    doc = {"threshold": threshold, "balanced_accuracy": bal, "samples": len(pairs)}
    print(json.dumps(doc))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
            fh.write("\n")
    return 0


# ---------------------------------------------------------------- eval

def _resolve_val_pairs(args, method=None):
    if args.val_scores:
        return harness.labeled_pairs(harness.read_scores(args.val_scores))
    if getattr(args, "val_bank", None):
        if method is None:
            raise UsageError("--val-bank needs a method (use --val-scores here)")
        vbank = load_bank(args.val_bank)
        scores = method.score_vectors(vbank.vectors)
        return [
            metrics.LabeledScore(float(s), Label(int(vbank.labels[i])))
            for i, s in enumerate(scores)
        ]
    return None


def _timestamp(args) -> str:
    if args.timestamp == "now":
        return datetime.now(timezone.utc).isoformat()
    return args.timestamp


def cmd_eval(args) -> int:
    if (args.suite is None) == (args.scores is None):
        raise UsageError("pick exactly one of --suite / --scores")
    if args.scores:
        pairs = harness.labeled_pairs(harness.read_scores(args.scores))
        thr, source = harness.resolve_threshold(
            args.calibration, threshold=args.threshold, val_pairs=_resolve_val_pairs(args)
        )
        if thr is None:
            rep = metrics.oracle_evaluate(pairs, ap_convention=args.ap_convention)
        else:
            rep = metrics.evaluate_at(pairs, thr, source, ap_convention=args.ap_convention)
        text = json.dumps(rep.to_dict(), indent=2) + "\n"
        out = _out_path(args, "report.json")
        out.write_text(text, encoding="utf-8")
        print(f"ap {rep.ap:.4f} accuracy {rep.accuracy:.4f} (report: {out})")
        return 0

    manifests = harness.load_suite(args.suite)
    method = _method_from_args(args)
    result = harness.evaluate_suite(
        manifests,
        method,
        calibration=args.calibration,
        threshold=args.threshold,
        val_pairs=_resolve_val_pairs(args, method),
        ap_convention=args.ap_convention,
        timestamp=_timestamp(args),
    )
    _out_path(args, "suite_result.json").write_text(result.to_json(), encoding="utf-8")
    runs = [(args.row_label, result)]
    for metric in ("ap", "accuracy"):
        _out_path(args, f"table_{metric}.csv").write_text(report.render_csv(runs, metric), encoding="utf-8")
        _out_path(args, f"table_{metric}.txt").write_text(report.render_text(runs, metric), encoding="utf-8")
    _out_path(args, "breakdown.csv").write_text(report.render_breakdown_csv(result), encoding="utf-8")
    _out_path(args, "families.csv").write_text(report.render_families_csv(result), encoding="utf-8")
    scores_dir = _out_path(args, "scores")
    scores_dir.mkdir(exist_ok=True)
    for m in manifests:
        pairs = harness.score_test_set(method, m)
        harness.write_scores(scores_dir / f"{m.name}.jsonl", pairs)
    print(f"mAP {result.map_total:.4f} avg_acc {result.avg_acc_total:.4f} over {len(manifests)} sets")
    print(f"outputs in {args.out_dir}")
    return 0


# ---------------------------------------------------------------- rank

def cmd_rank(args) -> int:
    queries = load_bank(args.queries)
    bank = load_bank(args.bank)
    top = args.top if args.top else len(queries)
    ranked = knn.rank_by_distance(
        queries.vectors,
        as_label(args.side),
        bank,
        direction=args.direction,
        top_m=min(top, len(queries)),
    )
    rows = [
        {"query_index": i, "distance": d, "image_ref": queries.image_refs[i]}
        for i, d in ranked
    ]
    print(json.dumps(rows, indent=2))
    return 0


# ---------------------------------------------------------------- spectrum

def _iter_images(paths):
    for p in paths:
        yield augment.load_image(p)


def cmd_spectrum(args) -> int:
    root = Path(args.images)
    if not root.is_dir():
        raise UfdError(f"not a directory: {root}")
    paths = sorted(p for p in root.rglob(args.pattern) if p.is_file())
    if args.limit:
        paths = paths[: args.limit]
    kernel = None if args.median_kernel == 0 else args.median_kernel
    spec = spectrum.average_spectrum(
        _iter_images(paths),
        median_kernel=kernel,
        size=args.size,
        log_scale=args.log,
    )
    spectrum.save_spectrum_png(spec, _out_path(args, "spectrum.png"))
    spectrum.save_grid(spec, _out_path(args, "spectrum_grid.npy"))
    with open(_out_path(args, "spectrum_params.json"), "w", encoding="utf-8") as fh:
        json.dump(spec.params(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"averaged {spec.n_images} images -> {args.out_dir}")
    return 0


# ---------------------------------------------------------------- robustness

def _parse_grid(text: str, cast):
    return tuple(cast(tok) for tok in text.split(",") if tok.strip() != "")


def _run_extract(template: str, in_dir: Path, out_bank: Path, label: str) -> None:
    cmd = [
        part.format(in_dir=str(in_dir), out_bank=str(out_bank), label=label)
        for part in shlex.split(template)
    ]
    log.info("extract: %s", " ".join(cmd))
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise UfdError(
            f"extractor failed ({proc.returncode}): {' '.join(cmd)}\n{proc.stderr.strip()}"
        )


def cmd_robustness(args) -> int:
    real_dir = Path(args.real_dir)
    if not real_dir.is_dir():
        raise UfdError(f"not a directory: {real_dir}")
    groups: list[tuple[str, Path]] = []
    for item in args.fake_dir:
        if "=" not in item:
            raise UsageError(f"--fake-dir wants name=dir, got {item!r}")
        name, d = item.split("=", 1)
        if not Path(d).is_dir():
            raise UfdError(f"not a directory: {d}")
        groups.append((name, Path(d)))
    if not groups:
        raise UsageError("need at least one --fake-dir")
    method = _method_from_args(args)
    blur_grid = _parse_grid(args.blur_grid, float)
    jpeg_grid = _parse_grid(args.jpeg_grid, int)

    def list_images(d: Path):
        return sorted(p for p in d.rglob(args.pattern) if p.is_file())

    def scores_fn(axis, level, perturb):
        with tempfile.TemporaryDirectory(prefix="ufd-rob-") as tmp:
            tmp = Path(tmp)
            side_scores = {}
            for side_name, d, label in (
                [("real", real_dir, "real")] + [(f"fake-{n}", d, "fake") for n, d in groups]
            ):
                img_dir = tmp / side_name
                img_dir.mkdir()
                for i, p in enumerate(list_images(d)):
                    out = img_dir / f"{i:06d}.png"
                    augment.save_image(perturb(augment.load_image(p)), out)
                bank_path = tmp / f"{side_name}.ufdb"
                _run_extract(args.extract_cmd, img_dir, bank_path, label)
                side_scores[side_name] = method.score_vectors(load_bank(bank_path).vectors)
            out = {}
            for n, _ in groups:
                pairs = [(float(s), Label.REAL) for s in side_scores["real"]]
                pairs += [(float(s), Label.FAKE) for s in side_scores[f"fake-{n}"]]
                out[n] = pairs
            return out

    rows = augment.robustness_sweep(scores_fn, blur_grid, jpeg_grid)
    csv_text = augment.sweep_rows_csv(rows)
    out = _out_path(args, "robustness.csv")
    out.write_text(csv_text, encoding="utf-8")
    print(f"wrote {out}: {len(rows)} rows")
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> _Parser:
    parser = _Parser(prog="ufd", description=__doc__)
    parser.add_argument("--seed", type=int, default=0, help="rng seed for seeded commands")
    parser.add_argument("--config", help="flat key = value defaults file")
    parser.add_argument("--out-dir", default=".", help="directory for command outputs")
    parser.add_argument("--timestamp", default="",
                        help="provenance timestamp ('now' for wall clock; default empty)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_bank = sub.add_parser("bank", help="build / merge / subsample / inspect banks")
    bank_sub = p_bank.add_subparsers(dest="bank_command", required=True)

    b = bank_sub.add_parser("build", help="assemble a bank from .npy arrays")
    b.add_argument("--vectors", required=True, help="(N, D) float .npy")
    b.add_argument("--labels", help="(N,) 0/1 .npy")
    b.add_argument("--label", choices=["real", "fake"], help="same label for every entry")
    b.add_argument("--class-ids", help="(N,) int .npy")
    b.add_argument("--refs", help="text file, one image ref per line")
    b.add_argument("--source-tag", default="")
    b.add_argument("--encoder-id", default="unknown")
    b.add_argument("--layer-id", default="unknown")
    b.add_argument("--meta", action="append", metavar="KEY=VALUE")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bank_build)

    b = bank_sub.add_parser("merge", help="concatenate banks")
    b.add_argument("inputs", nargs="+")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bank_merge)

    b = bank_sub.add_parser("subsample", help="seeded stratified or by-class subsample")
    b.add_argument("--bank", required=True)
    b.add_argument("--target-total", type=int)
    b.add_argument("--class-count", "--classes", dest="class_count", type=int)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bank_subsample)

    b = bank_sub.add_parser("inspect", help="print bank summary as JSON")
    b.add_argument("bank")
    b.set_defaults(func=cmd_bank_inspect)

    p = sub.add_parser("classify", help="score a query bank")
    p.add_argument("method", choices=["knn", "linear"])
    p.add_argument("--queries", required=True)
    p.add_argument("--bank", help="train bank (knn)")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--model", help="linear model JSON")
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", required=True, help="scores JSONL")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("train", help="train the linear probe on a bank")
    p.add_argument("--bank", required=True)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--report", help="optional training report JSON")
    p.add_argument("--out", required=True, help="model JSON")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", help="best balanced-accuracy threshold for a scores file")
    p.add_argument("--scores", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("eval", help="evaluate a suite manifest or a scores file")
    p.add_argument("--suite")
    p.add_argument("--scores")
    p.add_argument("--method", choices=["knn", "linear"], default="knn")
    p.add_argument("--bank")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--model")
    p.add_argument("--calibration", choices=["oracle", "validation", "fixed"], default="oracle")
    p.add_argument("--threshold", type=float)
    p.add_argument("--val-scores", help="scores JSONL for validation calibration")
    p.add_argument("--val-bank", help="held-out bank scored by the method for validation calibration")
    p.add_argument("--ap-convention", choices=["step", "11point"], default="step")
    p.add_argument("--row-label", default="run")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rank", help="rank queries by nearest-neighbor distance to a bank side")
    p.add_argument("--queries", required=True, help="bank holding the query vectors")
    p.add_argument("--bank", required=True, help="reference bank")
    p.add_argument("--side", choices=["real", "fake"], default="fake")
    p.add_argument("--direction", choices=["closest", "farthest"], default="closest")
    p.add_argument("--top", type=int, default=10, help="0 ranks every query")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("spectrum", help="average high-pass spectrum of an image directory")
    p.add_argument("images")
    p.add_argument("--median-kernel", type=int, default=spectrum.DEFAULT_MEDIAN_KERNEL,
                   help="odd kernel size; 0 disables the high-pass")
    p.add_argument("--size", type=int, default=spectrum.DEFAULT_SIZE)
    p.add_argument("--log", action="store_true", help="log(1+m) scale")
    p.add_argument("--limit", type=int, default=spectrum.DEFAULT_CORPUS_CAP)
    p.add_argument("--pattern", default="*.png")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("robustness", help="AP under blur / jpeg perturbation sweeps")
    p.add_argument("--real-dir", required=True)
    p.add_argument("--fake-dir", action="append", default=[], metavar="NAME=DIR")
    p.add_argument("--extract-cmd", required=True,
                   help="command template with {in_dir} {out_bank} {label} placeholders")
    p.add_argument("--method", choices=["knn", "linear"], default="knn")
    p.add_argument("--bank")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--model")
    p.add_argument("--blur-grid", default=",".join(str(v) for v in augment.DEFAULT_BLUR_GRID))
    p.add_argument("--jpeg-grid", default=",".join(str(v) for v in augment.DEFAULT_JPEG_GRID))
    p.add_argument("--pattern", default="*.png")
    p.set_defaults(func=cmd_robustness)

    return parser


def _apply_config(parser: argparse.ArgumentParser, overrides: dict) -> None:
    """Push config values down as defaults, recursing into subparsers:
    subcommands parse into a fresh namespace, so top-level set_defaults
    alone would be overwritten by the subparser's own action defaults.
    A config-supplied value also satisfies a required flag."""
    parser.set_defaults(**overrides)
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sub in action.choices.values():
                _apply_config(sub, overrides)
        elif action.option_strings and action.required and action.dest in overrides:
            action.required = False


def _configure_logging() -> None:
    level = os.environ.get("UFD_LOG", "warning").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        if argv is None:
            argv = sys.argv[1:]
        # --config supplies defaults; explicit flags still win
        pre = _Parser(add_help=False)
        pre.add_argument("--config")
        cfg_ns, _ = pre.parse_known_args(argv)
        if cfg_ns.config:
            _apply_config(parser, _read_config(cfg_ns.config))
        args = parser.parse_args(argv)
        return int(args.func(args) or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except UfdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 3
    except Exception as exc:  # anything else is a bug, not bad data
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
