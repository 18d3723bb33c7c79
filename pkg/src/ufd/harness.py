"""Suite evaluation: manifests of test sets, one EvalReport per set, rollups.

A manifest names a test set, assigns it a generator family, and points at two
bank files (real side, fake side). Truth comes from the side a bank sits on,
not from per-entry labels inside the file; a disagreement only logs a warning.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import knn as knn_mod
from . import metrics
from .bank import FeatureBank, load_bank
from .errors import CalibrationSourceMissing, EmptyInput, ManifestUnresolvable
from .labels import Label, as_label
from .probe import LinearModel, predict_linear

log = logging.getLogger("ufd")

FAMILIES = (
    "gan",
    "deepfake",
    "low_level_vision",
    "perceptual_loss",
    "diffusion",
    "autoregressive",
)


@dataclass(frozen=True)
class TestSetManifest:
    __test__ = False  # "Test" prefix is domain language, not a pytest class

    name: str
    family: str
    real_bank_path: str
    fake_bank_path: str
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not self.name:
            raise ValueError("test set needs a name")


def load_suite(path) -> list[TestSetManifest]:
    """Read a suite JSON: {"sets": [{name, family, real_bank, fake_bank, notes?}]}.

    Bank paths are resolved relative to the manifest file. Names must be
    unique. Existence of the bank files is checked at evaluation time.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    sets = doc.get("sets")
    if not isinstance(sets, list) or not sets:
        raise ValueError(f"{path}: manifest has no test sets")
    base = path.parent
    out: list[TestSetManifest] = []
    seen = set()
    for item in sets:
        m = TestSetManifest(
            name=str(item["name"]),
            family=str(item["family"]),
            real_bank_path=str(base / item["real_bank"]),
            fake_bank_path=str(base / item["fake_bank"]),
            notes=dict(item.get("notes", {})),
        )
        if m.name in seen:
            raise ValueError(f"duplicate test set name {m.name!r}")
        seen.add(m.name)
        out.append(m)
    return out


class KnnMethod:
    """Nearest-neighbor scoring against a fixed train bank."""

    natural_threshold = 0.0

    def __init__(self, train_bank: FeatureBank, k: int = 1):
        self.bank = train_bank
        self.k = int(k)

    def score_vectors(self, vectors: np.ndarray) -> np.ndarray:
        preds = knn_mod.knn_batch(vectors, self.bank, self.k)
        return np.asarray([p.score_fake for p in preds], dtype=np.float64)

    def describe(self) -> dict:
        return {
            "method": "knn",
            "k": self.k,
            "bank_entries": len(self.bank),
            "encoder_id": self.bank.encoder_id,
            "layer_id": self.bank.layer_id,
        }


class LinearMethod:
    """Sigmoid scores from a trained linear probe."""

    natural_threshold = 0.5

    def __init__(self, model: LinearModel):
        self.model = model

    def score_vectors(self, vectors: np.ndarray) -> np.ndarray:
        scores, _ = predict_linear(self.model, vectors)
        return np.asarray(scores, dtype=np.float64)

    def describe(self) -> dict:
        return {
            "method": "linear",
            "dim": self.model.dim,
            "encoder_id": str(self.model.metadata.get("encoder_id", "unknown")),
            "layer_id": str(self.model.metadata.get("layer_id", "unknown")),
        }


def _load_side(path: str, expect: Label) -> FeatureBank:
    p = Path(path)
    if not p.is_file():
        raise ManifestUnresolvable(f"bank file does not exist: {p}")
    bank = load_bank(p)
    if np.any(bank.labels != int(expect)):
        log.warning("%s: entry labels disagree with manifest side %s", p, expect.name.lower())
    return bank


def _file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def score_test_set(method, manifest: TestSetManifest) -> list[metrics.LabeledScore]:
    """Score both sides of one test set; reals first, then fakes."""
    pairs: list[metrics.LabeledScore] = []
    for path, truth in ((manifest.real_bank_path, Label.REAL), (manifest.fake_bank_path, Label.FAKE)):
        bank = _load_side(path, truth)
        for s in method.score_vectors(bank.vectors):
            pairs.append(metrics.LabeledScore(float(s), truth))
    return pairs


@dataclass(frozen=True)
class SuiteResult:
    per_set: dict  # name -> EvalReport, manifest order
    map_total: float
    avg_acc_total: float
    family_rollups: dict  # family -> {"ap": float, "accuracy": float, "sets": int}
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "per_set": {name: rep.to_dict() for name, rep in self.per_set.items()},
            "map_total": self.map_total,
            "avg_acc_total": self.avg_acc_total,
            "family_rollups": self.family_rollups,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        """Deterministic text: fixed key order, floats at 6 significant digits."""
        return json.dumps(_round_floats(self.to_dict()), indent=2) + "\n"


def _round_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.6g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def resolve_threshold(
    calibration: str,
    *,
    method=None,
    threshold: float | None = None,
    val_pairs: Sequence | None = None,
) -> tuple[float | None, str]:
    """(threshold or None-for-oracle, threshold_source label)."""
    if calibration == "oracle":
        return None, "oracle"
    if calibration == "validation":
        if not val_pairs:
            raise CalibrationSourceMissing("validation calibration needs validation scores")
        t, _ = metrics.calibrate_threshold(val_pairs)
        return t, "validation"
    if calibration == "fixed":
        if threshold is None:
            if method is None:
                raise ValueError("fixed calibration needs a threshold")
            threshold = method.natural_threshold
        return float(threshold), "fixed"
    raise ValueError(f"unknown calibration {calibration!r}")


def evaluate_suite(
    manifests: Sequence[TestSetManifest],
    method,
    *,
    calibration: str = "oracle",
    threshold: float | None = None,
    val_pairs: Sequence | None = None,
    ap_convention: str = "step",
    timestamp: str = "",
) -> SuiteResult:
    """Run one method over every test set; same inputs, same SuiteResult."""
    if not manifests:
        raise EmptyInput("no test sets")
    thr, source = resolve_threshold(
        calibration, method=method, threshold=threshold, val_pairs=val_pairs
    )
    per_set: dict[str, metrics.EvalReport] = {}
    bank_hashes: dict[str, str] = {}
    for m in manifests:
        pairs = score_test_set(method, m)
        if thr is None:
            report = metrics.oracle_evaluate(pairs, ap_convention=ap_convention)
        else:
            report = metrics.evaluate_at(pairs, thr, source, ap_convention=ap_convention)
        per_set[m.name] = report
        for p in (m.real_bank_path, m.fake_bank_path):
            bank_hashes[str(p)] = _file_sha256(p)

    rollups: dict[str, dict] = {}
    for fam in FAMILIES:
        reps = {m.name: per_set[m.name] for m in manifests if m.family == fam}
        if not reps:
            continue
        rollups[fam] = {
            "ap": metrics.aggregate_map(reps),
            "accuracy": metrics.aggregate_accuracy(reps),
            "sets": len(reps),
        }
    provenance = {
        "timestamp": timestamp,
        "method": method.describe(),
        "calibration": {"mode": calibration, "threshold_source": source,
                        "threshold": thr},
        "ap_convention": ap_convention,
        "bank_hashes": bank_hashes,
        "sets": [{"name": m.name, "family": m.family} for m in manifests],
    }
    return SuiteResult(
        per_set=per_set,
        map_total=metrics.aggregate_map(per_set),
        avg_acc_total=metrics.aggregate_accuracy(per_set),
        family_rollups=rollups,
        provenance=provenance,
    )


def write_scores(path, rows: Sequence) -> None:
    """JSON-lines scores: one {"score", "truth", "image_ref"} object per row.

    Rows are (score, truth, image_ref) with truth a Label, 0/1, "real"/"fake"
    or None for unlabeled; shorter rows leave truth/ref empty.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            row = tuple(row) if not isinstance(row, (int, float)) else (row,)
            score = float(row[0])
            truth = row[1] if len(row) > 1 else None
            ref = str(row[2]) if len(row) > 2 else ""
            name = None
            if truth is not None:
                name = Label(int(as_label(truth))).name.lower()
            fh.write(json.dumps({"score": score, "truth": name, "image_ref": ref}) + "\n")


def read_scores(path) -> list[tuple[float, Label | None, str]]:
    out: list[tuple[float, Label | None, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                score = float(doc["score"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{ln}: bad scores line: {exc}") from exc
            truth = doc.get("truth")
            label = None if truth is None else as_label(truth)
            out.append((score, label, str(doc.get("image_ref", ""))))
    return out


def labeled_pairs(rows: Sequence) -> list[metrics.LabeledScore]:
    """Keep only labeled rows as (score, truth) pairs for the metric layer."""
    return [metrics.LabeledScore(r[0], r[1]) for r in rows if r[1] is not None]
