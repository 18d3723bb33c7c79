"""Linear probe: one linear layer plus a sigmoid, trained with summed BCE.

The probe consumes raw stored vectors (not the unit-normalized copies) in
float64. Loss is summed over samples, not averaged:

    L = -sum_fake log p(x) - sum_real log(1 - p(x)),  p = sigmoid(w.x + b)

with probabilities clamped to [1e-12, 1 - 1e-12] inside the log only. The
gradient is the textbook sum (p - y) x.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np
from scipy.special import expit

from .bank import FeatureBank
from .errors import (
    ChecksumMismatch,
    DimensionMismatch,
    NonFiniteLoss,
    NonFiniteValue,
    SingleClassBank,
)
from .labels import Label

P_CLAMP = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters. The defaults are this library's own conservative
    choices, not values tuned on any external protocol; runs echo them into
    the model file so they are never implicit.

    `augment` is a pixel-space hook: it only applies when training from
    images. Banks of precomputed features must have had augmentation applied
    before extraction (the extractor records that in bank metadata)."""

    learning_rate: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 200
    early_stop_patience: int = 10
    val_fraction: float = 0.1
    seed: int = 0
    augment: object | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be >= 1")
        if self.early_stop_patience < 0:
            raise ValueError("early_stop_patience must be >= 0")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray  # (dim,) float64
    bias: float
    dim: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights.setflags(write=False)


@dataclass(frozen=True)
class TrainReport:
    epochs_run: int
    best_epoch: int
    best_val_accuracy: float
    train_loss: tuple[float, ...]  # per epoch, summed BCE on the train split
    val_accuracy: tuple[float, ...]
    config_note: str = "hyperparameters are library defaults unless overridden"


def _scores(weights: np.ndarray, bias: float, x: np.ndarray) -> np.ndarray:
    return expit(x @ weights + bias)


def bce_loss(weights, bias: float, features, truths) -> float:
    """Summed binary cross-entropy; probabilities clamped at 1e-12 in the logs."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(truths, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or x.shape[1] != w.shape[0] or x.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"features {x.shape}, weights {w.shape}, truths {y.shape}")
    p = np.clip(_scores(w, float(bias), x), P_CLAMP, 1.0 - P_CLAMP)
    return float(-np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def bce_gradient(weights, bias: float, features, truths) -> tuple[np.ndarray, float]:
    """(d/dw, d/db) of the summed BCE: sum (p - y) x and sum (p - y)."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(truths, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or x.shape[1] != w.shape[0] or x.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"features {x.shape}, weights {w.shape}, truths {y.shape}")
    resid = _scores(w, float(bias), x) - y
    return x.T @ resid, float(resid.sum())


def _stratified_split(labels: np.ndarray, val_fraction: float, rng: np.random.Generator):
    train_parts = []
    val_parts = []
    for side in (0, 1):
        idx = np.flatnonzero(labels == side)
        n_val = int(round(val_fraction * idx.size))
        n_val = max(1, min(n_val, idx.size - 1))
        perm = rng.permutation(idx)
        val_parts.append(perm[:n_val])
        train_parts.append(perm[n_val:])
    return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(val_parts))


def train_linear(bank: FeatureBank, config: TrainConfig = TrainConfig()) -> tuple[LinearModel, TrainReport]:
    """Plain SGD from zero init, early-stopped on held-out accuracy.

    The validation split is stratified per class (at least one sample per
    class on each side of the split; banks too small for that are rejected).
    Weights of the best-validation epoch are returned, not the last. Fully
    deterministic for a fixed config: same bank, same seed, same bytes out.
    """
    labels = bank.labels.astype(np.int64)
    n_fake = int(labels.sum())
    if n_fake == 0 or n_fake == labels.size:
        raise SingleClassBank("training needs both real and fake entries")
    if min(n_fake, labels.size - n_fake) < 2:
        raise SingleClassBank("need at least 2 entries per class to split off validation")

    rng = np.random.default_rng(config.seed)
    train_idx, val_idx = _stratified_split(labels, config.val_fraction, rng)
    x = bank.vectors.astype(np.float64)
    y = labels.astype(np.float64)
    x_tr, y_tr = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]

    w = np.zeros(bank.dim, dtype=np.float64)
    b = 0.0
    best_w, best_b = w.copy(), b
    best_acc = -1.0
    best_epoch = 0
    since_improve = 0
    train_loss: list[float] = []
    val_accuracy: list[float] = []

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(x_tr.shape[0])
        for start in range(0, order.size, config.batch_size):
            sel = order[start:start + config.batch_size]
            gw, gb = bce_gradient(w, b, x_tr[sel], y_tr[sel])
            w -= config.learning_rate * gw
            b -= config.learning_rate * gb
        loss = bce_loss(w, b, x_tr, y_tr)
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"training loss diverged at epoch {epoch}")
        train_loss.append(loss)
        val_pred = _scores(w, b, x_val) > 0.5
        acc = float(np.mean(val_pred == (y_val == 1.0)))
        val_accuracy.append(acc)
        if acc > best_acc:
            best_acc = acc
            best_w, best_b = w.copy(), b
            best_epoch = epoch
            since_improve = 0
        else:
            since_improve += 1
            if since_improve > config.early_stop_patience:
                break

    model = LinearModel(
        weights=best_w,
        bias=best_b,
        dim=bank.dim,
        metadata={
            "encoder_id": bank.encoder_id,
            "layer_id": bank.layer_id,
            "train_config": asdict(config),
            "train_entries": int(train_idx.size),
            "val_entries": int(val_idx.size),
        },
    )
    report = TrainReport(
        epochs_run=len(train_loss),
        best_epoch=best_epoch,
        best_val_accuracy=best_acc,
        train_loss=tuple(train_loss),
        val_accuracy=tuple(val_accuracy),
    )
    return model, report


def predict_linear(model: LinearModel, queries, threshold: float = 0.5):
    """(sigmoid scores, decisions) for a query matrix; fake iff score > threshold."""
    x = np.asarray(queries, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise DimensionMismatch(f"queries shaped {x.shape}, model dim is {model.dim}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteValue("query contains NaN or infinity")
    scores = _scores(model.weights, model.bias, x)
    decisions = [Label.FAKE if s > threshold else Label.REAL for s in scores]
    return scores, decisions


def _payload_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def save_model(model: LinearModel, path) -> None:
    """JSON with full-precision floats and a sha256 over the payload."""
    payload = {
        "format": "ufd-linear-model",
        "version": 1,
        "dim": model.dim,
        "weights": [float(v) for v in model.weights],
        "bias": float(model.bias),
        "metadata": model.metadata,
    }
    doc = dict(payload)
    doc["content_hash"] = _payload_hash(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> LinearModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    stored = doc.pop("content_hash", None)
    if stored is None or _payload_hash(doc) != stored:
        raise ChecksumMismatch("model file content hash does not match")
    if doc.get("format") != "ufd-linear-model" or doc.get("version") != 1:
        raise ChecksumMismatch("not a linear model file")
    weights = np.asarray(doc["weights"], dtype=np.float64)
    if weights.shape[0] != int(doc["dim"]):
        raise DimensionMismatch("weight count disagrees with declared dim")
    return LinearModel(
        weights=weights,
        bias=float(doc["bias"]),
        dim=int(doc["dim"]),
        metadata=dict(doc.get("metadata", {})),
    )
