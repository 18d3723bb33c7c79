"""
Linear probe training and threshold calibration
===============================================

Train the one-layer probe on a labeled bank, pick a decision threshold on
held-out scores, and compare against the oracle (best possible) threshold.
"""

from pathlib import Path

import numpy as np

from ufd import (
    TrainConfig,
    build_bank,
    calibrate_threshold,
    evaluate_at,
    oracle_evaluate,
    predict_linear,
    save_model,
    train_linear,
)

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

rng = np.random.default_rng(1)
dim = 24

def draw(n, center):
    return rng.normal(center, 1.0, size=(n, dim))

# overlapping clusters: the probe cannot be perfect, so calibration matters
train_entries = [(v, "real") for v in draw(500, -0.35)]
train_entries += [(v, "fake") for v in draw(500, +0.35)]
bank = build_bank(train_entries, dim)

model, report = train_linear(bank, TrainConfig(max_epochs=60, seed=7))
print(f"trained {report.epochs_run} epochs, best val accuracy {report.best_val_accuracy:.3f}")
save_model(model, out_dir / "probe.json")

# calibrate on a fresh validation draw
val_scores, _ = predict_linear(model, draw(300, -0.35))
val_pairs = [(float(s), "real") for s in val_scores]
val_scores, _ = predict_linear(model, draw(300, +0.35))
val_pairs += [(float(s), "fake") for s in val_scores]
threshold, balanced = calibrate_threshold(val_pairs)
print(f"validation threshold {threshold:.4f} (balanced accuracy {balanced:.3f})")

# score an unseen test draw and evaluate three ways
test_scores, _ = predict_linear(model, draw(400, -0.35))
test_pairs = [(float(s), "real") for s in test_scores]
test_scores, _ = predict_linear(model, draw(400, +0.35))
test_pairs += [(float(s), "fake") for s in test_scores]

naive = evaluate_at(test_pairs, 0.5, "fixed")
tuned = evaluate_at(test_pairs, threshold, "validation")
best = oracle_evaluate(test_pairs)
print(f"\n{'threshold':>12}  {'accuracy':>8}  ap")
print(f"{'sigmoid 0.5':>12}  {naive.accuracy:8.3f}  {naive.ap:.3f}")
print(f"{'validation':>12}  {tuned.accuracy:8.3f}  {tuned.ap:.3f}")
print(f"{'oracle':>12}  {best.accuracy:8.3f}  {best.ap:.3f}")
print("\nthe oracle row is an upper bound: no threshold beats it on this test draw")
