"""
Feature banks and nearest-neighbor scoring
==========================================

Build a labeled bank of feature vectors, write it to disk, read it back,
and classify fresh queries by their distance to each side of the bank.
"""

from pathlib import Path

import numpy as np

from ufd import build_bank, knn_batch, load_bank, save_bank

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

# two synthetic "models": real features cluster left, fake features right
rng = np.random.default_rng(0)
dim = 32
entries = []
for _ in range(400):
    entries.append((rng.normal(-1.0, 0.8, size=dim), "real"))
    entries.append((rng.normal(+1.0, 0.8, size=dim), "fake"))

bank = build_bank(entries, dim, {"encoder_id": "demo", "layer_id": "none"})
print(f"bank: {len(bank)} entries, dim {bank.dim}")

# the on-disk format round-trips bit for bit
bank_path = out_dir / "demo.ufdb"
save_bank(bank, bank_path)
bank = load_bank(bank_path)
print(f"reloaded from {bank_path} ({bank_path.stat().st_size} bytes)")

# queries from each side, plus some sitting on the fence
queries = np.vstack([
    rng.normal(-1.0, 0.8, size=(5, dim)),   # should look real
    rng.normal(+1.0, 0.8, size=(5, dim)),   # should look fake
    rng.normal(0.0, 0.8, size=(5, dim)),    # genuinely ambiguous
])

# score_fake = mean distance to the k nearest reals minus the same for fakes:
# positive means the fake side is closer
for k in (1, 5):
    preds = knn_batch(queries, bank, k)
    decisions = "".join("F" if int(p.decision) else "r" for p in preds)
    print(f"k={k}: {decisions}")

preds = knn_batch(queries, bank, 1)
print("\nquery  score_fake  d_real_1  d_fake_1  decision")
for i, p in enumerate(preds):
    print(f"{i:5d}  {p.score_fake:+.4f}     {p.d_real_k:.4f}    {p.d_fake_k:.4f}    {p.decision.name.lower()}")
