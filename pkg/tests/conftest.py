import numpy as np
import pytest

from ufd import build_bank


def make_bank(rng, n=None, dim=None, *, tags=("srcA", "srcB"), with_classes=False,
              metadata=None):
    """Random bank with both labels present and varied string fields."""
    n = n or int(rng.integers(2, 40))
    dim = dim or int(rng.integers(1, 32))
    unicode_pool = ["", "img_01.png", "päth/ü.png", "шлях/файл.png", "日本語/画像.png"]
    records = []
    for i in range(n):
        vec = rng.normal(size=dim)
        while np.linalg.norm(vec) < 1e-6:  # keep vectors valid
            vec = rng.normal(size=dim)
        label = "real" if (i % 2 == 0) else "fake"
        cid = int(rng.integers(0, 5)) if with_classes else -1
        tag = tags[i % len(tags)]
        ref = unicode_pool[int(rng.integers(0, len(unicode_pool)))]
        records.append((vec, label, cid, tag, ref))
    return build_bank(records, dim, metadata)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
