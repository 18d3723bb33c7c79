import numpy as np
import pytest
import torch
from PIL import Image
from transformers import CLIPVisionConfig, CLIPVisionModelWithProjection


def seeded_clip_model(
    seed: int,
    *,
    hidden: int = 512,
    layers: int = 6,
    heads: int = 8,
    image: int = 98,
    patch: int = 14,
    projection: int = 768,
):
    """A CLIP vision tower built from an explicit config with seeded random
    weights. No checkpoint needed: format/order/determinism conformance
    only requires a real encoder architecture, not real knowledge."""
    cfg = CLIPVisionConfig(
        hidden_size=hidden,
        intermediate_size=hidden * 4,
        num_hidden_layers=layers,
        num_attention_heads=heads,
        image_size=image,
        patch_size=patch,
        projection_dim=projection,
    )
    torch.manual_seed(seed)
    return CLIPVisionModelWithProjection(cfg).eval()


@pytest.fixture(scope="session")
def clip_model():
    return seeded_clip_model(0)


def save_noise_png(path, rng, size=(120, 100)):
    arr = rng.integers(0, 256, size=(size[1], size[0], 3), dtype=np.uint8)
    Image.fromarray(arr).save(path)


# duplicate pairs: 5 copies 1, 19 copies 7 (same bytes, different filenames)
DUPLICATES = ((5, 1), (19, 7))


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    rng = np.random.default_rng(2024)
    paths = []
    for i in range(32):
        p = root / f"img_{i:02d}.png"
        save_noise_png(p, rng)
        paths.append(p)
    for dst, src in DUPLICATES:
        paths[dst].write_bytes(paths[src].read_bytes())
    return root
