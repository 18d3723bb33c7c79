"""Offline extraction conformance.

A seeded, unpretrained encoder exercises everything that matters here:
bank format, input order, determinism, augmentation bookkeeping, skip
handling. Checkpoint quality is a separate (online) concern.
"""

import logging

import numpy as np
import pytest
import ufd
from PIL import Image

from conftest import DUPLICATES, seeded_clip_model
from ufd_extract import (
    AugmentPolicy,
    DecodeFailure,
    ExtractionSpec,
    WeightsUnavailable,
    extract,
)


@pytest.fixture(scope="module")
def conformance(clip_model, image_dir, tmp_path_factory):
    """One 32-image extraction shared by the assertions below."""
    out = tmp_path_factory.mktemp("banks") / "conformance.ufdb"
    paths = sorted(image_dir.iterdir())
    labels = ["real" if i % 2 == 0 else "fake" for i in range(len(paths))]
    cids = list(range(len(paths)))
    spec = ExtractionSpec(encoder_id="clip-vit-l14", batch_size=8)
    report = extract(paths, spec, out, labels=labels, class_ids=cids,
                     source_tag="conformance", model=clip_model)
    return paths, labels, cids, report, ufd.load_bank(out)


def test_bank_loads_with_expected_shape(conformance):
    paths, labels, cids, report, bank = conformance
    assert report.entries == len(bank) == 32
    assert report.dim == bank.dim == 768
    assert report.skipped == () and report.skip_manifest is None


def test_entry_order_follows_input_order(conformance):
    paths, labels, cids, _, bank = conformance
    assert bank.image_refs == tuple(p.name for p in paths)
    assert [int(x) for x in bank.labels] == [0 if l == "real" else 1 for l in labels]
    assert list(bank.class_ids) == cids
    assert bank.source_tags == ("conformance",) * 32


def test_duplicate_inputs_yield_identical_vectors(conformance):
    *_, bank = conformance
    for dst, src in DUPLICATES:
        assert bank.vectors[dst].tobytes() == bank.vectors[src].tobytes()
    # and distinct files do not collapse
    assert bank.vectors[0].tobytes() != bank.vectors[2].tobytes()


def test_bank_invariants(conformance):
    *_, bank = conformance
    assert np.all(np.isfinite(bank.vectors))
    norms = np.linalg.norm(bank.unit_vectors.astype(np.float64), axis=1)
    assert np.abs(norms - 1.0).max() < 1e-3
    assert bank.encoder_id == "clip-vit-l14" and bank.layer_id == "L24"
    meta = bank.metadata
    assert meta["dim"] == 768
    assert meta["features"] == "raw"
    assert meta["augmentation"] is None
    assert len(meta["preprocess_hash"]) == 64
    assert meta["preprocess"]["size"] == 98  # the override model's input size
    summary = bank.summary()
    assert summary["real"] == summary["fake"] == 16


def test_bank_feeds_the_scoring_path(conformance):
    *_, bank = conformance
    preds = ufd.knn_batch(bank.vectors[:4], bank, k=1)
    # each query is its own nearest neighbor at distance ~0
    assert all(min(p.d_real_k, p.d_fake_k) < 1e-6 for p in preds)


def test_rerun_is_byte_identical(clip_model, image_dir, tmp_path):
    paths = sorted(image_dir.iterdir())[:8]
    spec = ExtractionSpec(encoder_id="clip-vit-l14", batch_size=3)
    payload = []
    for name in ("a.ufdb", "b.ufdb"):
        out = tmp_path / name
        extract(paths, spec, out, labels="real", source_tag="rerun", model=clip_model)
        payload.append(out.read_bytes())
    assert payload[0] == payload[1]


def test_augmentation_is_recorded_and_reproducible(clip_model, image_dir, tmp_path):
    paths = sorted(image_dir.iterdir())[:6]
    policy = AugmentPolicy(probability=1.0, sigma_range=(0.5, 2.0), seed=3)
    spec = ExtractionSpec(encoder_id="clip-vit-l14", augment=policy)
    plain_spec = ExtractionSpec(encoder_id="clip-vit-l14")

    runs = []
    for name, s in (("aug1.ufdb", spec), ("aug2.ufdb", spec), ("plain.ufdb", plain_spec)):
        out = tmp_path / name
        extract(paths, s, out, labels="fake", model=clip_model)
        runs.append(out.read_bytes())
    assert runs[0] == runs[1]
    assert runs[0] != runs[2]

    bank = ufd.load_bank(tmp_path / "aug1.ufdb")
    assert bank.metadata["augmentation"] == policy.params()


def test_undecodable_inputs_are_skipped_with_manifest(clip_model, image_dir, tmp_path, caplog):
    paths = sorted(image_dir.iterdir())
    bad = tmp_path / "broken.png"
    bad.write_bytes(b"this is not an image")
    items = paths[:3] + [bad] + paths[3:]
    out = tmp_path / "skips.ufdb"
    spec = ExtractionSpec(encoder_id="clip-vit-l14")
    with caplog.at_level(logging.WARNING, logger="ufd_extract"):
        report = extract(items, spec, out, labels="real", model=clip_model)
    assert report.entries == 32
    assert [s["ref"] for s in report.skipped] == ["broken.png"]
    assert report.skipped[0]["index"] == 3
    assert any("broken.png" in r.message for r in caplog.records)

    manifest = tmp_path / "skips.ufdb.skips.json"
    assert report.skip_manifest == str(manifest) and manifest.exists()
    bank = ufd.load_bank(out)
    assert "broken.png" not in bank.image_refs
    assert bank.image_refs == tuple(p.name for p in paths)


def test_nothing_decodable_raises(clip_model, tmp_path):
    bad = tmp_path / "junk.png"
    bad.write_bytes(b"\x00\x01")
    spec = ExtractionSpec(encoder_id="clip-vit-l14")
    with pytest.raises(DecodeFailure):
        extract([bad], spec, tmp_path / "x.ufdb", labels="real", model=clip_model)
    with pytest.raises(DecodeFailure):
        extract([], spec, tmp_path / "x.ufdb", labels="real", model=clip_model)


def test_label_count_mismatch_rejected(clip_model, image_dir, tmp_path):
    paths = sorted(image_dir.iterdir())[:4]
    spec = ExtractionSpec(encoder_id="clip-vit-l14")
    with pytest.raises(ValueError):
        extract(paths, spec, tmp_path / "x.ufdb", labels=["real"] * 3, model=clip_model)


def test_missing_pretrained_weights(image_dir, tmp_path, monkeypatch):
    # force the hub fully offline; with no cache the load must fail cleanly
    monkeypatch.setenv("HF_HUB_OFFLINE", "1")
    spec = ExtractionSpec(encoder_id="clip-vit-l14")
    with pytest.raises(WeightsUnavailable):
        extract(sorted(image_dir.iterdir())[:1], spec, tmp_path / "x.ufdb", labels="real")


def test_intermediate_layers_use_trunk_width(image_dir, tmp_path, caplog):
    model = seeded_clip_model(1, hidden=128, layers=16, heads=4, image=56, projection=64)
    paths = sorted(image_dir.iterdir())[:4]
    vecs = {}
    for layer in ("L8", "L16"):
        spec = ExtractionSpec(encoder_id="clip-vit-l14", layer_id=layer)
        out = tmp_path / f"{layer}.ufdb"
        with caplog.at_level(logging.WARNING, logger="ufd_extract"):
            report = extract(paths, spec, out, labels="real", model=model)
        assert report.dim == 128  # the override trunk's width
        bank = ufd.load_bank(out)
        assert bank.layer_id == layer and bank.dim == 128
        vecs[layer] = bank.vectors
    assert not np.allclose(vecs["L8"], vecs["L16"])
    # the advertised-vs-actual dimension disagreement is surfaced, not hidden
    assert any("advertises dim" in r.message for r in caplog.records)


def structured_photo():
    # gradient + two rectangles: enough spatial structure that geometry edits
    # mean something (pure noise would not give a stable ordering)
    x = np.linspace(0, 255, 160, dtype=np.float64)
    img = np.tile(x, (120, 1))
    img = np.stack([img, img[::-1], np.full_like(img, 96.0)], axis=2)
    img[20:60, 30:80, 0] = 240.0
    img[70:110, 90:150, 1] = 30.0
    return Image.fromarray(img.astype(np.uint8))


def test_rotation_changes_features_more_than_a_one_pixel_crop(clip_model, tmp_path):
    photo = structured_photo()
    rotated = photo.transpose(Image.Transpose.ROTATE_90)
    cropped = photo.crop((1, 1, photo.size[0], photo.size[1]))

    spec = ExtractionSpec(encoder_id="clip-vit-l14")
    out = tmp_path / "geom.ufdb"
    extract([photo, rotated, cropped], spec, out, labels="real", model=clip_model)
    unit = ufd.load_bank(out).unit_vectors.astype(np.float64)
    d_rot = 1.0 - float(unit[0] @ unit[1])
    d_crop = 1.0 - float(unit[0] @ unit[2])
    assert d_rot > d_crop > 0.0
