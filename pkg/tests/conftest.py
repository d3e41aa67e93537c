from __future__ import annotations

import numpy as np
import pytest

from sketchpaint.image import save_png
from sketchpaint.training import TrainConfig, init_train_state, save_checkpoint


def make_test_image(size: int = 48, seed: int = 0) -> np.ndarray:
    """Deterministic color test card: smooth gradients, two flat regions, and
    a dark outline so sketches have real edges to find."""
    rng = np.random.default_rng(seed)
    img = np.zeros((size, size, 3), dtype=np.float32)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32) / (size - 1)
    img[:, :, 0] = 0.3 + 0.5 * xx
    img[:, :, 1] = 0.3 + 0.5 * yy
    img[:, :, 2] = 0.6
    img[size // 8 : size // 3, size // 8 : size // 3] = (0.9, 0.2, 0.1)
    img[size // 2 :, size // 2 :] = (0.1, 0.4, 0.8)
    img += rng.normal(0.0, 0.01, img.shape).astype(np.float32)
    # dark ring outline
    cy = cx = size / 2
    rr = np.hypot(yy * (size - 1) - cy, xx * (size - 1) - cx)
    ring = np.abs(rr - size / 3) < 1.2
    img[ring] = 0.05
    return np.clip(img, 0.0, 1.0)


@pytest.fixture(scope="session")
def tiny_image_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("images")
    for i in range(4):
        save_png(make_test_image(size=48, seed=i), d / f"card{i}.png")
    return d


@pytest.fixture(scope="session")
def tiny_manifest_64(tiny_image_dir, tmp_path_factory):
    """Four-pair 64 px dataset manifest for training tests."""
    from sketchpaint.dataset import build_pairs

    d = tmp_path_factory.mktemp("ds64")
    manifest = build_pairs(tiny_image_dir, d, gammas=[0.98], seed=0, size=64)
    path = d / "train.manifest.jsonl"
    manifest.save(path)
    return path


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    """Untrained 64 px model checkpoint shared by inference/service tests."""
    d = tmp_path_factory.mktemp("ckpt")
    config = TrainConfig(
        resolution=64, base_filters=8, total_steps=1, manifest=None, seed=7
    )
    state = init_train_state(config)
    return save_checkpoint(state, d / "model.ckpt.json")
