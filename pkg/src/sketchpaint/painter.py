"""Checkpoint-backed painting: sketch (+ optional scribbles) to colored image.

Input sketches of any size are center-square-cropped and resized to the
model resolution; scribble coordinates are interpreted in that model-space
frame (the crop box is returned so callers can align overlays). Output is
resized back to the input's cropped-square side.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import checkpoint as ckpt
from .dataset import center_crop_box, square_crop_resize
from .hints import Scribble, rasterize_user_scribbles
from .image import denormalize, normalize, replicate_rgb
from .networks import make_noise_plane, parameter_count
from .sketch import to_grayscale
from .training import TrainConfig, load_generator_for_inference


@dataclass(frozen=True)
class CropBox:
    left: int
    top: int
    side: int

    def to_dict(self) -> dict:
        return {"left": self.left, "top": self.top, "side": self.side}


class Painter:
    """A generator loaded once from a checkpoint, reusable across requests.

    The module is never mutated after loading, so concurrent paint() calls
    are safe.
    """

    def __init__(self, checkpoint_path: str | Path):
        self.checkpoint_path = Path(checkpoint_path)
        self.generator, self.train_config = load_generator_for_inference(checkpoint_path)
        blob_sha = hashlib.sha256(
            ckpt.blob_path(checkpoint_path).read_bytes()
        ).hexdigest()
        self.model_id = f"{self.generator.config_hash[:8]}-{blob_sha[:8]}"

    @property
    def resolution(self) -> int:
        return self.generator.config.resolution

    def describe(self) -> dict:
        cfg = self.generator.config
        return {
            "model_id": self.model_id,
            "resolution": cfg.resolution,
            "depth": cfg.depth,
            "base_filters": cfg.base_filters,
            "input_channels": cfg.input_channels,
            "output_channels": cfg.output_channels,
            "noise_stddev": cfg.noise_stddev,
            "parameters": parameter_count(self.generator),
            "checkpoint": str(self.checkpoint_path),
            "trained_steps": self.train_config.total_steps,
        }

    def paint(
        self,
        sketch: np.ndarray,
        scribbles: list[Scribble] | None = None,
        noise_seed: int | None = None,
    ) -> tuple[np.ndarray, CropBox]:
        """Returns (painted image, crop box applied to the input sketch).

        The noise plane is zeros when noise_seed is None, so repeat calls
        with the same inputs return identical pixels.
        """
        h, w = sketch.shape[:2]
        box = CropBox(*center_crop_box(h, w))
        gray = to_grayscale(sketch)
        model_sketch = square_crop_resize(gray, self.resolution)
        hint = (
            rasterize_user_scribbles(model_sketch, scribbles)
            if scribbles
            else replicate_rgb(model_sketch)
        )
        x = torch.from_numpy(
            np.ascontiguousarray(normalize(hint).transpose(2, 0, 1))
        ).unsqueeze(0)
        z = make_noise_plane(
            self.resolution,
            self.generator.config.noise_stddev,
            seed=noise_seed,
        )
        self.generator.eval()
        with torch.no_grad():
            out = self.generator(torch.cat([x, z], dim=1))
        painted = denormalize(out[0].numpy().transpose(1, 2, 0))
        if box.side != self.resolution:
            painted = square_crop_resize(painted, box.side)
        return painted, box


def paint(
    checkpoint_path: str | Path,
    sketch: np.ndarray,
    scribbles: list[Scribble] | None = None,
    noise_seed: int | None = None,
) -> tuple[np.ndarray, CropBox]:
    """One-shot convenience wrapper: load, paint, discard."""
    return Painter(checkpoint_path).paint(sketch, scribbles, noise_seed)


def bench(painter: Painter, runs: int = 10, target_seconds: float = 1.0) -> dict:
    """Latency report for repeated paints of a blank sketch; informational
    only, the interactive target is hardware-dependent."""
    sketch = np.ones((painter.resolution, painter.resolution), dtype=np.float32)
    painter.paint(sketch)  # warm-up outside the timings
    times = []
    for _ in range(runs):
        t0 = time.perf_counter()
        painter.paint(sketch)
        times.append(time.perf_counter() - t0)
    times.sort()
    return {
        "runs": runs,
        "mean_s": sum(times) / len(times),
        "p50_s": times[len(times) // 2],
        "p95_s": times[min(len(times) - 1, int(len(times) * 0.95))],
        "max_s": times[-1],
        "target_s": target_seconds,
        "within_target": times[len(times) // 2] <= target_seconds,
    }
