"""Paired-sample dataset construction: crop/resize, sketch + hint generation,
manifests with a leak-free train/test split, and normalized batch loading.

Manifests are line-delimited JSON with a header line followed by one entry
per (source, gamma) pair; all file paths are stored relative to the manifest
so a dataset directory can be moved wholesale.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .hints import BlockGrowthParams, synthesize_hints
from .image import load_png, replicate_rgb, save_png, validate_image
from .sketch import XdogParams, xdog

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}


class DatasetError(ValueError):
    """Raised for unusable inputs or malformed manifests."""


@dataclass(frozen=True)
class ManifestEntry:
    source: str
    sketch: str
    hint: str
    target: str
    gamma: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "source": self.source,
                "sketch": self.sketch,
                "hint": self.hint,
                "target": self.target,
                "gamma": self.gamma,
            },
            sort_keys=True,
        )


@dataclass
class DatasetManifest:
    resolution: int
    split_tag: str
    entries: list[ManifestEntry] = field(default_factory=list)
    root: Path = Path(".")

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [
            json.dumps(
                {
                    "kind": "sketchpaint-manifest",
                    "resolution": self.resolution,
                    "split": self.split_tag,
                    "count": len(self.entries),
                },
                sort_keys=True,
            )
        ]
        lines += [e.to_json() for e in self.entries]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines:
            raise DatasetError(f"empty manifest: {path}")
        header = json.loads(lines[0])
        if header.get("kind") != "sketchpaint-manifest":
            raise DatasetError(f"not a dataset manifest: {path}")
        entries = []
        for line in lines[1:]:
            if not line.strip():
                continue
            d = json.loads(line)
            entries.append(
                ManifestEntry(
                    source=d["source"],
                    sketch=d["sketch"],
                    hint=d["hint"],
                    target=d["target"],
                    gamma=float(d["gamma"]),
                )
            )
        return cls(
            resolution=int(header["resolution"]),
            split_tag=str(header["split"]),
            entries=entries,
            root=path.parent,
        )


def square_crop_resize(image: np.ndarray, size: int) -> np.ndarray:
    """Center-crop to the largest square, then bilinear-resize to size x size."""
    if size < 1:
        raise DatasetError(f"size must be >= 1, got {size}")
    validate_image(image)
    h, w = image.shape[:2]
    side = min(h, w)
    top = (h - side) // 2
    left = (w - side) // 2
    cropped = image[top : top + side, left : left + side]
    if side == size:
        return cropped.astype(np.float32)
    # PIL bilinear on float32 channels; exact for constant images.
    if cropped.ndim == 2:
        im = Image.fromarray(cropped.astype(np.float32), mode="F")
        out = np.asarray(im.resize((size, size), Image.BILINEAR), dtype=np.float32)
    else:
        chans = [
            np.asarray(
                Image.fromarray(cropped[:, :, c].astype(np.float32), mode="F").resize(
                    (size, size), Image.BILINEAR
                ),
                dtype=np.float32,
            )
            for c in range(cropped.shape[2])
        ]
        out = np.stack(chans, axis=2)
    return np.clip(out, 0.0, 1.0)


def center_crop_box(height: int, width: int) -> tuple[int, int, int]:
    """(left, top, side) of the largest centered square; mirrors square_crop_resize."""
    side = min(height, width)
    return (width - side) // 2, (height - side) // 2, side


def list_source_images(image_dir: str | Path) -> list[Path]:
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise DatasetError(f"not a directory: {image_dir}")
    return sorted(
        p for p in image_dir.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS
    )


def _entry_seed(global_seed: int, stem: str, gamma: float) -> int:
    digest = hashlib.sha256(f"{global_seed}:{stem}:{gamma:.6f}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def build_pairs(
    image_dir: str | Path,
    out_dir: str | Path,
    gammas: list[float] | tuple[float, ...] = (0.96, 0.97, 0.98, 0.99),
    hint_params: BlockGrowthParams | None = None,
    seed: int = 0,
    size: int = 512,
    with_hints: bool = True,
    xdog_params: XdogParams | None = None,
) -> DatasetManifest:
    """Emit one (input, target) pair per source image per gamma.

    Targets are square-cropped and resized, sketches extracted per gamma, and
    hint images synthesized from the target when with_hints is set (otherwise
    the input is the RGB-replicated sketch). Unreadable files are logged and
    skipped; zero usable images is an error. Per-entry hint seeds derive from
    (seed, source stem, gamma), so rebuilds are reproducible.
    """
    out_dir = Path(out_dir)
    sources = list_source_images(image_dir)
    base_xdog = xdog_params or XdogParams()
    manifest = DatasetManifest(resolution=size, split_tag="all", root=out_dir)
    skipped = 0
    for src in sources:
        try:
            raw = load_png(src)
        except Exception as exc:
            log.warning("skipping unreadable %s: %s", src, exc)
            skipped += 1
            continue
        target = square_crop_resize(replicate_rgb(raw), size)
        target_rel = f"targets/{src.stem}.png"
        save_png(target, out_dir / target_rel)
        for gamma in gammas:
            sk = xdog(target, replace(base_xdog, gamma=float(gamma)))
            sketch_rel = f"sketches/{src.stem}_g{gamma:g}.png"
            save_png(sk, out_dir / sketch_rel)
            if with_hints:
                hint, _ = synthesize_hints(
                    target, sk, hint_params, seed=_entry_seed(seed, src.stem, gamma)
                )
                hint_rel = f"hints/{src.stem}_g{gamma:g}.png"
                save_png(hint, out_dir / hint_rel)
            else:
                hint_rel = sketch_rel
            manifest.entries.append(
                ManifestEntry(
                    source=str(src),
                    sketch=sketch_rel,
                    hint=hint_rel,
                    target=target_rel,
                    gamma=float(gamma),
                )
            )
    if skipped:
        log.warning("skipped %d unreadable file(s)", skipped)
    if not manifest.entries:
        raise DatasetError(f"no usable images in {image_dir}")
    return manifest


def split(
    manifest: DatasetManifest, train_fraction: float = 0.9, seed: int = 0
) -> tuple[DatasetManifest, DatasetManifest]:
    """Deterministic source-level split: every gamma-variant of one source
    image lands in the same side, so no content leaks across the split."""
    if not 0.0 < train_fraction < 1.0:
        raise DatasetError(f"train_fraction must be in (0,1), got {train_fraction}")
    sources = sorted({e.source for e in manifest.entries})
    order = np.random.default_rng(seed).permutation(len(sources))
    n_train = int(len(sources) * train_fraction)
    train_sources = {sources[i] for i in order[:n_train]}
    train = DatasetManifest(manifest.resolution, "train", root=manifest.root)
    test = DatasetManifest(manifest.resolution, "test", root=manifest.root)
    for e in manifest.entries:
        (train if e.source in train_sources else test).entries.append(e)
    return train, test


@dataclass
class Batch:
    """Stacked training arrays in [-1, 1]: inputs and targets are (N, H, W, 3)."""

    inputs: np.ndarray
    targets: np.ndarray
    ids: list[str]


def load_batch(manifest: DatasetManifest, indices: list[int]) -> Batch:
    """Decode hint/target pairs at the given entry indices and map [0,1] -> [-1,1]."""
    inputs, targets, ids = [], [], []
    for i in indices:
        if not 0 <= i < len(manifest.entries):
            raise DatasetError(f"index {i} out of range for {len(manifest.entries)} entries")
        e = manifest.entries[i]
        hint_path = manifest.root / e.hint
        target_path = manifest.root / e.target
        for p in (hint_path, target_path):
            if not p.exists():
                raise DatasetError(f"missing file for entry {i}: {p}")
        inputs.append(replicate_rgb(load_png(hint_path)) * 2.0 - 1.0)
        targets.append(replicate_rgb(load_png(target_path)) * 2.0 - 1.0)
        ids.append(f"{Path(e.source).stem}_g{e.gamma:g}")
    return Batch(
        inputs=np.stack(inputs).astype(np.float32),
        targets=np.stack(targets).astype(np.float32),
        ids=ids,
    )
