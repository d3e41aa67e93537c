"""On-disk tensor format: a JSON manifest next to one binary blob.

The manifest records the payload kind, config, and for every tensor its
name, shape, byte offset, and length; the blob is the tensors' float32
values, little-endian, packed back to back. Round trips are bit-exact.
A checkpoint path refers to the manifest file; the blob sits alongside it
with the same stem and a .bin suffix.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch


class CheckpointError(ValueError):
    """Raised for unreadable, truncated, or mismatched checkpoints."""


FORMAT_NAME = "sketchpaint-tensors"
FORMAT_VERSION = 1


def blob_path(manifest_path: str | Path) -> Path:
    p = Path(manifest_path)
    return p.with_suffix(".bin")


def save_tensors(
    path: str | Path,
    tensors: dict[str, torch.Tensor],
    kind: str,
    config: dict,
    extras: dict | None = None,
) -> None:
    """Write tensors (cast to float32 LE) plus metadata; atomic enough for
    single-writer training: blob first, manifest last."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    chunks = []
    for name, t in tensors.items():
        arr = t.detach().cpu().to(torch.float32).numpy().astype("<f4", copy=False)
        raw = arr.tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(t.shape),
                "dtype": "float32",
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": kind,
        "config": config,
        "extras": extras or {},
        "blob": blob_path(path).name,
        "blob_nbytes": offset,
        "tensors": entries,
    }
    blob_path(path).write_bytes(b"".join(chunks))
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8")


def load_tensors(path: str | Path) -> tuple[dict[str, torch.Tensor], dict]:
    """Read a manifest+blob pair back into float32 tensors.

    Refuses corrupt manifests and blobs whose length disagrees with the
    recorded offsets; never returns partial state.
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint manifest {path}: {exc}") from exc
    if manifest.get("format") != FORMAT_NAME:
        raise CheckpointError(f"{path} is not a {FORMAT_NAME} manifest")
    blob_file = path.parent / manifest["blob"]
    if not blob_file.exists():
        raise CheckpointError(f"checkpoint blob missing: {blob_file}")
    raw = blob_file.read_bytes()
    expected = int(manifest["blob_nbytes"])
    if len(raw) != expected:
        raise CheckpointError(
            f"blob length mismatch in {blob_file}: manifest says {expected} bytes, "
            f"file has {len(raw)}"
        )
    tensors: dict[str, torch.Tensor] = {}
    for e in manifest["tensors"]:
        start, n = int(e["offset"]), int(e["nbytes"])
        if start + n > len(raw):
            raise CheckpointError(
                f"tensor {e['name']} spans bytes [{start}, {start + n}) beyond "
                f"blob of {len(raw)} bytes"
            )
        arr = np.frombuffer(raw, dtype="<f4", count=n // 4, offset=start)
        tensors[e["name"]] = torch.from_numpy(arr.copy()).reshape(e["shape"])
    return tensors, manifest
