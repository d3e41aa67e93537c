"""Raster image helpers shared across the toolkit.

Images are numpy float32 arrays in [0, 1], shaped (H, W) for grayscale or
(H, W, 3) for RGB, row-major. Network code maps them to [-1, 1]; the
normalize/denormalize pair below is the only place that convention lives.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


class ImageError(ValueError):
    """Raised for malformed image data or undecodable files."""


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check the (H, W[, C]) float-in-[0,1] contract, returning the array."""
    if not isinstance(img, np.ndarray):
        raise ImageError(f"expected ndarray, got {type(img).__name__}")
    if img.ndim == 3 and img.shape[2] not in (1, 3):
        raise ImageError(f"channels must be 1 or 3, got {img.shape[2]}")
    if img.ndim not in (2, 3):
        raise ImageError(f"expected 2-D or 3-D array, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ImageError(f"empty image: shape {img.shape}")
    if img.size and (float(img.min()) < 0.0 or float(img.max()) > 1.0):
        raise ImageError(
            f"intensities outside [0,1]: min={img.min():.4g} max={img.max():.4g}"
        )
    return img


def channels(img: np.ndarray) -> int:
    return 1 if img.ndim == 2 else img.shape[2]


def replicate_rgb(img: np.ndarray) -> np.ndarray:
    """Grayscale -> 3-channel by replication; 3-channel passes through."""
    if img.ndim == 2:
        return np.repeat(img[:, :, None], 3, axis=2)
    if img.shape[2] == 1:
        return np.repeat(img, 3, axis=2)
    return img


def normalize(img: np.ndarray) -> np.ndarray:
    """[0,1] -> [-1,1], the range the networks train in."""
    return img.astype(np.float32) * 2.0 - 1.0


def denormalize(img: np.ndarray) -> np.ndarray:
    """[-1,1] -> [0,1], clipped against tanh overshoot in float math."""
    return np.clip((img.astype(np.float32) + 1.0) / 2.0, 0.0, 1.0)


def load_png(path: str | Path) -> np.ndarray:
    """Decode an image file into float32 [0,1]; grayscale stays 2-D."""
    try:
        with Image.open(path) as im:
            if im.mode in ("L", "I;16", "I"):
                arr = np.asarray(im.convert("L"), dtype=np.float32) / 255.0
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ImageError(f"cannot decode {path}: {exc}") from exc
    return arr


def save_png(img: np.ndarray, path: str | Path) -> None:
    """Quantize [0,1] floats to 8-bit and write a PNG (deterministic bytes)."""
    validate_image(img)
    arr = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    mode = "L" if arr.ndim == 2 else "RGB"
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode=mode).save(path, format="PNG")


def encode_png(img: np.ndarray) -> bytes:
    """PNG bytes for an in-memory image; same quantization as save_png."""
    import io

    validate_image(img)
    arr = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    """Inverse of encode_png for request payloads."""
    import io

    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.mode in ("L", "I;16", "I"):
                return np.asarray(im.convert("L"), dtype=np.float32) / 255.0
            return np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except Exception as exc:
        raise ImageError(f"cannot decode image bytes: {exc}") from exc
