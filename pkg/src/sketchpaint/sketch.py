"""Line-sketch extraction from color cartoon frames.

The extractor is a thresholded difference-of-Gaussians: blur the grayscale
image at two scales (sigma and k*sigma), weight the coarse scale by gamma,
and soft-threshold the difference. Gamma is the detail knob: closer to 1
keeps more high-frequency structure in the sketch.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import correlate1d

from .image import channels, validate_image


class SketchParamError(ValueError):
    """Raised for invalid filter parameters."""


@dataclass(frozen=True)
class XdogParams:
    """Filter knobs. gamma weights the wide Gaussian; sigma is the narrow
    scale in pixels; k the scale ratio; epsilon/phi shape the soft threshold."""

    gamma: float = 0.98
    sigma: float = 1.0
    k: float = 1.6
    epsilon: float = 0.01
    phi: float = 200.0

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise SketchParamError(f"gamma must be in (0,1], got {self.gamma}")
        if self.sigma <= 0:
            raise SketchParamError(f"sigma must be > 0, got {self.sigma}")
        if self.k <= 1:
            raise SketchParamError(f"k must be > 1, got {self.k}")
        if self.phi <= 0:
            raise SketchParamError(f"phi must be > 0, got {self.phi}")


DEFAULT_GAMMAS = (0.96, 0.97, 0.98, 0.99)

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Single-channel luminance (0.299 R + 0.587 G + 0.114 B); identity for gray."""
    validate_image(image)
    if channels(image) == 1:
        return image[:, :, 0] if image.ndim == 3 else image
    return (image.astype(np.float32) @ _LUMA).astype(np.float32)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian with radius ceil(3*sigma), in double precision
    (normalization error would otherwise be amplified by the soft threshold)."""
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with edge-reflecting borders; sigma=0 is identity."""
    if sigma < 0:
        raise SketchParamError(f"sigma must be >= 0, got {sigma}")
    validate_image(image)
    if sigma == 0:
        return image.copy()
    out = _blur_f64(image.astype(np.float64), sigma)
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def xdog(image: np.ndarray, params: XdogParams | None = None) -> np.ndarray:
    """Extract a line sketch: white (1.0) background, dark edges, same H x W.

    U = blur(gray, sigma) - gamma * blur(gray, k*sigma); pixels with U >= epsilon
    map to white, the rest to 1 + tanh(phi * (U - epsilon)), clamped to [0, 1].
    """
    p = params or XdogParams()
    gray = to_grayscale(image).astype(np.float64)
    narrow = _blur_f64(gray, p.sigma)
    wide = _blur_f64(gray, p.k * p.sigma)
    u = narrow - p.gamma * wide
    out = np.where(u >= p.epsilon, 1.0, 1.0 + np.tanh(p.phi * (u - p.epsilon)))
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def _blur_f64(arr: np.ndarray, sigma: float) -> np.ndarray:
    kernel = gaussian_kernel(sigma)
    out = correlate1d(arr, kernel, axis=0, mode="reflect")
    return correlate1d(out, kernel, axis=1, mode="reflect")


def extract_sketch_set(
    image: np.ndarray,
    gammas: list[float] | tuple[float, ...] = DEFAULT_GAMMAS,
    base_params: XdogParams | None = None,
) -> list[np.ndarray]:
    """One sketch per gamma, other parameters held fixed; order preserved."""
    if not gammas:
        raise SketchParamError("gammas must be non-empty")
    base = base_params or XdogParams()
    return [xdog(image, replace(base, gamma=float(g))) for g in gammas]
