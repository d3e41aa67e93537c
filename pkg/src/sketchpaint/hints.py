"""Color hints: training-time blocks grown from a blurred target, and
user scribbles rasterized at inference time.

A hint image is the sketch replicated to RGB with color patches painted on
top. Training blocks carry the blurred target's own pixels (local shading
included); user scribbles are flat color disks swept along a polyline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .image import replicate_rgb, validate_image
from .sketch import gaussian_blur


class HintParamError(ValueError):
    """Raised for invalid growth parameters or malformed scribbles."""


@dataclass(frozen=True)
class BlockGrowthParams:
    blur_sigma: float = 8.0
    min_blocks: int = 2
    max_blocks: int = 8
    block_side: int = 12
    step: int = 12
    threshold: float = 0.12
    max_steps: int = 6

    def __post_init__(self) -> None:
        if not 1 <= self.min_blocks <= self.max_blocks:
            raise HintParamError(
                f"need 1 <= min_blocks <= max_blocks, got {self.min_blocks}..{self.max_blocks}"
            )
        if self.block_side < 1:
            raise HintParamError(f"block_side must be >= 1, got {self.block_side}")
        if self.step < 1:
            raise HintParamError(f"step must be >= 1, got {self.step}")
        if self.threshold <= 0:
            raise HintParamError(f"threshold must be > 0, got {self.threshold}")
        if self.max_steps < 1:
            raise HintParamError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.blur_sigma < 0:
            raise HintParamError(f"blur_sigma must be >= 0, got {self.blur_sigma}")


@dataclass(frozen=True)
class ColorBlock:
    """Square patches of side block_side anchored along the (+1,+1) diagonal.

    cells are (row, col) anchors of consecutive patches, each offset from the
    previous by (step, step). color is the mean RGB of the source image over
    every covered pixel.
    """

    cells: tuple[tuple[int, int], ...]
    color: tuple[float, float, float]
    block_side: int
    step: int

    def mask(self, height: int, width: int) -> np.ndarray:
        m = np.zeros((height, width), dtype=bool)
        b = self.block_side
        for r, c in self.cells:
            m[r : r + b, c : c + b] = True
        return m


def grow_block(
    blurred: np.ndarray, seed: tuple[int, int], params: BlockGrowthParams
) -> ColorBlock:
    """Grow a block diagonally from seed while each next patch stays within
    the color threshold of the running block mean.

    The candidate patch offset by (step, step) is appended while the L2
    distance between the block's mean RGB so far and the candidate patch's
    mean RGB is <= threshold, the patch is in bounds, and fewer than
    max_steps patches have been appended.
    """
    validate_image(blurred)
    if blurred.ndim != 3 or blurred.shape[2] != 3:
        raise HintParamError("blurred image must be 3-channel")
    h, w, _ = blurred.shape
    b = params.block_side
    r, c = int(seed[0]), int(seed[1])
    if r < 0 or c < 0 or r + b > h or c + b > w:
        raise HintParamError(f"seed patch at {(r, c)} does not fit in {h}x{w} image")

    cells = [(r, c)]
    pix_sum = blurred[r : r + b, c : c + b].reshape(-1, 3).sum(axis=0, dtype=np.float64)
    pix_count = b * b
    for _ in range(params.max_steps):
        nr, nc = cells[-1][0] + params.step, cells[-1][1] + params.step
        if nr + b > h or nc + b > w:
            break
        patch = blurred[nr : nr + b, nc : nc + b].reshape(-1, 3)
        patch_mean = patch.mean(axis=0, dtype=np.float64)
        block_mean = pix_sum / pix_count
        if float(np.linalg.norm(block_mean - patch_mean)) > params.threshold:
            break
        cells.append((nr, nc))
        pix_sum += patch.sum(axis=0, dtype=np.float64)
        pix_count += b * b

    color = tuple(float(v) for v in pix_sum / pix_count)
    return ColorBlock(cells=tuple(cells), color=color, block_side=b, step=params.step)


def synthesize_hints(
    target: np.ndarray,
    sketch: np.ndarray,
    params: BlockGrowthParams | None = None,
    seed: int = 0,
) -> tuple[np.ndarray, list[ColorBlock]]:
    """Build a training hint image from a target/sketch pair.

    Blurs the target, draws K ~ Uniform{min_blocks..max_blocks} seed anchors
    uniformly over positions where the first patch fits, grows each into a
    block, and paints the blurred target's pixels over the RGB-replicated
    sketch inside every block. Returns (hint image, blocks); bit-identical
    for identical inputs and seed.
    """
    p = params or BlockGrowthParams()
    validate_image(target)
    validate_image(sketch)
    if target.ndim != 3 or target.shape[2] != 3:
        raise HintParamError("target must be 3-channel")
    if sketch.ndim != 2 and not (sketch.ndim == 3 and sketch.shape[2] == 1):
        raise HintParamError("sketch must be single-channel")
    sk2d = sketch if sketch.ndim == 2 else sketch[:, :, 0]
    if target.shape[:2] != sk2d.shape:
        raise HintParamError(
            f"dimension mismatch: target {target.shape[:2]} vs sketch {sk2d.shape}"
        )
    h, w, _ = target.shape
    if p.block_side > h or p.block_side > w:
        raise HintParamError(f"block_side {p.block_side} exceeds image {h}x{w}")

    rng = np.random.default_rng(seed)
    blurred = gaussian_blur(target, p.blur_sigma)
    hint = replicate_rgb(sk2d).copy()

    k = int(rng.integers(p.min_blocks, p.max_blocks + 1))
    blocks: list[ColorBlock] = []
    for _ in range(k):
        r = int(rng.integers(0, h - p.block_side + 1))
        c = int(rng.integers(0, w - p.block_side + 1))
        block = grow_block(blurred, (r, c), p)
        blocks.append(block)
        for br, bc in block.cells:
            hint[br : br + p.block_side, bc : bc + p.block_side] = blurred[
                br : br + p.block_side, bc : bc + p.block_side
            ]
    return hint, blocks


@dataclass(frozen=True)
class Scribble:
    """A user stroke: polyline of (x, y) pixel points, RGB color, brush radius."""

    points: tuple[tuple[float, float], ...]
    color: tuple[float, float, float]
    radius: int


def rasterize_user_scribbles(
    sketch: np.ndarray, scribbles: list[Scribble]
) -> np.ndarray:
    """Paint flat-color scribbles over the RGB-replicated sketch.

    Each scribble is drawn as disks of its radius swept along the polyline;
    later scribbles overwrite earlier ones where they overlap.
    """
    validate_image(sketch)
    sk2d = sketch if sketch.ndim == 2 else sketch[:, :, 0]
    h, w = sk2d.shape
    out = replicate_rgb(sk2d).copy()
    for i, s in enumerate(scribbles):
        for x, y in s.points:
            if not (0 <= x < w and 0 <= y < h):
                raise HintParamError(
                    f"scribble {i} has out-of-bounds point ({x}, {y}) for {w}x{h} image"
                )
        if any(not 0.0 <= ch <= 1.0 for ch in s.color):
            raise HintParamError(f"scribble {i} color outside [0,1]: {s.color}")
        mask = _stroke_mask(h, w, s.points, s.radius)
        out[mask] = np.asarray(s.color, dtype=np.float32)
    return out


def _stroke_mask(
    h: int, w: int, points: tuple[tuple[float, float], ...], radius: int
) -> np.ndarray:
    mask = np.zeros((h, w), dtype=bool)
    pts = list(points)
    segments = list(zip(pts, pts[1:])) if len(pts) > 1 else [(pts[0], pts[0])]
    for (x0, y0), (x1, y1) in segments:
        length = float(np.hypot(x1 - x0, y1 - y0))
        # Dense enough sampling that consecutive disks overlap.
        n = max(2, int(np.ceil(length * 2)) + 1)
        for t in np.linspace(0.0, 1.0, n):
            _paint_disk(mask, x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, radius)
    return mask


def _paint_disk(mask: np.ndarray, x: float, y: float, radius: int) -> None:
    h, w = mask.shape
    cx, cy = int(round(x)), int(round(y))
    if radius <= 0:
        if 0 <= cy < h and 0 <= cx < w:
            mask[cy, cx] = True
        return
    r0, r1 = max(0, cy - radius), min(h, cy + radius + 1)
    c0, c1 = max(0, cx - radius), min(w, cx + radius + 1)
    yy, xx = np.mgrid[r0:r1, c0:c1]
    mask[r0:r1, c0:c1] |= (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2


def parse_scribbles(data: str | bytes | list) -> list[Scribble]:
    """Decode the wire format: JSON array of
    {points: [[x, y], ...], color: "#RRGGBB", radius: int}."""
    if isinstance(data, (str, bytes)):
        try:
            raw = json.loads(data)
        except json.JSONDecodeError as exc:
            raise HintParamError(f"scribbles are not valid JSON: {exc}") from exc
    else:
        raw = data
    if not isinstance(raw, list):
        raise HintParamError("scribbles JSON must be an array")
    out = []
    for i, item in enumerate(raw):
        try:
            points = tuple((float(x), float(y)) for x, y in item["points"])
            color = _parse_hex_color(item["color"])
            radius = int(item["radius"])
        except (KeyError, TypeError, ValueError) as exc:
            raise HintParamError(f"malformed scribble {i}: {exc}") from exc
        if not points:
            raise HintParamError(f"scribble {i} has no points")
        if radius < 0:
            raise HintParamError(f"scribble {i} has negative radius")
        out.append(Scribble(points=points, color=color, radius=radius))
    return out


def scribbles_to_json(scribbles: list[Scribble]) -> str:
    return json.dumps(
        [
            {
                "points": [[x, y] for x, y in s.points],
                "color": _hex_color(s.color),
                "radius": s.radius,
            }
            for s in scribbles
        ]
    )


def _parse_hex_color(text: str) -> tuple[float, float, float]:
    if not isinstance(text, str) or not text.startswith("#") or len(text) != 7:
        raise ValueError(f"color must be '#RRGGBB', got {text!r}")
    r, g, b = (int(text[i : i + 2], 16) for i in (1, 3, 5))
    return (r / 255.0, g / 255.0, b / 255.0)


def _hex_color(color: tuple[float, float, float]) -> str:
    return "#" + "".join(f"{int(round(c * 255)):02x}" for c in color)
