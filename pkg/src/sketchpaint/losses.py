"""The four training loss terms and their weighted combination.

All terms reduce expectations to plain means (over pixels, grid cells, and
batch), which keeps the weights resolution-independent. Images are NCHW
tensors in [-1, 1]; probability grids come from the patch discriminator.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch import nn

from . import checkpoint as ckpt

PROB_EPS = 1e-7
TV_EPS = 1e-8

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class LossError(ValueError):
    """Raised for shape mismatches and non-finite loss terms."""


@dataclass(frozen=True)
class LossWeights:
    """Nonnegative weights for the composite objective; at least one > 0.

    Setting adversarial-only weights to zero reproduces a plain supervised
    regression; zeroing feature or tv isolates those terms for ablations.
    """

    pixel: float = 100.0
    feature: float = 1.0
    adversarial: float = 1.0
    tv: float = 1e-4

    def __post_init__(self) -> None:
        vals = (self.pixel, self.feature, self.adversarial, self.tv)
        if any(v < 0 for v in vals):
            raise LossError(f"weights must be >= 0, got {vals}")
        if all(v == 0 for v in vals):
            raise LossError("at least one loss weight must be > 0")


def pixel_loss(y: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over all pixels, channels, and batch."""
    if y.shape != g.shape:
        raise LossError(f"shape mismatch: {tuple(y.shape)} vs {tuple(g.shape)}")
    return (y - g).abs().mean()


def tv_loss(g: torch.Tensor) -> torch.Tensor:
    """Mean over valid pixels of sqrt(dv^2 + dh^2 + eps), where dv/dh are the
    vertical/horizontal forward differences; the last row and column are
    excluded so both differences exist."""
    if g.shape[-2] < 2 or g.shape[-1] < 2:
        raise LossError(f"image must be at least 2x2, got {tuple(g.shape)}")
    dv = g[..., 1:, :-1] - g[..., :-1, :-1]
    dh = g[..., :-1, 1:] - g[..., :-1, :-1]
    return torch.sqrt(dv**2 + dh**2 + TV_EPS).mean()


def _clamped(grid: torch.Tensor) -> torch.Tensor:
    return grid.clamp(PROB_EPS, 1.0 - PROB_EPS)


def adversarial_generator_loss(
    fake_grid: torch.Tensor, saturating: bool = True
) -> torch.Tensor:
    """Generator's adversarial term over the patch grid.

    The saturating form is mean log(1 - D); the non-saturating alternative
    -mean log D has the same fixed points but usable gradients when the
    discriminator wins early, so training defaults to it.
    """
    p = _clamped(fake_grid)
    if saturating:
        return torch.log(1.0 - p).mean()
    return -torch.log(p).mean()


def discriminator_loss(
    real_grid: torch.Tensor, fake_grid: torch.Tensor
) -> torch.Tensor:
    """Negated patch-level value function: minimizing this maximizes
    mean log D(real) + mean log(1 - D(fake))."""
    real = _clamped(real_grid)
    fake = _clamped(fake_grid)
    return -(torch.log(real).mean() + torch.log(1.0 - fake).mean())


@dataclass
class FeatureExtractor:
    """Frozen conv stack used as a perceptual feature space.

    imagenet_norm marks extractors trained on ImageNet statistics: inputs in
    [-1, 1] are remapped to [0, 1] and standardized channel-wise before the
    forward pass. provenance records where the weights came from.
    """

    module: nn.Module
    name: str
    imagenet_norm: bool = False
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.module.eval()
        for p in self.module.parameters():
            p.requires_grad_(False)

    def features(self, img: torch.Tensor) -> torch.Tensor:
        x = img
        if self.imagenet_norm:
            x = (x + 1.0) / 2.0
            mean = torch.tensor(IMAGENET_MEAN, dtype=x.dtype, device=x.device)
            std = torch.tensor(IMAGENET_STD, dtype=x.dtype, device=x.device)
            x = (x - mean.view(1, 3, 1, 1)) / std.view(1, 3, 1, 1)
        return self.module(x)


def feature_loss(
    extractor: FeatureExtractor, y: torch.Tensor, g: torch.Tensor
) -> torch.Tensor:
    """Mean squared difference between the extractor's activations on y and g."""
    if y.shape != g.shape:
        raise LossError(f"shape mismatch: {tuple(y.shape)} vs {tuple(g.shape)}")
    fy = extractor.features(y)
    fg = extractor.features(g)
    return ((fy - fg) ** 2).mean()


def composite_loss(
    weights: LossWeights, parts: dict[str, torch.Tensor]
) -> torch.Tensor:
    """Weighted sum of the four terms; raises naming any non-finite part.

    parts maps 'pixel', 'feature', 'adversarial', 'tv' to scalar tensors.
    Missing parts whose weight is zero may be omitted.
    """
    pairs = [
        ("pixel", weights.pixel),
        ("feature", weights.feature),
        ("adversarial", weights.adversarial),
        ("tv", weights.tv),
    ]
    total = None
    for name, w in pairs:
        if name not in parts:
            if w != 0:
                raise LossError(f"missing loss part '{name}' with nonzero weight {w}")
            continue
        value = parts[name]
        if not torch.isfinite(value).all():
            raise LossError(f"non-finite loss term '{name}': {value}")
        term = w * value
        total = term if total is None else total + term
    if total is None:
        raise LossError("no loss parts supplied")
    return total


# --- extractor builders -----------------------------------------------------


def identity_extractor() -> FeatureExtractor:
    """Feature space = pixel space; feature_loss degenerates to MSE."""
    return FeatureExtractor(nn.Identity(), name="identity")


def conv_stub_extractor(seed: int = 0, channels: int = 8) -> FeatureExtractor:
    """Tiny fixed random 2-layer conv net; a fast deterministic feature space
    for tests and for training runs without a pretrained backbone."""
    gen = torch.Generator().manual_seed(seed)
    stack = nn.Sequential(
        nn.Conv2d(3, channels, 3, padding=1),
        nn.ReLU(),
        nn.Conv2d(channels, channels, 3, padding=1),
        nn.ReLU(),
    )
    with torch.no_grad():
        for m in stack.modules():
            if isinstance(m, nn.Conv2d):
                fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
                std = (2.0 / fan_in) ** 0.5
                m.weight.copy_(torch.empty_like(m.weight).normal_(0.0, std, generator=gen))
                m.bias.zero_()
    return FeatureExtractor(
        stack,
        name=f"conv-stub-{channels}",
        provenance={"source": f"random-init(seed={seed})"},
    )


def _vgg16_prefix() -> nn.Sequential:
    # Conv layers of the 16-layer classifier up to and including the fourth
    # conv's ReLU (the 128-channel block), the tap used for the feature term.
    return nn.Sequential(
        nn.Conv2d(3, 64, 3, padding=1),
        nn.ReLU(),
        nn.Conv2d(64, 64, 3, padding=1),
        nn.ReLU(),
        nn.MaxPool2d(2),
        nn.Conv2d(64, 128, 3, padding=1),
        nn.ReLU(),
        nn.Conv2d(128, 128, 3, padding=1),
        nn.ReLU(),
    )


def vgg16_tap4_extractor(weights_path: str | Path | None = None, seed: int = 0) -> FeatureExtractor:
    """Feature extractor tapping the pretrained classifier after its fourth
    conv ReLU.

    Loads weights from a tensor checkpoint when a path is given. Without one
    it falls back to a seeded random init with the same architecture, which
    still defines a usable (if unpretrained) feature space; the provenance
    field says which you got.
    """
    stack = _vgg16_prefix()
    if weights_path is not None:
        tensors, manifest = ckpt.load_tensors(weights_path)
        state = {k: v for k, v in tensors.items()}
        stack.load_state_dict(state)
        blob = ckpt.blob_path(weights_path).read_bytes()
        provenance = {
            "source": str(weights_path),
            "sha256": hashlib.sha256(blob).hexdigest(),
            "kind": manifest.get("kind", "feature_extractor"),
        }
        return FeatureExtractor(
            stack, name="vgg16-tap4", imagenet_norm=True, provenance=provenance
        )
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in stack.modules():
            if isinstance(m, nn.Conv2d):
                fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
                std = (2.0 / fan_in) ** 0.5
                m.weight.copy_(torch.empty_like(m.weight).normal_(0.0, std, generator=gen))
                m.bias.zero_()
    return FeatureExtractor(
        stack,
        name="vgg16-tap4-random",
        imagenet_norm=False,
        provenance={"source": f"random-init(seed={seed})"},
    )


def export_pretrained_backbone(out_path: str | Path) -> Path:
    """Convert the torchvision-pretrained 16-layer classifier prefix into the
    native checkpoint format, for environments that have it available."""
    try:
        from torchvision import models
    except ImportError as exc:
        raise ckpt.CheckpointError("torchvision is not installed") from exc
    try:
        weights = models.VGG16_Weights.IMAGENET1K_V1
        full = models.vgg16(weights=weights)
    except Exception as exc:
        raise ckpt.CheckpointError(f"pretrained weights unavailable: {exc}") from exc
    stack = _vgg16_prefix()
    src = list(full.features[:9].state_dict().items())
    dst_keys = list(stack.state_dict().keys())
    stack.load_state_dict({k: v for k, (_, v) in zip(dst_keys, src)})
    out_path = Path(out_path)
    ckpt.save_tensors(
        out_path,
        dict(stack.state_dict()),
        kind="feature_extractor",
        config={"architecture": "vgg16-prefix-tap4", "imagenet_norm": True},
        extras={"source": "torchvision vgg16 IMAGENET1K_V1"},
    )
    return out_path
