"""Generator and discriminator architectures.

The generator is a U-Net: stride-2 conv encoder stages mirrored by stride-2
transposed-conv decoder stages, with each decoder stage consuming the
concatenation of the previous decoder output and the mirror encoder
activation. Output goes through tanh, so values live in (-1, 1).

The discriminator scores local patches of a (condition, image) pair: four
stride-2 convs, one stride-1 conv, and a 1-channel sigmoid head, yielding a
30x30 probability grid on 512x512 inputs with a ~142 px receptive field.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import torch
from torch import nn


class ConfigError(ValueError):
    """Raised for architecture configs the code cannot realize."""


class InferenceError(ValueError):
    """Raised for inputs that do not match the built architecture."""


@dataclass(frozen=True)
class GeneratorConfig:
    resolution: int = 512
    input_channels: int = 4  # 3 hint channels + 1 noise plane
    output_channels: int = 3
    depth: int = 8
    base_filters: int = 64
    noise_stddev: float = 0.1

    def __post_init__(self) -> None:
        if self.resolution < 2 or self.resolution % 2 != 0:
            raise ConfigError(f"resolution must be a positive even size, got {self.resolution}")
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if self.resolution % (2**self.depth) != 0:
            raise ConfigError(
                f"resolution {self.resolution} is not divisible by 2^depth={2**self.depth}"
            )
        if self.base_filters < 1:
            raise ConfigError(f"base_filters must be >= 1, got {self.base_filters}")

    @property
    def bottleneck_size(self) -> int:
        return self.resolution // (2**self.depth)

    def encoder_filters(self) -> list[int]:
        return [min(self.base_filters * 2**i, self.base_filters * 8) for i in range(self.depth)]


@dataclass(frozen=True)
class DiscriminatorConfig:
    resolution: int = 512
    condition_channels: int = 3
    image_channels: int = 3
    base_filters: int = 64

    def __post_init__(self) -> None:
        if self.grid_size < 1:
            raise ConfigError(
                f"resolution {self.resolution} too small for a patch grid "
                f"(needs >= 48 px)"
            )

    @property
    def grid_size(self) -> int:
        # Four stride-2 convs then two stride-1 k4p1 convs: R/16 - 2.
        return self.resolution // 16 - 2

    def layer_filters(self) -> list[int]:
        b = self.base_filters
        return [b, b * 2, b * 4, b * 8, b * 8]


def config_hash(config) -> str:
    """Stable digest of an architecture config; guards checkpoint loading."""
    payload = json.dumps(
        {"type": type(config).__name__, **asdict(config)}, sort_keys=True
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


class _EncoderStage(nn.Module):
    def __init__(self, c_in: int, c_out: int, norm: bool):
        super().__init__()
        self.conv = nn.Conv2d(c_in, c_out, 4, stride=2, padding=1, bias=not norm)
        self.norm = nn.InstanceNorm2d(c_out, affine=True) if norm else None
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x):
        x = self.conv(x)
        if self.norm is not None:
            x = self.norm(x)
        return self.act(x)


class _DecoderStage(nn.Module):
    def __init__(self, c_in: int, c_out: int, norm: bool, final: bool):
        super().__init__()
        self.deconv = nn.ConvTranspose2d(c_in, c_out, 4, stride=2, padding=1, bias=not norm)
        self.norm = nn.InstanceNorm2d(c_out, affine=True) if norm else None
        self.act = nn.Tanh() if final else nn.ReLU()

    def forward(self, x):
        x = self.deconv(x)
        if self.norm is not None:
            x = self.norm(x)
        return self.act(x)


class Generator(nn.Module):
    """U-Net over a 4-channel input (3 hint channels + noise plane).

    No norm on the first encoder stage (keeps raw intensity statistics), the
    bottleneck (instance stats are degenerate at 1x1 or 2x2), or the output
    layer.
    """

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        self.config_hash = config_hash(config)
        filters = config.encoder_filters()
        d = config.depth

        encoder = []
        c_in = config.input_channels
        for i, c_out in enumerate(filters):
            encoder.append(_EncoderStage(c_in, c_out, norm=0 < i < d - 1))
            c_in = c_out
        self.encoder = nn.ModuleList(encoder)

        decoder = []
        c_prev = filters[-1]
        for j in range(d - 1):
            c_out = filters[d - 2 - j]  # mirror encoder stage's width
            c_in = c_prev if j == 0 else c_prev + filters[d - 1 - j]
            decoder.append(_DecoderStage(c_in, c_out, norm=True, final=False))
            c_prev = c_out
        c_in = (c_prev + filters[0]) if d > 1 else c_prev
        decoder.append(_DecoderStage(c_in, config.output_channels, norm=False, final=True))
        self.decoder = nn.ModuleList(decoder)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != self.config.input_channels:
            raise InferenceError(
                f"expected (N,{self.config.input_channels},H,W) input, got {tuple(x.shape)}"
            )
        if x.shape[2] != self.config.resolution or x.shape[3] != self.config.resolution:
            raise InferenceError(
                f"expected {self.config.resolution}x{self.config.resolution} input, "
                f"got {x.shape[2]}x{x.shape[3]}"
            )
        skips = []
        for stage in self.encoder:
            x = stage(x)
            skips.append(x)
        y = skips[-1]
        for j, stage in enumerate(self.decoder):
            if j > 0:
                y = torch.cat([y, skips[len(skips) - 1 - j]], dim=1)
            y = stage(y)
        return y


class PatchDiscriminator(nn.Module):
    """Patch scorer over channel-concatenated (condition, image) pairs."""

    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.config = config
        self.config_hash = config_hash(config)
        f = config.layer_filters()
        c_in = config.condition_channels + config.image_channels
        layers: list[nn.Module] = []
        strides = [2, 2, 2, 2, 1]
        for i, (c_out, s) in enumerate(zip(f, strides)):
            norm = i > 0
            layers.append(nn.Conv2d(c_in, c_out, 4, stride=s, padding=1, bias=not norm))
            if norm:
                layers.append(nn.InstanceNorm2d(c_out, affine=True))
            layers.append(nn.LeakyReLU(0.2))
            c_in = c_out
        layers.append(nn.Conv2d(c_in, 1, 4, stride=1, padding=1, bias=True))
        layers.append(nn.Sigmoid())
        self.body = nn.Sequential(*layers)

    def forward(self, condition: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
        if condition.shape[-2:] != image.shape[-2:]:
            raise InferenceError(
                f"condition {tuple(condition.shape)} and image {tuple(image.shape)} "
                "spatial sizes differ"
            )
        if condition.shape[-1] != self.config.resolution:
            raise InferenceError(
                f"expected {self.config.resolution} px inputs, got {condition.shape[-1]}"
            )
        return self.body(torch.cat([condition, image], dim=1))[:, 0]


def _seeded_init(module: nn.Module, seed: int) -> None:
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
                m.weight.copy_(torch.empty_like(m.weight).normal_(0.0, 0.02, generator=gen))
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, nn.InstanceNorm2d) and m.affine:
                m.weight.fill_(1.0)
                m.bias.zero_()


def build_generator(config: GeneratorConfig, seed: int = 0) -> Generator:
    """Construct a generator with Gaussian(0, 0.02) conv weights from the seed;
    norm gains start at 1 and all biases at 0."""
    net = Generator(config)
    _seeded_init(net, seed)
    return net


def build_discriminator(config: DiscriminatorConfig, seed: int = 0) -> PatchDiscriminator:
    net = PatchDiscriminator(config)
    _seeded_init(net, seed)
    return net


def make_noise_plane(
    resolution: int,
    stddev: float,
    seed: int | None = None,
    batch: int = 1,
) -> torch.Tensor:
    """One noise channel per sample: N(0, stddev^2) when seeded, zeros when
    seed is None (deterministic inference)."""
    if seed is None or stddev == 0:
        return torch.zeros(batch, 1, resolution, resolution)
    gen = torch.Generator().manual_seed(seed)
    return torch.randn(batch, 1, resolution, resolution, generator=gen) * stddev


def generator_forward(
    net: Generator, x: torch.Tensor, train_mode: bool = False
) -> torch.Tensor:
    """Forward pass in the requested mode; pure in (params, input)."""
    net.train(train_mode)
    if train_mode:
        return net(x)
    with torch.no_grad():
        return net(x)


def discriminator_forward(
    net: PatchDiscriminator,
    condition: torch.Tensor,
    image: torch.Tensor,
    train_mode: bool = False,
) -> torch.Tensor:
    net.train(train_mode)
    if train_mode:
        return net(condition, image)
    with torch.no_grad():
        return net(condition, image)


def discriminator_receptive_field(config: DiscriminatorConfig) -> int:
    """Input pixels seen by one output cell, via the standard recurrence
    r <- r + (k-1) * j, j <- j * s over the conv stack."""
    r, j = 1, 1
    for kernel, stride in [(4, 2), (4, 2), (4, 2), (4, 2), (4, 1), (4, 1)]:
        r += (kernel - 1) * j
        j *= stride
    return r


def parameter_count(net: nn.Module) -> int:
    return sum(p.numel() for p in net.parameters())


def assert_finite_params(net: nn.Module, context: str = "") -> None:
    for name, p in net.named_parameters():
        if not torch.isfinite(p).all():
            raise InferenceError(f"non-finite parameter {name} {context}".strip())
