"""Alternating adversarial training with reproducible randomness.

Every random draw (init, batch order, noise planes) is derived from the
config seed plus a stream tag and the step index, so a run is a pure
function of its config on one device, and resuming from a checkpoint at
step k replays exactly what the uninterrupted run would have done.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import checkpoint as ckpt
from .dataset import Batch, DatasetManifest, load_batch
from .losses import (
    FeatureExtractor,
    LossWeights,
    adversarial_generator_loss,
    composite_loss,
    conv_stub_extractor,
    discriminator_loss,
    feature_loss,
    pixel_loss,
    tv_loss,
    vgg16_tap4_extractor,
)
from .networks import (
    DiscriminatorConfig,
    Generator,
    GeneratorConfig,
    PatchDiscriminator,
    build_discriminator,
    build_generator,
    config_hash,
)

log = logging.getLogger(__name__)


class TrainConfigError(ValueError):
    """Raised for invalid or inconsistent training configuration."""


class TrainDivergedError(RuntimeError):
    """Raised when a loss term goes non-finite; message names the term."""


def stable_seed(*parts) -> int:
    """Deterministic 63-bit stream seed from a tag tuple."""
    text = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass
class TrainConfig:
    resolution: int = 512
    batch_size: int | None = None  # derived: 1 at >= 256 px, else 4
    total_steps: int = 1000
    learning_rate: float = 2e-4
    adam_betas: tuple[float, float] = (0.5, 0.999)
    weights: LossWeights = field(default_factory=LossWeights)
    d_steps_per_g_step: int = 1
    seed: int = 0
    checkpoint_every: int = 500
    manifest: str | None = None
    out_dir: str = "runs/default"
    depth: int | None = None  # derived: min(8, log2(resolution))
    base_filters: int = 64
    noise_stddev: float = 0.1
    saturating_adversarial: bool = False
    feature_extractor_path: str | None = None

    def __post_init__(self) -> None:
        if self.batch_size is None:
            self.batch_size = 1 if self.resolution >= 256 else 4
        if self.depth is None:
            self.depth = min(8, int(np.log2(self.resolution)))
        if self.batch_size < 1:
            raise TrainConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.total_steps < 1:
            raise TrainConfigError(f"total_steps must be >= 1, got {self.total_steps}")
        if self.learning_rate <= 0:
            raise TrainConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.d_steps_per_g_step < 0:
            raise TrainConfigError(
                f"d_steps_per_g_step must be >= 0, got {self.d_steps_per_g_step}"
            )

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(
            resolution=self.resolution,
            depth=self.depth,
            base_filters=self.base_filters,
            noise_stddev=self.noise_stddev,
        )

    def discriminator_config(self) -> DiscriminatorConfig:
        return DiscriminatorConfig(
            resolution=self.resolution, base_filters=self.base_filters
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = asdict(self.weights)
        d["adam_betas"] = list(self.adam_betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if isinstance(d.get("weights"), dict):
            d["weights"] = LossWeights(**d["weights"])
        if "adam_betas" in d:
            d["adam_betas"] = tuple(d["adam_betas"])
        return cls(**d)

    @classmethod
    def from_file(cls, path: str | Path) -> "TrainConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (json.JSONDecodeError, TypeError) as exc:
            raise TrainConfigError(f"bad config file {path}: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )


@dataclass
class StepMetrics:
    step: int
    pixel: float
    feature: float
    adversarial: float
    tv: float
    disc: float
    d_real_mean: float
    d_fake_mean: float

    def to_log_line(self) -> str:
        return json.dumps(
            {
                "step": self.step,
                "L_p": self.pixel,
                "L_f": self.feature,
                "L_G": self.adversarial,
                "L_tv": self.tv,
                "L_D": self.disc,
                "d_real_mean": self.d_real_mean,
                "d_fake_mean": self.d_fake_mean,
            }
        )


@dataclass
class TrainState:
    generator: Generator
    discriminator: PatchDiscriminator
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    extractor: FeatureExtractor
    config: TrainConfig
    step: int = 0


def build_extractor(config: TrainConfig) -> FeatureExtractor:
    if config.feature_extractor_path:
        return vgg16_tap4_extractor(config.feature_extractor_path)
    # No pretrained backbone configured: a small fixed random conv stack
    # still gives a deterministic differentiable feature space.
    return conv_stub_extractor(seed=stable_seed("extractor", config.seed))


def init_train_state(config: TrainConfig) -> TrainState:
    gen = build_generator(config.generator_config(), seed=stable_seed("gen", config.seed))
    disc = build_discriminator(
        config.discriminator_config(), seed=stable_seed("disc", config.seed)
    )
    opt_g = torch.optim.Adam(
        gen.parameters(), lr=config.learning_rate, betas=config.adam_betas
    )
    opt_d = torch.optim.Adam(
        disc.parameters(), lr=config.learning_rate, betas=config.adam_betas
    )
    return TrainState(
        generator=gen,
        discriminator=disc,
        opt_g=opt_g,
        opt_d=opt_d,
        extractor=build_extractor(config),
        config=config,
    )


def _to_nchw(a: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(a.transpose(0, 3, 1, 2)))


def _noise(config: TrainConfig, batch: int, *tag) -> torch.Tensor:
    gen = torch.Generator().manual_seed(stable_seed("noise", config.seed, *tag))
    return (
        torch.randn(batch, 1, config.resolution, config.resolution, generator=gen)
        * config.noise_stddev
    )


def _check_finite(name: str, value: torch.Tensor, step: int) -> None:
    if not torch.isfinite(value).all():
        raise TrainDivergedError(
            f"loss term '{name}' is non-finite at step {step}: {float(value.detach()):.6g}"
        )


def discriminator_phase(
    state: TrainState, x: torch.Tensor, y: torch.Tensor
) -> tuple[float, float, float]:
    """d_steps_per_g_step discriminator updates on (real pair, detached fake).

    Only discriminator parameters change: the fake is generated under
    no_grad, so no gradient reaches the generator.
    """
    cfg = state.config
    l_d = d_real_mean = d_fake_mean = float("nan")
    for t in range(cfg.d_steps_per_g_step):
        with torch.no_grad():
            z = _noise(cfg, x.shape[0], "d", state.step, t)
            fake = state.generator(torch.cat([x, z], dim=1))
        state.opt_d.zero_grad(set_to_none=True)
        real_grid = state.discriminator(x, y)
        fake_grid = state.discriminator(x, fake)
        loss_d = discriminator_loss(real_grid, fake_grid)
        _check_finite("discriminator", loss_d, state.step)
        loss_d.backward()
        state.opt_d.step()
        l_d = float(loss_d.detach())
        d_real_mean = float(real_grid.detach().mean())
        d_fake_mean = float(fake_grid.detach().mean())
    return l_d, d_real_mean, d_fake_mean


def generator_phase(
    state: TrainState, x: torch.Tensor, y: torch.Tensor
) -> dict[str, torch.Tensor]:
    """One generator update minimizing the composite objective with a fresh
    noise plane. The adversarial term backpropagates through the
    discriminator's graph, but only generator parameters are stepped; stale
    discriminator gradients are cleared before its next update."""
    cfg = state.config
    z = _noise(cfg, x.shape[0], "g", state.step)
    state.opt_g.zero_grad(set_to_none=True)
    state.discriminator.zero_grad(set_to_none=True)
    g_out = state.generator(torch.cat([x, z], dim=1))
    parts = {
        "pixel": pixel_loss(y, g_out),
        "feature": feature_loss(state.extractor, y, g_out),
        "adversarial": adversarial_generator_loss(
            state.discriminator(x, g_out), saturating=cfg.saturating_adversarial
        ),
        "tv": tv_loss(g_out),
    }
    for name, value in parts.items():
        _check_finite(name, value, state.step)
    loss_g = composite_loss(cfg.weights, parts)
    loss_g.backward()
    state.opt_g.step()
    parts["output"] = g_out.detach()
    return parts


def train_step(state: TrainState, batch: Batch) -> StepMetrics:
    """One alternating update: d_steps_per_g_step discriminator steps on a
    detached fake, then one generator step on the composite objective."""
    cfg = state.config
    x = _to_nchw(batch.inputs)
    y = _to_nchw(batch.targets)
    if x.shape[-1] != cfg.resolution:
        raise TrainConfigError(
            f"batch resolution {x.shape[-1]} != config resolution {cfg.resolution}"
        )
    state.generator.train(True)
    state.discriminator.train(True)

    l_d, d_real_mean, d_fake_mean = discriminator_phase(state, x, y)
    parts = generator_phase(state, x, y)

    if cfg.d_steps_per_g_step == 0:
        with torch.no_grad():
            real_grid = state.discriminator(x, y)
            fake_grid = state.discriminator(x, parts["output"])
            l_d = float(discriminator_loss(real_grid, fake_grid))
            d_real_mean = float(real_grid.detach().mean())
            d_fake_mean = float(fake_grid.detach().mean())

    state.step += 1
    return StepMetrics(
        step=state.step,
        pixel=float(parts["pixel"].detach()),
        feature=float(parts["feature"].detach()),
        adversarial=float(parts["adversarial"].detach()),
        tv=float(parts["tv"].detach()),
        disc=l_d,
        d_real_mean=d_real_mean,
        d_fake_mean=d_fake_mean,
    )


def batch_indices_for_step(
    step: int, n_entries: int, batch_size: int, seed: int
) -> list[int]:
    """Epoch-shuffled batch membership as a pure function of (seed, step)."""
    steps_per_epoch = max(1, n_entries // batch_size)
    epoch = step // steps_per_epoch
    pos = step % steps_per_epoch
    perm = np.random.default_rng(stable_seed("order", seed, epoch)).permutation(n_entries)
    idx = [int(perm[(pos * batch_size + i) % n_entries]) for i in range(batch_size)]
    return idx


# --- checkpointing -----------------------------------------------------------


def _opt_tensors(opt: torch.optim.Adam, names: list[str], prefix: str) -> tuple[dict, dict]:
    tensors: dict[str, torch.Tensor] = {}
    steps: dict[str, int] = {}
    for idx, st in opt.state_dict()["state"].items():
        name = names[int(idx)]
        tensors[f"{prefix}.{name}.exp_avg"] = st["exp_avg"]
        tensors[f"{prefix}.{name}.exp_avg_sq"] = st["exp_avg_sq"]
        steps[name] = int(st["step"])
    return tensors, steps


def save_checkpoint(state: TrainState, path: str | Path) -> Path:
    """Serialize networks, optimizer moments, and the step counter."""
    path = Path(path)
    tensors: dict[str, torch.Tensor] = {}
    for name, p in state.generator.state_dict().items():
        tensors[f"g.{name}"] = p
    for name, p in state.discriminator.state_dict().items():
        tensors[f"d.{name}"] = p
    g_names = [n for n, _ in state.generator.named_parameters()]
    d_names = [n for n, _ in state.discriminator.named_parameters()]
    opt_g_tensors, opt_g_steps = _opt_tensors(state.opt_g, g_names, "opt_g")
    opt_d_tensors, opt_d_steps = _opt_tensors(state.opt_d, d_names, "opt_d")
    tensors.update(opt_g_tensors)
    tensors.update(opt_d_tensors)
    extras = {
        "step": state.step,
        "opt_g_steps": opt_g_steps,
        "opt_d_steps": opt_d_steps,
        "generator_hash": state.generator.config_hash,
        "discriminator_hash": state.discriminator.config_hash,
        "extractor": {
            "name": state.extractor.name,
            "provenance": state.extractor.provenance,
        },
    }
    ckpt.save_tensors(
        path,
        tensors,
        kind="train_state",
        config=state.config.to_dict(),
        extras=extras,
    )
    return path


def _restore_opt(
    opt: torch.optim.Adam,
    names: list[str],
    tensors: dict[str, torch.Tensor],
    steps: dict[str, int],
    prefix: str,
) -> None:
    sd = opt.state_dict()
    opt_state = {}
    for idx, name in enumerate(names):
        avg_key = f"{prefix}.{name}.exp_avg"
        if avg_key not in tensors:
            continue
        opt_state[idx] = {
            "step": torch.tensor(float(steps[name])),
            "exp_avg": tensors[avg_key],
            "exp_avg_sq": tensors[f"{prefix}.{name}.exp_avg_sq"],
        }
    sd["state"] = opt_state
    opt.load_state_dict(sd)


def load_checkpoint(
    path: str | Path, expected_config: TrainConfig | None = None
) -> TrainState:
    """Rebuild a TrainState; refuses kind or architecture-hash mismatches."""
    tensors, manifest = ckpt.load_tensors(path)
    if manifest.get("kind") != "train_state":
        raise ckpt.CheckpointError(
            f"{path} holds '{manifest.get('kind')}', expected 'train_state'"
        )
    config = TrainConfig.from_dict(manifest["config"])
    if expected_config is not None:
        want = config_hash(expected_config.generator_config())
        got = manifest["extras"]["generator_hash"]
        if want != got:
            raise ckpt.CheckpointError(
                f"architecture mismatch: checkpoint generator hash {got}, "
                f"requested config hash {want}"
            )
        config = expected_config
    state = init_train_state(config)
    extras = manifest["extras"]
    if extras["generator_hash"] != state.generator.config_hash:
        raise ckpt.CheckpointError(
            f"architecture mismatch: checkpoint generator hash "
            f"{extras['generator_hash']}, rebuilt {state.generator.config_hash}"
        )
    g_state = {k[2:]: v for k, v in tensors.items() if k.startswith("g.")}
    d_state = {k[2:]: v for k, v in tensors.items() if k.startswith("d.")}
    state.generator.load_state_dict(g_state)
    state.discriminator.load_state_dict(d_state)
    g_names = [n for n, _ in state.generator.named_parameters()]
    d_names = [n for n, _ in state.discriminator.named_parameters()]
    _restore_opt(state.opt_g, g_names, tensors, extras["opt_g_steps"], "opt_g")
    _restore_opt(state.opt_d, d_names, tensors, extras["opt_d_steps"], "opt_d")
    state.step = int(extras["step"])
    return state


def load_generator_for_inference(path: str | Path) -> tuple[Generator, TrainConfig]:
    """Generator-only view of a training checkpoint, in eval mode."""
    tensors, manifest = ckpt.load_tensors(path)
    if manifest.get("kind") != "train_state":
        raise ckpt.CheckpointError(
            f"{path} holds '{manifest.get('kind')}', expected 'train_state'"
        )
    config = TrainConfig.from_dict(manifest["config"])
    gen = Generator(config.generator_config())
    if manifest["extras"]["generator_hash"] != gen.config_hash:
        raise ckpt.CheckpointError(
            "architecture mismatch between checkpoint and rebuilt generator"
        )
    gen.load_state_dict({k[2:]: v for k, v in tensors.items() if k.startswith("g.")})
    gen.eval()
    return gen, config


def train(
    config: TrainConfig,
    resume_from: str | Path | None = None,
) -> tuple[Path, list[StepMetrics]]:
    """Run total_steps updates over the configured manifest.

    Writes a metrics line per step to metrics.jsonl, a checkpoint every
    checkpoint_every steps, and final.ckpt.json at the end. Returns the
    final checkpoint path and the collected metrics.
    """
    if not config.manifest:
        raise TrainConfigError("config.manifest is required for train()")
    manifest = DatasetManifest.load(config.manifest)
    if not manifest.entries:
        raise TrainConfigError(f"dataset manifest {config.manifest} is empty")

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config.save(out_dir / "config.json")

    state = load_checkpoint(resume_from, config) if resume_from else init_train_state(config)

    metrics: list[StepMetrics] = []
    log_path = out_dir / "metrics.jsonl"
    with open(log_path, "a", encoding="utf-8") as log_file:
        try:
            while state.step < config.total_steps:
                idx = batch_indices_for_step(
                    state.step, len(manifest.entries), config.batch_size, config.seed
                )
                batch = load_batch(manifest, idx)
                m = train_step(state, batch)
                metrics.append(m)
                log_file.write(m.to_log_line() + "\n")
                log_file.flush()
                if state.step % config.checkpoint_every == 0:
                    save_checkpoint(state, out_dir / f"step{state.step:07d}.ckpt.json")
        except (TrainDivergedError, OSError):
            log_file.flush()
            raise
    final = save_checkpoint(state, out_dir / "final.ckpt.json")
    return final, metrics


def calibrate(config: TrainConfig) -> dict:
    """Per-term loss magnitudes on one warm-up batch, raw and weighted,
    for rebalancing the composite weights."""
    if not config.manifest:
        raise TrainConfigError("config.manifest is required for calibrate()")
    manifest = DatasetManifest.load(config.manifest)
    state = init_train_state(config)
    idx = batch_indices_for_step(0, len(manifest.entries), config.batch_size, config.seed)
    batch = load_batch(manifest, idx)
    x = _to_nchw(batch.inputs)
    y = _to_nchw(batch.targets)
    z = _noise(config, x.shape[0], "calibrate")
    with torch.no_grad():
        g_out = state.generator(torch.cat([x, z], dim=1))
        grid = state.discriminator(x, g_out)
        parts = {
            "pixel": pixel_loss(y, g_out),
            "feature": feature_loss(state.extractor, y, g_out),
            "adversarial": adversarial_generator_loss(
                grid, saturating=config.saturating_adversarial
            ),
            "tv": tv_loss(g_out),
        }
    w = config.weights
    weights = {"pixel": w.pixel, "feature": w.feature, "adversarial": w.adversarial, "tv": w.tv}
    return {
        name: {
            "raw": float(v),
            "weight": weights[name],
            "weighted": float(v) * weights[name],
        }
        for name, v in parts.items()
    }
