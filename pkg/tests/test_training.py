from __future__ import annotations

import json

import pytest
import torch

from sketchpaint.checkpoint import CheckpointError
from sketchpaint.dataset import DatasetManifest, load_batch
from sketchpaint.losses import LossWeights
from sketchpaint.training import (
    TrainConfig,
    TrainConfigError,
    TrainDivergedError,
    batch_indices_for_step,
    calibrate,
    discriminator_phase,
    generator_phase,
    init_train_state,
    load_checkpoint,
    load_generator_for_inference,
    save_checkpoint,
    train,
    train_step,
    _to_nchw,
)


def small_config(**overrides) -> TrainConfig:
    base = dict(
        resolution=64,
        depth=4,
        base_filters=4,
        batch_size=2,
        total_steps=2,
        seed=3,
    )
    base.update(overrides)
    return TrainConfig(**base)


def first_batch(manifest_path, config):
    manifest = DatasetManifest.load(manifest_path)
    idx = batch_indices_for_step(0, len(manifest.entries), config.batch_size, config.seed)
    return load_batch(manifest, idx)


def params_snapshot(net) -> list[torch.Tensor]:
    return [p.detach().clone() for p in net.parameters()]


def params_equal(a, b) -> bool:
    return all(torch.equal(x, y) for x, y in zip(a, b))


# --- config ---------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(TrainConfigError):
        small_config(total_steps=0)
    with pytest.raises(TrainConfigError):
        small_config(batch_size=0)
    with pytest.raises(TrainConfigError):
        small_config(learning_rate=0.0)


def test_config_defaults_derive_from_resolution():
    c512 = TrainConfig(resolution=512)
    assert c512.batch_size == 1 and c512.depth == 8
    c64 = TrainConfig(resolution=64)
    assert c64.batch_size == 4 and c64.depth == 6


def test_config_file_round_trip(tmp_path):
    cfg = small_config(weights=LossWeights(pixel=50.0, tv=0.0))
    cfg.save(tmp_path / "c.json")
    loaded = TrainConfig.from_file(tmp_path / "c.json")
    assert loaded == cfg


# --- phase isolation ---------------------------------------------------------------


def test_discriminator_phase_leaves_generator_untouched(tiny_manifest_64):
    cfg = small_config()
    state = init_train_state(cfg)
    batch = first_batch(tiny_manifest_64, cfg)
    x, y = _to_nchw(batch.inputs), _to_nchw(batch.targets)
    g_before = params_snapshot(state.generator)
    d_before = params_snapshot(state.discriminator)
    discriminator_phase(state, x, y)
    assert params_equal(g_before, params_snapshot(state.generator))
    assert not params_equal(d_before, params_snapshot(state.discriminator))


def test_generator_phase_leaves_discriminator_untouched(tiny_manifest_64):
    cfg = small_config()
    state = init_train_state(cfg)
    batch = first_batch(tiny_manifest_64, cfg)
    x, y = _to_nchw(batch.inputs), _to_nchw(batch.targets)
    g_before = params_snapshot(state.generator)
    d_before = params_snapshot(state.discriminator)
    generator_phase(state, x, y)
    assert params_equal(d_before, params_snapshot(state.discriminator))
    assert not params_equal(g_before, params_snapshot(state.generator))


def test_train_step_with_zero_d_steps_freezes_discriminator(tiny_manifest_64):
    cfg = small_config(d_steps_per_g_step=0)
    state = init_train_state(cfg)
    batch = first_batch(tiny_manifest_64, cfg)
    d_before = params_snapshot(state.discriminator)
    m = train_step(state, batch)
    assert params_equal(d_before, params_snapshot(state.discriminator))
    # metrics still report finite discriminator readings
    assert m.disc == m.disc and m.d_real_mean == m.d_real_mean


# --- descent sanity -----------------------------------------------------------------


def test_supervised_descent_on_fixed_batch(tiny_manifest_64):
    """With the adversarial weight zeroed and the discriminator frozen, two
    steps on the same batch strictly decrease the supervised objective."""
    cfg = small_config(
        d_steps_per_g_step=0,
        learning_rate=1e-4,
        weights=LossWeights(pixel=1.0, feature=1.0, adversarial=0.0, tv=1.0),
    )
    state = init_train_state(cfg)
    batch = first_batch(tiny_manifest_64, cfg)

    def supervised(m):
        return m.pixel * 1.0 + m.feature * 1.0 + m.tv * 1.0

    m1 = train_step(state, batch)
    m2 = train_step(state, batch)
    assert supervised(m2) < supervised(m1)


# --- determinism ---------------------------------------------------------------------


def test_same_seed_same_metrics(tiny_manifest_64):
    cfg = small_config(total_steps=3)
    manifest = DatasetManifest.load(tiny_manifest_64)

    def run():
        state = init_train_state(cfg)
        metrics = []
        for s in range(3):
            idx = batch_indices_for_step(s, len(manifest.entries), cfg.batch_size, cfg.seed)
            metrics.append(train_step(state, load_batch(manifest, idx)))
        return metrics

    a, b = run(), run()
    assert a == b


def test_batch_indices_are_deterministic_and_cover_epochs():
    idx_a = [batch_indices_for_step(s, 8, 2, seed=1) for s in range(8)]
    idx_b = [batch_indices_for_step(s, 8, 2, seed=1) for s in range(8)]
    assert idx_a == idx_b
    # one epoch = steps 0..3; every entry appears exactly once
    epoch = sorted(i for s in range(4) for i in idx_a[s])
    assert epoch == list(range(8))
    # different epochs shuffle differently
    assert [i for s in range(4) for i in idx_a[s]] != [
        i for s in range(4, 8) for i in idx_a[s]
    ]


def test_nan_guard_names_term(tiny_manifest_64):
    cfg = small_config()
    state = init_train_state(cfg)
    batch = first_batch(tiny_manifest_64, cfg)
    with torch.no_grad():
        bad = next(iter(state.generator.parameters()))
        bad[0] = float("nan")
    with pytest.raises(TrainDivergedError, match="step 0"):
        train_step(state, batch)


# --- checkpointing --------------------------------------------------------------------


def test_checkpoint_round_trip_bit_exact(tiny_manifest_64, tmp_path):
    cfg = small_config()
    state = init_train_state(cfg)
    train_step(state, first_batch(tiny_manifest_64, cfg))
    path = save_checkpoint(state, tmp_path / "s1.ckpt.json")
    loaded = load_checkpoint(path)
    assert loaded.step == state.step
    for (na, pa), (nb, pb) in zip(
        state.generator.state_dict().items(), loaded.generator.state_dict().items()
    ):
        assert na == nb and torch.equal(pa, pb)
    for pa, pb in zip(
        state.discriminator.state_dict().values(),
        loaded.discriminator.state_dict().values(),
    ):
        assert torch.equal(pa, pb)
    # optimizer moments restored exactly
    sa = state.opt_g.state_dict()["state"]
    sb = loaded.opt_g.state_dict()["state"]
    assert set(sa) == set(sb)
    for k in sa:
        assert torch.equal(sa[k]["exp_avg"], sb[k]["exp_avg"])
        assert torch.equal(sa[k]["exp_avg_sq"], sb[k]["exp_avg_sq"])
        assert int(sa[k]["step"]) == int(sb[k]["step"])


def test_resume_reproduces_uninterrupted_run(tiny_manifest_64, tmp_path):
    manifest = DatasetManifest.load(tiny_manifest_64)

    def steps(state, start, stop):
        out = []
        for s in range(start, stop):
            idx = batch_indices_for_step(s, len(manifest.entries), state.config.batch_size, state.config.seed)
            out.append(train_step(state, load_batch(manifest, idx)))
        return out

    cfg = small_config(total_steps=5)
    full_state = init_train_state(cfg)
    full = steps(full_state, 0, 5)

    part_state = init_train_state(cfg)
    steps(part_state, 0, 2)
    ckpt_path = save_checkpoint(part_state, tmp_path / "k.ckpt.json")

    resumed = load_checkpoint(ckpt_path)
    assert resumed.step == 2
    tail = steps(resumed, 2, 5)
    assert tail == full[2:]


def test_checkpoint_architecture_mismatch_refused(tiny_manifest_64, tmp_path):
    cfg = small_config()
    state = init_train_state(cfg)
    path = save_checkpoint(state, tmp_path / "a.ckpt.json")
    other = small_config(base_filters=8)
    with pytest.raises(CheckpointError, match="mismatch"):
        load_checkpoint(path, expected_config=other)


def test_checkpoint_truncation_refused(tmp_path):
    cfg = small_config()
    state = init_train_state(cfg)
    path = save_checkpoint(state, tmp_path / "t.ckpt.json")
    blob = path.with_suffix(".bin")
    blob.write_bytes(blob.read_bytes()[:100])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_wrong_kind_refused(tmp_path):
    from sketchpaint.checkpoint import save_tensors

    save_tensors(tmp_path / "x.json", {"w": torch.ones(2)}, kind="other", config={})
    with pytest.raises(CheckpointError, match="train_state"):
        load_checkpoint(tmp_path / "x.json")
    with pytest.raises(CheckpointError):
        load_generator_for_inference(tmp_path / "x.json")


# --- train() end to end -----------------------------------------------------------------


def test_train_writes_metrics_and_checkpoints(tiny_manifest_64, tmp_path):
    cfg = small_config(
        total_steps=3,
        checkpoint_every=2,
        manifest=str(tiny_manifest_64),
        out_dir=str(tmp_path / "run"),
    )
    final, metrics = train(cfg)
    assert final.exists()
    assert len(metrics) == 3
    lines = (tmp_path / "run" / "metrics.jsonl").read_text().splitlines()
    assert len(lines) == 3
    rec = json.loads(lines[0])
    assert set(rec) == {"step", "L_p", "L_f", "L_G", "L_tv", "L_D", "d_real_mean", "d_fake_mean"}
    assert all(v == v for v in rec.values())  # finite metrics
    assert (tmp_path / "run" / "step0000002.ckpt.json").exists()


def test_train_resume_path(tiny_manifest_64, tmp_path):
    cfg_a = small_config(
        total_steps=4, manifest=str(tiny_manifest_64), out_dir=str(tmp_path / "a"),
        checkpoint_every=100,
    )
    _, full = train(cfg_a)

    cfg_b1 = small_config(
        total_steps=2, manifest=str(tiny_manifest_64), out_dir=str(tmp_path / "b"),
        checkpoint_every=100,
    )
    final_b1, _ = train(cfg_b1)
    cfg_b2 = small_config(
        total_steps=4, manifest=str(tiny_manifest_64), out_dir=str(tmp_path / "b2"),
        checkpoint_every=100,
    )
    _, tail = train(cfg_b2, resume_from=final_b1)
    assert tail == full[2:]


def test_train_requires_manifest():
    with pytest.raises(TrainConfigError):
        train(small_config(manifest=None))


def test_calibrate_reports_all_terms(tiny_manifest_64):
    cfg = small_config(manifest=str(tiny_manifest_64))
    report = calibrate(cfg)
    assert set(report) == {"pixel", "feature", "adversarial", "tv"}
    for term in report.values():
        assert term["weighted"] == pytest.approx(term["raw"] * term["weight"])
