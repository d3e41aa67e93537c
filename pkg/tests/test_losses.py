from __future__ import annotations

import math

import numpy as np
import pytest
import torch

from sketchpaint.losses import (
    LossError,
    LossWeights,
    adversarial_generator_loss,
    composite_loss,
    conv_stub_extractor,
    discriminator_loss,
    feature_loss,
    identity_extractor,
    pixel_loss,
    tv_loss,
    vgg16_tap4_extractor,
)

TV_EPS = 1e-8


# --- scalar loop oracles -----------------------------------------------------


def oracle_pixel(y: np.ndarray, g: np.ndarray) -> float:
    total = 0.0
    for a, b in zip(y.flat, g.flat):
        total += abs(float(a) - float(b))
    return total / y.size


def oracle_tv(g: np.ndarray) -> float:
    total = 0.0
    count = 0
    for img in g.reshape(-1, *g.shape[-2:]):
        h, w = img.shape
        for i in range(h - 1):
            for j in range(w - 1):
                dv = float(img[i + 1, j]) - float(img[i, j])
                dh = float(img[i, j + 1]) - float(img[i, j])
                total += math.sqrt(dv * dv + dh * dh + TV_EPS)
                count += 1
    return total / count


def oracle_gen_adv(grid: np.ndarray, saturating: bool = True) -> float:
    total = 0.0
    for p in grid.flat:
        p = min(max(float(p), 1e-7), 1 - 1e-7)
        total += math.log(1.0 - p) if saturating else -math.log(p)
    return total / grid.size


def oracle_disc(real: np.ndarray, fake: np.ndarray) -> float:
    t_real = sum(math.log(min(max(float(p), 1e-7), 1 - 1e-7)) for p in real.flat)
    t_fake = sum(math.log(1 - min(max(float(p), 1e-7), 1 - 1e-7)) for p in fake.flat)
    return -(t_real / real.size + t_fake / fake.size)


def finite_difference_grad(fn, x: torch.Tensor, h: float = 1e-3) -> torch.Tensor:
    grad = torch.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = float(flat[i])
        flat[i] = orig + h
        hi = float(fn(x))
        flat[i] = orig - h
        lo = float(fn(x))
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * h)
    return grad


def assert_grad_matches_fd(fn, x: torch.Tensor, rel: float = 1e-3):
    x = x.clone().requires_grad_(True)
    fn(x).backward()
    analytic = x.grad.clone()
    fd = finite_difference_grad(fn, x.detach().clone())
    denom = fd.abs().max().clamp_min(1e-8)
    assert float((analytic - fd).abs().max() / denom) <= rel


# --- pixel loss ----------------------------------------------------------------


def test_pixel_identity_is_zero():
    y = torch.rand(2, 3, 4, 4)
    assert float(pixel_loss(y, y)) == 0.0


def test_pixel_constant_difference():
    y = torch.ones(1, 3, 4, 4)
    g = -torch.ones(1, 3, 4, 4)
    assert float(pixel_loss(y, g)) == pytest.approx(2.0)


def test_pixel_matches_oracle():
    rng = np.random.default_rng(0)
    y = rng.uniform(-1, 1, (2, 3, 4, 4))
    g = rng.uniform(-1, 1, (2, 3, 4, 4))
    got = float(pixel_loss(torch.from_numpy(y), torch.from_numpy(g)))
    assert got == pytest.approx(oracle_pixel(y, g), abs=1e-6)


def test_pixel_symmetry_and_shape_error():
    y, g = torch.rand(1, 3, 4, 4), torch.rand(1, 3, 4, 4)
    assert float(pixel_loss(y, g)) == pytest.approx(float(pixel_loss(g, y)))
    with pytest.raises(LossError):
        pixel_loss(torch.rand(1, 3, 4, 4), torch.rand(1, 3, 5, 5))


def test_pixel_gradient_matches_finite_differences():
    torch.manual_seed(1)
    y = (torch.rand(3, 4, 4, dtype=torch.float64) * 2 - 1)
    g0 = torch.rand(3, 4, 4, dtype=torch.float64) * 2 - 1
    assert_grad_matches_fd(lambda g: pixel_loss(y, g), g0)


# --- tv loss ----------------------------------------------------------------------


def test_tv_constant_is_at_most_sqrt_eps():
    g = torch.full((1, 3, 8, 8), 0.3)
    assert float(tv_loss(g)) <= 1e-4


def test_tv_matches_oracle_on_random():
    rng = np.random.default_rng(2)
    g = rng.uniform(-1, 1, (2, 3, 4, 4))
    assert float(tv_loss(torch.from_numpy(g))) == pytest.approx(oracle_tv(g), abs=1e-6)


def test_tv_vertical_step_matches_oracle():
    g = np.zeros((1, 1, 6, 6))
    g[..., :, 3:] = 1.0  # one vertical step
    got = float(tv_loss(torch.from_numpy(g)))
    assert got == pytest.approx(oracle_tv(g), abs=1e-9)
    # direct expectation: 5 valid rows x 1 step column contribute 1.0 each
    valid = 5 * 5
    expected = (5 * 1.0 + (valid - 5) * math.sqrt(TV_EPS)) / valid
    assert got == pytest.approx(expected, abs=1e-6)


def test_tv_invariant_under_global_shift():
    g = torch.rand(1, 3, 5, 5, dtype=torch.float64)
    assert float(tv_loss(g)) == pytest.approx(float(tv_loss(g + 0.37)), abs=1e-12)


def test_tv_not_symmetric_claim_is_vacuous_but_rejects_small_images():
    with pytest.raises(LossError):
        tv_loss(torch.rand(1, 3, 1, 5))


def test_tv_gradient_matches_finite_differences():
    torch.manual_seed(3)
    g0 = torch.rand(3, 4, 4, dtype=torch.float64) * 2 - 1
    assert_grad_matches_fd(lambda g: tv_loss(g), g0)


# --- adversarial losses --------------------------------------------------------------


def test_gen_adv_uniform_half():
    grid = torch.full((1, 3, 3), 0.5)
    assert float(adversarial_generator_loss(grid)) == pytest.approx(math.log(0.5), abs=1e-6)
    assert float(
        adversarial_generator_loss(grid, saturating=False)
    ) == pytest.approx(-math.log(0.5), abs=1e-6)


def test_gen_adv_fooled_discriminator_is_strongly_negative():
    grid = torch.full((1, 3, 3), 0.999999)
    assert float(adversarial_generator_loss(grid)) < -10.0


def test_gen_adv_matches_oracle_and_clamps():
    rng = np.random.default_rng(4)
    grid = rng.uniform(0, 1, (2, 3, 3))  # includes values near the clamp range
    t = torch.from_numpy(grid)
    for saturating in (True, False):
        got = float(adversarial_generator_loss(t, saturating=saturating))
        assert got == pytest.approx(oracle_gen_adv(grid, saturating), abs=1e-6)
    exact = torch.tensor([[0.0, 1.0]])
    assert math.isfinite(float(adversarial_generator_loss(exact)))


def test_disc_loss_values():
    half = torch.full((2, 2), 0.5)
    assert float(discriminator_loss(half, half)) == pytest.approx(-2 * math.log(0.5), abs=1e-6)
    perfect_real = torch.full((2, 2), 1.0 - 1e-7)
    perfect_fake = torch.full((2, 2), 1e-7)
    assert float(discriminator_loss(perfect_real, perfect_fake)) == pytest.approx(0.0, abs=1e-5)


def test_disc_loss_matches_oracle():
    rng = np.random.default_rng(5)
    real = rng.uniform(0, 1, (3, 3))
    fake = rng.uniform(0, 1, (3, 3))
    got = float(discriminator_loss(torch.from_numpy(real), torch.from_numpy(fake)))
    assert got == pytest.approx(oracle_disc(real, fake), abs=1e-6)


def test_adv_gradient_matches_finite_differences():
    torch.manual_seed(6)
    grid0 = torch.rand(3, 3, dtype=torch.float64) * 0.8 + 0.1
    assert_grad_matches_fd(lambda p: adversarial_generator_loss(p), grid0)
    assert_grad_matches_fd(lambda p: adversarial_generator_loss(p, saturating=False), grid0)
    real = torch.rand(3, 3, dtype=torch.float64) * 0.8 + 0.1
    assert_grad_matches_fd(lambda p: discriminator_loss(real, p), grid0)


# --- feature loss ----------------------------------------------------------------------


def test_feature_identity_extractor_reduces_to_mse():
    y = torch.rand(2, 3, 4, 4)
    g = torch.rand(2, 3, 4, 4)
    ext = identity_extractor()
    assert float(feature_loss(ext, y, g)) == pytest.approx(
        float(((y - g) ** 2).mean()), abs=1e-7
    )
    assert float(feature_loss(ext, y, y)) == 0.0


def test_feature_stub_matches_direct_activation_oracle():
    ext = conv_stub_extractor(seed=7)
    torch.manual_seed(8)
    y = torch.rand(1, 3, 4, 4) * 2 - 1
    g = torch.rand(1, 3, 4, 4) * 2 - 1
    with torch.no_grad():
        fy = ext.module(y)
        fg = ext.module(g)
        expected = float(((fy - fg) ** 2).mean())
    assert float(feature_loss(ext, y, g)) == pytest.approx(expected, abs=1e-5)


def test_feature_symmetry_and_shape_error():
    ext = conv_stub_extractor(seed=9)
    y = torch.rand(1, 3, 4, 4)
    g = torch.rand(1, 3, 4, 4)
    assert float(feature_loss(ext, y, g)) == pytest.approx(float(feature_loss(ext, g, y)), rel=1e-6)
    with pytest.raises(LossError):
        feature_loss(ext, y, torch.rand(1, 3, 8, 8))


def test_feature_gradient_matches_finite_differences():
    ext = conv_stub_extractor(seed=10)
    ext.module.double()
    y = torch.rand(1, 3, 4, 4, dtype=torch.float64)
    g0 = torch.rand(1, 3, 4, 4, dtype=torch.float64)
    assert_grad_matches_fd(lambda g: feature_loss(ext, y, g), g0)


def test_feature_extractor_params_are_frozen():
    ext = conv_stub_extractor(seed=11)
    assert all(not p.requires_grad for p in ext.module.parameters())


def test_vgg_prefix_extractor_shapes_and_provenance():
    ext = vgg16_tap4_extractor(weights_path=None, seed=12)
    out = ext.features(torch.rand(1, 3, 32, 32) * 2 - 1)
    assert tuple(out.shape) == (1, 128, 16, 16)  # tap after the 128-channel block
    assert "random-init" in ext.provenance["source"]


# --- composite -------------------------------------------------------------------------


def test_composite_pixel_only_equals_pixel_loss():
    y = torch.rand(1, 3, 4, 4)
    g = torch.rand(1, 3, 4, 4)
    w = LossWeights(pixel=1.0, feature=0.0, adversarial=0.0, tv=0.0)
    lp = pixel_loss(y, g)
    assert float(composite_loss(w, {"pixel": lp})) == float(lp)


def test_composite_weighted_sum_arithmetic():
    w = LossWeights(pixel=2.0, feature=3.0, adversarial=5.0, tv=7.0)
    parts = {
        "pixel": torch.tensor(0.1),
        "feature": torch.tensor(0.2),
        "adversarial": torch.tensor(0.3),
        "tv": torch.tensor(0.4),
    }
    assert float(composite_loss(w, parts)) == pytest.approx(5.1, abs=1e-6)


def test_composite_rejects_all_zero_weights():
    with pytest.raises(LossError):
        LossWeights(pixel=0.0, feature=0.0, adversarial=0.0, tv=0.0)
    with pytest.raises(LossError):
        LossWeights(pixel=-1.0)


def test_composite_names_non_finite_term():
    w = LossWeights()
    parts = {
        "pixel": torch.tensor(0.1),
        "feature": torch.tensor(float("nan")),
        "adversarial": torch.tensor(0.3),
        "tv": torch.tensor(0.4),
    }
    with pytest.raises(LossError, match="feature"):
        composite_loss(w, parts)


def test_composite_missing_part_with_nonzero_weight():
    with pytest.raises(LossError, match="missing"):
        composite_loss(LossWeights(), {"pixel": torch.tensor(0.1)})


def test_composite_linear_in_each_weight():
    parts = {
        "pixel": torch.tensor(0.3),
        "feature": torch.tensor(0.5),
        "adversarial": torch.tensor(-0.2),
        "tv": torch.tensor(0.01),
    }
    base = float(composite_loss(LossWeights(1, 1, 1, 1), parts))
    doubled = float(composite_loss(LossWeights(2, 1, 1, 1), parts))
    assert doubled - base == pytest.approx(0.3, abs=1e-7)


def test_zeroed_weight_removes_gradient_contribution():
    """Zeroing a term's weight must zero that term's parameter-gradient
    contribution exactly (ablation wiring)."""
    from sketchpaint.networks import GeneratorConfig, build_generator, make_noise_plane

    cfg = GeneratorConfig(resolution=64, depth=6, base_filters=4)
    torch.manual_seed(13)
    x = torch.rand(1, 3, 64, 64) * 2 - 1
    y = torch.rand(1, 3, 64, 64) * 2 - 1
    z = make_noise_plane(64, 0.1, seed=14)

    def grads(weights: LossWeights, include_feature: bool) -> list[torch.Tensor]:
        net = build_generator(cfg, seed=15)
        ext = conv_stub_extractor(seed=16)
        g_out = net(torch.cat([x, z], dim=1))
        parts = {
            "pixel": pixel_loss(y, g_out),
            "tv": tv_loss(g_out),
        }
        if include_feature:
            parts["feature"] = feature_loss(ext, y, g_out)
        composite_loss(weights, parts).backward()
        return [p.grad.clone() for p in net.parameters()]

    zero_weight = grads(
        LossWeights(pixel=1.0, feature=0.0, adversarial=0.0, tv=1.0), include_feature=True
    )
    term_absent = grads(
        LossWeights(pixel=1.0, feature=0.0, adversarial=0.0, tv=1.0), include_feature=False
    )
    for gw, ga in zip(zero_weight, term_absent):
        assert float((gw - ga).abs().max()) <= 1e-9
    # and the ablation configurations are genuinely different objectives
    full = grads(LossWeights(pixel=1.0, feature=1.0, adversarial=0.0, tv=1.0), True)
    assert any(float((gf - gw).abs().max()) > 1e-9 for gf, gw in zip(full, zero_weight))
