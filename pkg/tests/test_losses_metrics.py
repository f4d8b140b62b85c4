import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dehazegan.discriminator import PatchDiscriminator
from dehazegan.losses import (
    FeatureNet,
    LossWeights,
    discriminator_loss,
    gaussian_window1d,
    generator_loss,
    perceptual_loss,
    ssim_constants,
)
from dehazegan.metrics import psnr, ssim
from dehazegan.tensor import Tensor, no_grad
from dehazegan.validation import to_nchw
from gradcheck import network_grad_error
from oracles import psnr_ref, ssim_ref

seeds = st.integers(0, 2**32 - 1)


def test_psnr_examples():
    a = np.full((4, 4, 3), 0.2)
    assert psnr(a, a) == 100.0
    assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-12)
    assert psnr(np.zeros((2, 2, 3)), np.ones((2, 2, 3))) == 0.0


def test_psnr_decreases_with_mse():
    rng = np.random.default_rng(0)
    a = rng.uniform(0.3, 0.7, size=(8, 8, 3))
    noise = rng.normal(size=a.shape)
    values = [psnr(a, np.clip(a + s * noise, 0, 1)) for s in (0.01, 0.02, 0.05, 0.1, 0.2)]
    assert all(x > y for x, y in zip(values, values[1:]))


def test_ssim_constants_and_window():
    c1, c2 = ssim_constants()
    assert (c1, c2) == pytest.approx((1e-4, 9e-4), rel=1e-15)
    assert gaussian_window1d().sum() == pytest.approx(1.0, abs=1e-15)


def test_ssim_black_vs_white_closed_form():
    c1, _ = ssim_constants()
    got = ssim(np.zeros((16, 16, 3)), np.ones((16, 16, 3)))
    assert got == pytest.approx(c1 / (1 + c1), rel=1e-12)
    assert got == pytest.approx(9.999e-5, rel=1e-4)


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_ssim_identity_and_symmetry(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(size=(2, 16, 14, 3))
    assert ssim(a, a) == 1.0
    assert abs(ssim(a, b) - ssim(b, a)) < 1e-12


def test_metrics_match_brute_force_on_small_pairs():
    rng = np.random.default_rng(1)
    for _ in range(5):
        a = rng.uniform(size=(13, 12, 3))
        b = np.clip(a + rng.normal(scale=0.1, size=a.shape), 0, 1)
        assert abs(ssim(a, b) - ssim_ref(a, b)) < 1e-8
        assert abs(psnr(a, b) - psnr_ref(a, b)) < 1e-8


def test_perceptual_properties():
    rng = np.random.default_rng(2)
    net = FeatureNet()
    for _ in range(20):
        a, b = (Tensor(x) for x in rng.uniform(size=(2, 1, 3, 16, 16)))
        with no_grad():
            ab = perceptual_loss(a, b, net).item()
            ba = perceptual_loss(b, a, net).item()
            aa = perceptual_loss(a, a, net).item()
        assert aa == 0.0 and ab > 0 and ab == ba


def test_feature_net_is_fixed_and_pluggable():
    net = FeatureNet()
    assert net.parameters() == {}
    again = FeatureNet()
    np.testing.assert_array_equal(net.blocks[0].weight.data, again.blocks[0].weight.data)
    weights = [(np.zeros_like(c.weight.data), np.ones_like(c.bias.data)) for c in net.blocks]
    custom = FeatureNet(weights)
    x = Tensor(np.random.default_rng(0).uniform(size=(1, 3, 16, 16)))
    with no_grad():
        assert perceptual_loss(x, Tensor(np.zeros(x.shape)), custom).item() == 0.0


def test_generator_loss_at_perfect_fake_with_undecided_discriminators():
    img = Tensor(np.random.default_rng(3).uniform(size=(1, 3, 16, 16)))
    half = Tensor(np.full((1, 1, 2, 2), 0.5))
    total, parts = generator_loss(img, img, {"lf": half, "hf": half})
    assert total.item() == pytest.approx(math.log(0.5), abs=1e-12)
    assert parts["l1"] == 0 and parts["ssim"] == 0 and parts["perceptual"] == 0


def test_zero_lambdas_leave_reconstruction_terms():
    rng = np.random.default_rng(4)
    real, fake = (Tensor(x) for x in rng.uniform(size=(2, 1, 3, 16, 16)))
    d = {"lf": Tensor(rng.uniform(0.1, 0.9, (1, 1, 2, 2))), "hf": Tensor(rng.uniform(0.1, 0.9, (1, 1, 2, 2)))}
    total, parts = generator_loss(real, fake, d, LossWeights(0.0, 0.0))
    assert parts["adv_lf"] == 0 and parts["adv_hf"] == 0
    assert total.item() == pytest.approx(parts["l1"] + parts["ssim"] + parts["perceptual"], abs=1e-15)
    assert min(parts["l1"], parts["ssim"], parts["perceptual"]) >= 0


def test_loss_decreases_as_fake_approaches_real():
    rng = np.random.default_rng(5)
    real = rng.uniform(size=(1, 3, 32, 32))
    noise = rng.uniform(size=real.shape)
    d = {"lf": Tensor(np.full((1, 1, 4, 4), 0.3)), "hf": Tensor(np.full((1, 1, 4, 4), 0.3))}
    values = []
    for alpha in np.linspace(0, 1, 5):
        fake = Tensor((1 - alpha) * noise + alpha * real)
        with no_grad():
            values.append(generator_loss(Tensor(real), fake, d)[0].item())
    assert all(x > y for x, y in zip(values, values[1:]))


def test_discriminator_loss_examples():
    ones = np.ones((1, 1, 2, 2))
    assert discriminator_loss(Tensor(ones * 0.5), Tensor(ones * 0.5)).item() == pytest.approx(2 * math.log(2))
    best = discriminator_loss(Tensor(ones * (1 - 1e-12)), Tensor(ones * 1e-12)).item()
    assert 0 <= best < 1e-11


@given(st.sampled_from([0.0, 1.0, 1e-300, 0.5]), st.sampled_from([0.0, 1.0, 0.5]))
def test_losses_finite_at_extremes(r, f):
    d_real, d_fake = Tensor(np.full((1, 1, 2, 2), r)), Tensor(np.full((1, 1, 2, 2), f))
    assert math.isfinite(discriminator_loss(d_real, d_fake).item())
    img = Tensor(np.zeros((1, 3, 16, 16)))
    total, _ = generator_loss(img, Tensor(np.ones((1, 3, 16, 16))), {"lf": d_fake})
    assert math.isfinite(total.item())


def test_discriminator_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    for _ in range(5):
        d = PatchDiscriminator(rng, 6, 16)
        real = rng.uniform(size=(1, 6, 16, 16))

        class Wrapped:
            """Adapts the loss so the network checker sees a scalar map."""

            def parameters(self):
                return d.parameters()

            def __call__(self, fake):
                return discriminator_loss(d(Tensor(real)), d(fake))

        err, checked = network_grad_error(Wrapped(), rng.uniform(size=(1, 6, 16, 16)), rng)
        assert err < 1e-4 and checked > 0


def test_image_level_ssim_accepts_hwc():
    a = np.random.default_rng(7).uniform(size=(12, 12, 3))
    assert to_nchw([a]).shape == (1, 3, 12, 12)
    with pytest.raises(Exception):
        ssim(a[:10, :10], a[:10, :10])
