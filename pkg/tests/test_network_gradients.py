"""Finite-difference checks through the complete generator and discriminator."""

import numpy as np
import pytest

from dehazegan.discriminator import PatchDiscriminator
from dehazegan.generator import Generator
from gradcheck import network_grad_error, perturb_zero_weights

INSTANCES = 20
TOL = 1e-4


@pytest.mark.parametrize("saca,msfa", [(True, True), (False, False)])
def test_generator_gradients(saca, msfa):
    rng = np.random.default_rng(11 + saca + 2 * msfa)
    worst, checked = 0.0, 0
    for _ in range(INSTANCES):
        net = perturb_zero_weights(Generator(rng, base_width=2, saca=saca, msfa=msfa), rng)
        err, n = network_grad_error(net, rng.uniform(0, 1, size=(2, 3, 32, 32)), rng)
        worst, checked = max(worst, err), checked + n
    assert worst < TOL, worst
    assert checked >= INSTANCES * 20, f"only {checked} smooth coordinates found"


@pytest.mark.parametrize("channels", [6, 3])
def test_discriminator_gradients(channels):
    rng = np.random.default_rng(5 + channels)
    worst, checked = 0.0, 0
    for _ in range(INSTANCES):
        net = PatchDiscriminator(rng, channels, width_factor=16)
        err, n = network_grad_error(net, rng.uniform(0, 1, size=(2, channels, 16, 16)), rng)
        worst, checked = max(worst, err), checked + n
    assert worst < TOL, worst
    assert checked >= INSTANCES * 20
