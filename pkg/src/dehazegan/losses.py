"""Training objectives: reconstruction (L1, SSIM, perceptual) and adversarial terms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import functional as F
from .nn import Conv2d, Module
from .rng import stream
from .tensor import Tensor, abs_, clip, log, mean, mul, reshape, square, sub

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03
LOG_FLOOR = 1e-12
PERCEPTUAL_WIDTHS = (16, 32, 64)
PERCEPTUAL_SEED = 20201
ADV_WEIGHT_KEY = {"lf": "lambda1", "hf": "lambda2", "simple": "lambda1"}


@dataclass
class LossWeights:
    lambda1: float = 0.5
    lambda2: float = 0.5

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be nonnegative")

    def for_slot(self, slot: str) -> float:
        return getattr(self, ADV_WEIGHT_KEY[slot])


def ssim_constants(data_range: float = 1.0) -> tuple[float, float]:
    return (SSIM_K1 * data_range) ** 2, (SSIM_K2 * data_range) ** 2


def gaussian_window1d(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-(x**2) / (2 * sigma**2))
    return k / k.sum()


_WIN = gaussian_window1d()
_WIN_V = Tensor(_WIN.reshape(1, 1, SSIM_WINDOW, 1))
_WIN_H = Tensor(_WIN.reshape(1, 1, 1, SSIM_WINDOW))


def _window_mean(t: Tensor) -> Tensor:
    return F.conv2d(F.conv2d(t, _WIN_V), _WIN_H)


def ssim_map_t(a: Tensor, b: Tensor) -> Tensor:
    """Per-channel SSIM over the valid region; returns (N*C, 1, H-10, W-10)."""
    n, c, h, w = a.shape
    if b.shape != a.shape:
        raise ValueError(f"ssim: shapes differ {a.shape} vs {b.shape}")
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ValueError(f"ssim: images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}")
    c1, c2 = ssim_constants()
    x = reshape(a, (n * c, 1, h, w))
    y = reshape(b, (n * c, 1, h, w))
    mu_x, mu_y = _window_mean(x), _window_mean(y)
    mu_xx, mu_yy, mu_xy = square(mu_x), square(mu_y), mul(mu_x, mu_y)
    var_x = sub(_window_mean(square(x)), mu_xx)
    var_y = sub(_window_mean(square(y)), mu_yy)
    cov = sub(_window_mean(mul(x, y)), mu_xy)
    num = mul(mu_xy * 2.0 + c1, cov * 2.0 + c2)
    den = mul(mu_xx + mu_yy + c1, var_x + var_y + c2)
    return num / den


def ssim_t(a: Tensor, b: Tensor) -> Tensor:
    return mean(ssim_map_t(a, b))


def l1_loss(a: Tensor, b: Tensor) -> Tensor:
    return mean(abs_(sub(a, b)))


class FeatureNet(Module):
    """Fixed feature extractor for the perceptual loss.

    Three (3x3 conv, ReLU, 2x max pool) blocks with deterministic random
    weights unless ``weights`` supplies (kernel, bias) arrays per block.
    """

    def __init__(self, weights=None, seed: int = PERCEPTUAL_SEED):
        super().__init__()
        rng = stream(seed, "perceptual")
        ins = (3,) + PERCEPTUAL_WIDTHS[:-1]
        self.blocks = [Conv2d(rng, i, o, 3) for i, o in zip(ins, PERCEPTUAL_WIDTHS)]
        if weights is not None:
            if len(weights) != len(self.blocks):
                raise ValueError(f"FeatureNet: expected {len(self.blocks)} (kernel, bias) pairs")
            for conv, (k, bias) in zip(self.blocks, weights):
                conv.weight = Tensor(np.asarray(k, dtype=np.float64))
                conv.bias = Tensor(np.asarray(bias, dtype=np.float64))
        for conv in self.blocks:
            conv.weight.requires_grad = False
            conv.bias.requires_grad = False

    def features(self, x: Tensor) -> list[Tensor]:
        feats = []
        for conv in self.blocks:
            x = F.maxpool2d(F.relu(conv(x)), 2)
            feats.append(x)
        return feats

    forward = features


_default_feature_net: FeatureNet | None = None


def default_feature_net() -> FeatureNet:
    global _default_feature_net
    if _default_feature_net is None:
        _default_feature_net = FeatureNet()
    return _default_feature_net


def perceptual_loss(a: Tensor, b: Tensor, feature_net: FeatureNet | None = None) -> Tensor:
    net = feature_net or default_feature_net()
    total = None
    for fa, fb in zip(net.features(a), net.features(b)):
        term = mean(square(sub(fa, fb)))
        total = term if total is None else total + term
    return total


def _safe_log(t: Tensor) -> Tensor:
    return log(clip(t, LOG_FLOOR, None))


def adversarial_term(d_fake: Tensor, non_saturating: bool = False) -> Tensor:
    """Generator-side adversarial term for one discriminator's output map."""
    if non_saturating:
        return mean(_safe_log(d_fake)) * -1.0
    return mean(_safe_log(1.0 - d_fake))


def generator_loss(
    real: Tensor,
    fake: Tensor,
    d_outputs: dict[str, Tensor],
    weights: LossWeights | None = None,
    feature_net: FeatureNet | None = None,
    non_saturating: bool = False,
) -> tuple[Tensor, dict[str, float]]:
    """L1 + (1 - SSIM) + perceptual + sum of weighted log(1 - D(fake)) terms.

    ``d_outputs`` maps discriminator slot ("lf", "hf" or "simple") to its
    output on the fake's input; a zero weight still contributes an exact 0.
    """
    weights = weights or LossWeights()
    l1 = l1_loss(fake, real)
    ssim_term = 1.0 - ssim_t(fake, real)
    perc = perceptual_loss(fake, real, feature_net)
    total = l1 + ssim_term + perc
    parts = {"l1": l1.item(), "ssim": ssim_term.item(), "perceptual": perc.item()}
    for slot, d_out in d_outputs.items():
        term = adversarial_term(d_out, non_saturating) * weights.for_slot(slot)
        parts[f"adv_{slot}"] = term.item()
        total = total + term
    return total, parts


def discriminator_loss(d_real: Tensor, d_fake: Tensor) -> Tensor:
    """-mean(log D(real)) - mean(log(1 - D(fake)))."""
    return mean(_safe_log(d_real)) * -1.0 - mean(_safe_log(1.0 - d_fake))
