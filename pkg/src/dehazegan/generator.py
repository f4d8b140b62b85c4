"""Encoder-decoder dehazing network with attention-refined skip connections.

Encoder: four conv-blocks, each followed by 2x max pooling. Every skip tap
optionally passes through a :class:`SacaBlock` (non-local aggregation, then
softmax channel re-weighting). With multi-scale aggregation on, the refined
skips are max pooled to bottleneck resolution and concatenated into the
bottleneck before a 1x1 fusion conv. Decoder: four pixel-shuffle upscaling
blocks that concatenate the matching skip, then a 1x1 head and a sigmoid.
"""

from __future__ import annotations

import numpy as np

from . import functional as F
from .nn import BatchNorm2d, Conv2d, Module
from .tensor import ShapeError, Tensor, concat, reshape, transpose

LEVELS = 4


class SacaBlock(Module):
    """Spatially aware channel attention; input and output shapes are identical."""

    def __init__(self, rng: np.random.Generator, channels: int):
        super().__init__()
        if channels % 2:
            raise ShapeError(f"SacaBlock needs an even channel count, got {channels}")
        half = channels // 2
        self.channels = channels
        self.theta = Conv2d(rng, channels, half, 1)
        # a key-side bias shifts every logit of a query row equally, which the
        # softmax ignores; it would be a parameter with identically zero gradient
        self.phi = Conv2d(rng, channels, half, 1, bias=False)
        self.g = Conv2d(rng, channels, half, 1)
        self.out_proj = Conv2d(rng, half, channels, 1)
        self.attn_conv = Conv2d(rng, channels, channels, 1)
        # Both stages start as the identity: a zero residual projection (the usual
        # non-local initialization) and zero logits, i.e. uniform channel weights.
        self.out_proj.weight.data[...] = 0.0
        self.attn_conv.weight.data[...] = 0.0

    @staticmethod
    def formula(channels: int) -> int:
        half = channels // 2
        projections = 3 * channels * half + 2 * half + (half * channels + channels)
        return projections + channels * channels + channels

    def non_local(self, x: Tensor) -> Tensor:
        n, c, h, w = x.shape
        if c != self.channels:
            raise ShapeError(f"SacaBlock: expected {self.channels} channels, got {c}")

        def tokens(t: Tensor) -> Tensor:
            return transpose(reshape(t, (n, c // 2, h * w)), (0, 2, 1))

        agg = F.attention(tokens(self.theta(x)), tokens(self.phi(x)), tokens(self.g(x)))
        agg = reshape(transpose(agg, (0, 2, 1)), (n, c // 2, h, w))
        return x + self.out_proj(agg)

    def channel_weights(self, y: Tensor) -> Tensor:
        """Softmax over channels of pooled 1x1-conv logits, shape (N, C, 1, 1)."""
        return F.softmax(F.global_avg_pool(self.attn_conv(y)), axis=1)

    def forward(self, x: Tensor) -> Tensor:
        y = self.non_local(x)
        s = self.channel_weights(y)
        # scaled by C so uniform attention is the identity
        return F.scale_channels(y, s * float(self.channels))


class ConvBlock(Module):
    def __init__(self, rng, in_ch: int, out_ch: int):
        super().__init__()
        self.conv1 = Conv2d(rng, in_ch, out_ch, 3, bias=False)
        self.bn1 = BatchNorm2d(out_ch)
        self.conv2 = Conv2d(rng, out_ch, out_ch, 3, bias=False)
        self.bn2 = BatchNorm2d(out_ch)

    def forward(self, x):
        x = F.relu(self.bn1(self.conv1(x)))
        return F.relu(self.bn2(self.conv2(x)))


class UpBlock(Module):
    def __init__(self, rng, in_ch: int, skip_ch: int, out_ch: int):
        super().__init__()
        if in_ch % 4:
            raise ShapeError(f"UpBlock: pixel shuffle x2 needs channels divisible by 4, got {in_ch}")
        self.conv_up = Conv2d(rng, in_ch // 4, out_ch, 3, bias=False)
        self.bn_up = BatchNorm2d(out_ch)
        self.conv_merge = Conv2d(rng, out_ch + skip_ch, out_ch, 3, bias=False)
        self.bn_merge = BatchNorm2d(out_ch)

    def forward(self, x, skip):
        x = F.pixel_shuffle(x, 2)
        x = F.relu(self.bn_up(self.conv_up(x)))
        x = concat([x, skip], axis=1)
        return F.relu(self.bn_merge(self.conv_merge(x)))


class Generator(Module):
    def __init__(self, rng: np.random.Generator, base_width: int = 8, saca: bool = True, msfa: bool = True):
        super().__init__()
        self.widths = [base_width * 2**i for i in range(LEVELS)]
        self.use_saca = saca
        self.use_msfa = msfa
        ins = [3] + self.widths[:-1]
        self.encoder = [ConvBlock(rng, i, o) for i, o in zip(ins, self.widths)]
        self.saca = [SacaBlock(rng, w) for w in self.widths] if saca else []
        deep = self.widths[-1]
        self.fuse = Conv2d(rng, deep + (sum(self.widths) if msfa else 0), deep, 1)
        # decoder runs deepest-first
        dec_in = [deep] + self.widths[::-1][:-1]
        self.decoder = [UpBlock(rng, i, s, s) for i, s in zip(dec_in, self.widths[::-1])]
        self.head = Conv2d(rng, self.widths[0], 3, 1)

    def check_input(self, x: Tensor) -> None:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"generator: expected N x 3 x H x W input, got {x.shape}")
        h, w = x.shape[2:]
        if h % 16 or w % 16 or h < 32 or w < 32:
            raise ShapeError(f"generator: H and W must be multiples of 16 and at least 32, got {h}x{w}")

    def forward(self, x: Tensor) -> Tensor:
        self.check_input(x)
        skips = []
        for block in self.encoder:
            x = block(x)
            skips.append(x)
            x = F.maxpool2d(x, 2)
        if self.use_saca:
            skips = [sa(s) for sa, s in zip(self.saca, skips)]
        if self.use_msfa:
            pooled = [F.maxpool2d(s, 2 ** (LEVELS - i)) for i, s in enumerate(skips)]
            x = concat(pooled + [x], axis=1)
        x = F.relu(self.fuse(x))
        for block, skip in zip(self.decoder, skips[::-1]):
            x = block(x, skip)
        return F.sigmoid(self.head(x))


def generator_param_formula(base_width: int, saca: bool, msfa: bool) -> int:
    """Closed-form parameter count matching :class:`Generator`'s layout."""
    widths = [base_width * 2**i for i in range(LEVELS)]
    total = 0
    for cin, cout in zip([3] + widths[:-1], widths):
        total += 9 * cin * cout + 9 * cout * cout + 4 * cout
    deep = widths[-1]
    fuse_in = deep + (sum(widths) if msfa else 0)
    total += fuse_in * deep + deep
    for cin, cout in zip([deep] + widths[::-1][:-1], widths[::-1]):
        total += 9 * (cin // 4) * cout + 9 * (2 * cout) * cout + 4 * cout
    total += widths[0] * 3 + 3
    if saca:
        total += sum(SacaBlock.formula(w) for w in widths)
    return total
