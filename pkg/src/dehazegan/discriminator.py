"""Six-block convolutional patch discriminator."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import functional as F
from .nn import BatchNorm2d, Conv2d, Module
from .tensor import ShapeError, Tensor

FULL_WIDTHS = (64, 128, 256, 512, 512)
STRIDES = (2, 2, 2, 1, 1, 1)
KERNEL = 3
NORM_BLOCKS = (1, 2, 3, 4)  # zero-based: blocks 2-5


def receptive_field(kernels: Sequence[int], strides: Sequence[int]) -> int:
    """Input extent seen by one output cell, via rf <- rf * stride + (k - stride) from the top."""
    rf = 1
    for k, s in zip(reversed(kernels), reversed(strides)):
        rf = rf * s + (k - s)
    return rf


class PatchDiscriminator(Module):
    """Maps N x C x H x W to an N x 1 x H/8 x W/8 grid of realness scores in (0, 1)."""

    def __init__(self, rng: np.random.Generator, in_channels: int = 6, width_factor: int = 4):
        super().__init__()
        self.in_channels = in_channels
        widths = [max(1, w // width_factor) for w in FULL_WIDTHS] + [1]
        self.widths = widths
        ins = [in_channels] + widths[:-1]
        self.convs = []
        self.norms = []
        for i, (cin, cout, s) in enumerate(zip(ins, widths, STRIDES)):
            norm = i in NORM_BLOCKS
            self.convs.append(Conv2d(rng, cin, cout, KERNEL, stride=s, pad=1, bias=not norm))
            self.norms.append(BatchNorm2d(cout) if norm else None)

    @property
    def receptive_field(self) -> int:
        return receptive_field([KERNEL] * len(STRIDES), STRIDES)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(f"discriminator: expected {self.in_channels} input channels, got shape {x.shape}")
        h, w = x.shape[2:]
        if h % 8 or w % 8 or h < 16 or w < 16:
            raise ShapeError(f"discriminator: H and W must be multiples of 8 and at least 16, got {h}x{w}")
        last = len(self.convs) - 1
        for i, (conv, norm) in enumerate(zip(self.convs, self.norms)):
            x = conv(x)
            if norm is not None:
                x = norm(x)
            x = F.sigmoid(x) if i == last else F.leaky_relu(x)
        return x


def discriminator_param_formula(in_channels: int = 6, width_factor: int = 4) -> int:
    """Closed-form parameter count of :class:`PatchDiscriminator`."""
    widths = [max(1, w // width_factor) for w in FULL_WIDTHS] + [1]
    total = 0
    for i, (cin, cout) in enumerate(zip([in_channels] + widths[:-1], widths)):
        total += KERNEL * KERNEL * cin * cout
        total += 2 * cout if i in NORM_BLOCKS else cout  # BN affine or conv bias
    return total
