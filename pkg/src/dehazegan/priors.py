"""Low/high-frequency image components and the 6-channel discriminator inputs.

Low frequency: separable 7-tap Gaussian (sigma 1.5) with reflect padding.
High frequency: 3x3 Laplacian with reflect padding, then per-image min-max
normalization to [0, 1]. Both are differentiable so the generator receives
gradients through the prior channels of its own output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import functional as F
from .tensor import ShapeError, Tensor, concat, no_grad, reshape
from .validation import check_image, to_hwc, to_nchw

GAUSS_TAPS = 7
GAUSS_SIGMA = 1.5
LAPLACIAN = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


def gaussian_kernel1d(taps: int = GAUSS_TAPS, sigma: float = GAUSS_SIGMA) -> np.ndarray:
    x = np.arange(taps) - (taps - 1) / 2.0
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()


_G1 = gaussian_kernel1d()
_GAUSS_V = Tensor(_G1.reshape(1, 1, GAUSS_TAPS, 1))
_GAUSS_H = Tensor(_G1.reshape(1, 1, 1, GAUSS_TAPS))
_LAP = Tensor(LAPLACIAN.reshape(1, 1, 3, 3))


def _per_channel(x: Tensor, fn) -> Tensor:
    n, c, h, w = x.shape
    y = fn(reshape(x, (n * c, 1, h, w)))
    return reshape(y, (n, c) + y.shape[2:])


def low_freq_t(x: Tensor) -> Tensor:
    if x.ndim != 4 or x.shape[2] < GAUSS_TAPS or x.shape[3] < GAUSS_TAPS:
        raise ShapeError(f"low_freq: need N x C x H x W with H, W >= {GAUSS_TAPS}, got {x.shape}")
    pad = GAUSS_TAPS // 2

    def blur(t):
        t = F.reflect_pad(t, pad)
        return F.conv2d(F.conv2d(t, _GAUSS_V), _GAUSS_H)

    return _per_channel(x, blur)


def laplacian_t(x: Tensor) -> Tensor:
    """Raw (unnormalized) Laplacian response."""
    if x.ndim != 4 or x.shape[2] < 3 or x.shape[3] < 3:
        raise ShapeError(f"high_freq: need N x C x H x W with H, W >= 3, got {x.shape}")
    return _per_channel(x, lambda t: F.conv2d(F.reflect_pad(t, 1), _LAP))


def high_freq_t(x: Tensor) -> Tensor:
    return F.minmax_normalize(laplacian_t(x))


def prior_inputs_t(x: Tensor) -> tuple[Tensor, Tensor]:
    """(image ++ LF(image), image ++ HF(image)) along the channel axis."""
    return concat([x, low_freq_t(x)], axis=1), concat([x, high_freq_t(x)], axis=1)


# -- image-level wrappers -----------------------------------------------------

def _run(img, fn) -> np.ndarray:
    img = check_image(img)
    with no_grad():
        out = fn(Tensor(to_nchw([img]))).data
    return to_hwc(out)[0]


def low_freq(img) -> np.ndarray:
    # a convex combination; clipping only trims rounding at the unit bounds
    return np.clip(_run(img, low_freq_t), 0.0, 1.0)


def laplacian(img) -> np.ndarray:
    return _run(img, laplacian_t)


def high_freq(img) -> np.ndarray:
    return _run(img, high_freq_t)


def normalize_minmax(arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


@dataclass
class PriorPair:
    lf_input: np.ndarray
    hf_input: np.ndarray


def make_prior_pair(img) -> PriorPair:
    img = check_image(img)
    lf = low_freq(img)
    hf = high_freq(img)
    return PriorPair(np.concatenate([img, lf], axis=2), np.concatenate([img, hf], axis=2))
