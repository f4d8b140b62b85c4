"""Evaluation metrics on H x W x 3 images in [0, 1]."""

from __future__ import annotations

import math

import numpy as np

from .losses import SSIM_WINDOW, ssim_t
from .tensor import Tensor, no_grad
from .validation import check_min_size, check_pair, to_nchw

PSNR_CAP = 100.0


def psnr(a, b, data_range: float = 1.0) -> float:
    """10 * log10(L^2 / MSE) in dB; identical images return the 100 dB cap."""
    a, b = check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return 10.0 * math.log10(data_range**2 / mse)


def ssim(a, b) -> float:
    """Mean SSIM over channels and valid window positions (11x11 Gaussian, sigma 1.5)."""
    a, b = check_pair(a, b)
    check_min_size(a, SSIM_WINDOW, what="ssim")
    with no_grad():
        return ssim_t(Tensor(to_nchw([a])), Tensor(to_nchw([b]))).item()
