"""Atmospheric scattering model: haze synthesis and its analytic inverse.

A hazy observation is ``I = J * t + A * (1 - t)`` with transmission
``t = exp(-beta * depth)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError
from .validation import check_image

T_MIN = 0.05
N_BLOBS = 3
MIN_BLOB_SIGMA = 5.0


@dataclass
class HazeParams:
    airlight: float | np.ndarray
    beta: float
    depth: np.ndarray

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float64)
        a = np.asarray(self.airlight, dtype=np.float64)
        if a.ndim not in (0, 1) or (a.ndim == 1 and a.shape != (3,)):
            raise ShapeError("airlight: expected a scalar or 3 per-channel values")
        if np.any(a < 0) or np.any(a > 1):
            raise ValueError("airlight: must lie in [0, 1]")

    def transmission(self) -> np.ndarray:
        return transmission(self.depth, self.beta)


def transmission(depth, beta: float) -> np.ndarray:
    depth = np.asarray(depth, dtype=np.float64)
    if beta < 0:
        raise ValueError("beta: must be nonnegative")
    if np.any(depth < 0):
        raise ValueError("depth: must be nonnegative")
    return np.exp(-beta * depth)


def _check_depth(img: np.ndarray, depth: np.ndarray) -> None:
    if depth.shape != img.shape[:2]:
        raise ShapeError(f"depth map {depth.shape} does not match image {img.shape[:2]}")


def apply_haze(clean, params: HazeParams) -> np.ndarray:
    J = check_image(clean, name="clean")
    _check_depth(J, params.depth)
    t = params.transmission()[..., None]
    A = np.asarray(params.airlight, dtype=np.float64)
    # clip only absorbs last-ulp rounding; the blend is already convex
    return np.clip(J * t + A * (1.0 - t), 0.0, 1.0)


def invert_haze(hazy, params: HazeParams, t_min: float = T_MIN) -> np.ndarray:
    """Recover the clean image; refuses when transmission drops below ``t_min``."""
    I = check_image(hazy, name="hazy")
    _check_depth(I, params.depth)
    t = params.transmission()
    if t.min() < t_min:
        raise ValueError(f"transmission {t.min():.4g} below t_min={t_min}: inversion is ill-conditioned")
    t = t[..., None]
    A = np.asarray(params.airlight, dtype=np.float64)
    return np.clip((I - A * (1.0 - t)) / t, 0.0, 1.0)


def synth_depth(h: int, w: int, rng: np.random.Generator, kind: str = "blobs", d_max: float = 1.0) -> np.ndarray:
    """Synthetic scene depth in [0, d_max].

    ``ramp`` rises linearly from 0 at the left column to ``d_max`` at the
    right. ``blobs`` sums a few isotropic Gaussian bumps whose amplitudes add
    up to at most ``d_max``; the minimum width keeps neighbouring pixels
    within ``d_max / 8`` of each other.
    """
    if h < 1 or w < 1:
        raise ValueError("depth map extents must be positive")
    if kind == "ramp":
        row = np.linspace(0.0, d_max, w) if w > 1 else np.zeros(1)
        return np.tile(row, (h, 1))
    if kind != "blobs":
        raise ValueError(f"unknown depth kind {kind!r}")
    amps = rng.dirichlet(np.ones(N_BLOBS)) * d_max
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    depth = np.zeros((h, w))
    scale = max(h, w)
    for a in amps:
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        sigma = max(MIN_BLOB_SIGMA, rng.uniform(0.2, 0.5) * scale)
        depth += a * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2))
    return depth


def sample_haze_params(
    h: int,
    w: int,
    rng: np.random.Generator,
    beta_range=(0.4, 1.6),
    airlight_range=(0.7, 1.0),
    d_max: float = 1.5,
    per_channel: bool = False,
) -> HazeParams:
    kind = "ramp" if rng.random() < 0.5 else "blobs"
    depth = synth_depth(h, w, rng, kind, d_max)
    if kind == "ramp" and rng.random() < 0.5:
        depth = depth[:, ::-1].copy()
    beta = rng.uniform(*beta_range)
    airlight = rng.uniform(*airlight_range, size=3 if per_channel else None)
    return HazeParams(airlight=airlight, beta=float(beta), depth=depth)


def synthetic_scene(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    """A procedurally drawn clean image: smooth colour field plus shapes and texture."""
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    yy /= max(h - 1, 1)
    xx /= max(w - 1, 1)
    c0, c1 = rng.uniform(0.05, 0.9, size=(2, 3))
    angle = rng.uniform(0, 2 * np.pi)
    ramp = np.clip(0.5 + 0.5 * (np.cos(angle) * (xx - 0.5) + np.sin(angle) * (yy - 0.5)) * 1.4, 0, 1)
    img = c0 * (1 - ramp[..., None]) + c1 * ramp[..., None]
    for _ in range(rng.integers(2, 6)):
        color = rng.uniform(0.0, 1.0, size=3)
        if rng.random() < 0.5:
            y0, x0 = rng.uniform(0, 0.8, size=2)
            hh, ww = rng.uniform(0.1, 0.5, size=2)
            mask = (yy >= y0) & (yy < y0 + hh) & (xx >= x0) & (xx < x0 + ww)
        else:
            cy, cx = rng.uniform(0.1, 0.9, size=2)
            r = rng.uniform(0.08, 0.3)
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 < r * r
        img[mask] = color
    freq = rng.uniform(4, 12)
    stripes = 0.08 * np.sin(2 * np.pi * freq * (xx if rng.random() < 0.5 else yy))
    return np.clip(img + stripes[..., None], 0.0, 1.0)
