"""Input checks shared by the public entry points."""

from __future__ import annotations

import numpy as np

from .tensor import ShapeError


def check_image(img, clip_tol: float = 1e-9, name: str = "image") -> np.ndarray:
    """Return ``img`` as a float64 H x W x 3 array with values in [0, 1].

    Values within ``clip_tol`` outside the unit interval are clamped;
    anything further out is rejected.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name}: expected H x W x 3 array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name}: contains non-finite values")
    lo, hi = arr.min(), arr.max()
    if lo < -clip_tol or hi > 1.0 + clip_tol:
        raise ValueError(f"{name}: values must lie in [0, 1], got range [{lo:.4g}, {hi:.4g}]")
    if lo < 0 or hi > 1:
        arr = np.clip(arr, 0.0, 1.0)
    return arr


def check_pair(a, b, names=("a", "b")) -> tuple[np.ndarray, np.ndarray]:
    a = check_image(a, name=names[0])
    b = check_image(b, name=names[1])
    if a.shape != b.shape:
        raise ShapeError(f"{names[0]} and {names[1]} differ in shape: {a.shape} vs {b.shape}")
    return a, b


def check_min_size(img: np.ndarray, min_h: int, min_w: int | None = None, what: str = "operation") -> None:
    min_w = min_h if min_w is None else min_w
    if img.shape[0] < min_h or img.shape[1] < min_w:
        raise ShapeError(f"{what}: image {img.shape[0]}x{img.shape[1]} smaller than {min_h}x{min_w}")


def check_image_collection(X, name: str = "X") -> list[np.ndarray]:
    """Accept an (N, H, W, 3) array or a sequence of H x W x 3 arrays."""
    if isinstance(X, np.ndarray) and X.ndim == 3:
        X = X[None]
    items = [check_image(x, name=f"{name}[{i}]") for i, x in enumerate(X)]
    if not items:
        raise ValueError(f"{name}: empty image collection")
    return items


def to_nchw(images: list[np.ndarray]) -> np.ndarray:
    return np.stack(images).transpose(0, 3, 1, 2).copy()


def to_hwc(batch: np.ndarray) -> list[np.ndarray]:
    return [np.ascontiguousarray(b.transpose(1, 2, 0)) for b in batch]
