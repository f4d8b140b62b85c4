"""Localized haze augmentation and paired flips.

Rectangles copied from the hazy image onto its clean partner turn a
uniformly hazed pair into a non-homogeneous one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError
from .validation import check_pair


@dataclass(frozen=True)
class PatchSpec:
    top: int
    left: int
    height: int
    width: int

    def slices(self) -> tuple[slice, slice]:
        return slice(self.top, self.top + self.height), slice(self.left, self.left + self.width)


def sample_patches(
    h: int,
    w: int,
    rng: np.random.Generator,
    max_patch: int = 50,
    min_patch: int = 8,
    max_patches: int = 8,
    count: int | None = None,
) -> list[PatchSpec]:
    """Draw ``count`` (default: uniform in [1, max_patches]) i.i.d. rectangles inside an h x w image."""
    if h < min_patch or w < min_patch:
        raise ShapeError(f"image {h}x{w} smaller than the minimum patch size {min_patch}")
    if count is None:
        count = int(rng.integers(1, max_patches + 1)) if max_patches > 0 else 0
    patches = []
    for _ in range(count):
        ph = int(rng.integers(min_patch, min(max_patch, h) + 1))
        pw = int(rng.integers(min_patch, min(max_patch, w) + 1))
        top = int(rng.integers(0, h - ph + 1))
        left = int(rng.integers(0, w - pw + 1))
        patches.append(PatchSpec(top, left, ph, pw))
    return patches


def paste_patches(clean: np.ndarray, hazy: np.ndarray, patches: list[PatchSpec]) -> tuple[np.ndarray, np.ndarray]:
    h, w = clean.shape[:2]
    augmented = clean.copy()
    mask = np.zeros((h, w), dtype=bool)
    for p in patches:
        if p.top < 0 or p.left < 0 or p.top + p.height > h or p.left + p.width > w:
            raise ShapeError(f"patch {p} lies outside the {h}x{w} image")
        mask[p.slices()] = True
    augmented[mask] = hazy[mask]
    return augmented, mask


def glda(
    clean,
    hazy,
    rng: np.random.Generator,
    max_patch: int = 50,
    min_patch: int = 8,
    max_patches: int = 8,
    count: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Return (augmented, mask): hazy inside the union of sampled rectangles, clean elsewhere."""
    clean, hazy = check_pair(clean, hazy, ("clean", "hazy"))
    patches = sample_patches(*clean.shape[:2], rng, max_patch, min_patch, max_patches, count)
    return paste_patches(clean, hazy, patches)


def flip_pair(a: np.ndarray, b: np.ndarray, horizontal: bool, vertical: bool) -> tuple[np.ndarray, np.ndarray]:
    def apply(img):
        if horizontal:
            img = img[:, ::-1]
        if vertical:
            img = img[::-1]
        return np.ascontiguousarray(img)

    return apply(a), apply(b)


def random_flips(a, b, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Apply the same random horizontal/vertical flips (each with p = 0.5) to both images."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape[:2] != b.shape[:2]:
        raise ShapeError(f"paired images differ in size: {a.shape} vs {b.shape}")
    horizontal, vertical = rng.random(2) < 0.5
    return flip_pair(a, b, bool(horizontal), bool(vertical))
