"""Independent reference implementations used by the tests.

Nothing here imports the package's numerical code, so agreement is
evidence rather than tautology.
"""

from __future__ import annotations

import math

import numpy as np

FD_STEP = 1e-5
REL_FLOOR = 1e-6


def relative_error(a, b, floor: float = REL_FLOOR) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def numeric_grad(loss_fn, arrays, index, coords, h: float = FD_STEP) -> np.ndarray:
    """Central differences of ``loss_fn()`` w.r.t. ``arrays[index]`` at flat ``coords``."""
    target = arrays[index]
    flat = target.reshape(-1)
    out = np.empty(len(coords))
    for j, c in enumerate(coords):
        keep = flat[c]
        flat[c] = keep + h
        up = loss_fn()
        flat[c] = keep - h
        down = loss_fn()
        flat[c] = keep
        out[j] = (up - down) / (2 * h)
    return out


def conv2d_loop(x, w, b=None, stride=1, pad=0):
    """Direct nested-loop cross-correlation."""
    n, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    xp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad))
    xp[:, :, pad : pad + h, pad : pad + wd] = x
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((n, f, ho, wo))
    for i in range(n):
        for o in range(f):
            for y in range(ho):
                for z in range(wo):
                    patch = xp[i, :, y * stride : y * stride + kh, z * stride : z * stride + kw]
                    out[i, o, y, z] = np.sum(patch * w[o]) + (b[o] if b is not None else 0.0)
    return out


def softmax_attention(q, k, v):
    s = q @ np.swapaxes(k, -1, -2)
    s = s - s.max(axis=-1, keepdims=True)
    p = np.exp(s)
    p /= p.sum(axis=-1, keepdims=True)
    return p @ v


def psnr_ref(a, b) -> float:
    mse = sum(float(d) ** 2 for d in (np.asarray(a) - np.asarray(b)).ravel()) / a.size
    return 100.0 if mse == 0 else 10 * math.log10(1.0 / mse)


def gaussian_window2d(size=11, sigma=1.5):
    w = np.array([[math.exp(-((i - size // 2) ** 2 + (j - size // 2) ** 2) / (2 * sigma**2)) for j in range(size)]
                  for i in range(size)])
    return w / w.sum()


def ssim_ref(a, b, size=11, sigma=1.5, k1=0.01, k2=0.03) -> float:
    """Per-window SSIM from explicit weighted moments, averaged over valid windows and channels."""
    win = gaussian_window2d(size, sigma)
    c1, c2 = k1**2, k2**2
    h, w, ch = a.shape
    vals = []
    for c in range(ch):
        for y in range(h - size + 1):
            for x in range(w - size + 1):
                pa = a[y : y + size, x : x + size, c]
                pb = b[y : y + size, x : x + size, c]
                ma, mb = np.sum(win * pa), np.sum(win * pb)
                va = np.sum(win * (pa - ma) ** 2)
                vb = np.sum(win * (pb - mb) ** 2)
                cov = np.sum(win * (pa - ma) * (pb - mb))
                vals.append(((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma**2 + mb**2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def adam_trace(grads, lr, b1, b2, eps, p0):
    """Scalar Adam written out term by term."""
    p, m, v = p0, 0.0, 0.0
    out = []
    for t, g in enumerate(grads, 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        p = p - lr * mhat / (math.sqrt(vhat) + eps)
        out.append(p)
    return out
