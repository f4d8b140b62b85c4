"""Neural-network primitives on :class:`Tensor` with hand-written backward passes.

Conventions: NCHW layout, cross-correlation (no kernel flip), zero padding
for convolutions, first-in-scan-order argmax for max pooling.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import ShapeError, Tensor, make_op, needs_grad

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
LEAKY_SLOPE = 0.2


def _require_4d(x: Tensor, op: str) -> None:
    if x.ndim != 4:
        raise ShapeError(f"{op}: expected NCHW input, got shape {x.shape}")


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, pad: int = 0) -> Tensor:
    _require_4d(x, "conv2d")
    n, c, h, w = x.shape
    if weight.ndim != 4 or weight.shape[1] != c:
        raise ShapeError(f"conv2d: kernel {weight.shape} does not match input channels {c}")
    f, _, kh, kw = weight.shape
    if kh > h + 2 * pad or kw > w + 2 * pad:
        raise ShapeError(f"conv2d: kernel {kh}x{kw} larger than padded input {h + 2 * pad}x{w + 2 * pad}")
    if bias is not None and bias.shape != (f,):
        raise ShapeError(f"conv2d: bias shape {bias.shape} != ({f},)")
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    # rows: (n, ho, wo); cols: (c, kh, kw)
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * ho * wo, c * kh * kw)
    wmat = weight.data.reshape(f, -1)
    out = cols @ wmat.T
    if bias is not None:
        out += bias.data
    out = np.ascontiguousarray(out.reshape(n, ho, wo, f).transpose(0, 3, 1, 2))

    def backward(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, f)
        gw = (g2.T @ cols).reshape(weight.shape)
        # column gradients laid out (c, kh, kw, n, ho, wo) so each tap adds a contiguous block
        dcols = (wmat.T @ g2.T).reshape(c, kh, kw, n, ho, wo)
        dxp = np.zeros((c, n, h + 2 * pad, w + 2 * pad))
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += dcols[:, i, j]
        gx = dxp[:, :, pad : pad + h, pad : pad + w] if pad else dxp
        grads = [np.ascontiguousarray(gx.transpose(1, 0, 2, 3)), gw]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return grads

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_op(out, parents, backward, "conv2d")


def reflect_pad(x: Tensor, pad: int) -> Tensor:
    """Mirror padding without edge repetition (``a b c`` -> ``b a b c b``)."""
    _require_4d(x, "reflect_pad")
    n, c, h, w = x.shape
    if pad == 0:
        return x
    if pad >= h or pad >= w:
        raise ShapeError(f"reflect_pad: pad {pad} needs spatial extent > {pad}, got {h}x{w}")
    out = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode="reflect")
    rows = np.pad(np.arange(h), pad, mode="reflect")
    cols = np.pad(np.arange(w), pad, mode="reflect")

    def backward(g):
        gw = np.zeros((n, c, h + 2 * pad, w))
        np.add.at(gw, (slice(None), slice(None), slice(None), cols), g)
        gx = np.zeros((n, c, h, w))
        np.add.at(gx, (slice(None), slice(None), rows), gw)
        return (gx,)

    return make_op(out, (x,), backward, "reflect_pad")


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> Tensor:
    """Per-channel batch normalization over (N, H, W).

    In training mode the running statistics are updated in place
    (unbiased variance, as is conventional).
    """
    _require_4d(x, "batch_norm")
    n, c, h, w = x.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"batch_norm: affine params must have shape ({c},)")
    m = n * h * w
    xd = x.data
    if training:
        if m < 2:
            raise ShapeError("batch_norm: training mode needs at least 2 values per channel")
        mu = xd.mean(axis=(0, 2, 3))
        var = xd.var(axis=(0, 2, 3))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * (m / (m - 1))
    else:
        mu, var = running_mean.copy(), running_var.copy()
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mu[None, :, None, None]) * inv_std[None, :, None, None]
    gd = gamma.data
    out = xhat * gd[None, :, None, None] + beta.data[None, :, None, None]

    def backward(g):
        gbeta = g.sum(axis=(0, 2, 3))
        ggamma = (g * xhat).sum(axis=(0, 2, 3))
        dxhat = g * gd[None, :, None, None]
        if training:
            s1 = dxhat.sum(axis=(0, 2, 3))[None, :, None, None]
            s2 = (dxhat * xhat).sum(axis=(0, 2, 3))[None, :, None, None]
            gx = (inv_std[None, :, None, None] / m) * (m * dxhat - s1 - xhat * s2)
        else:
            gx = dxhat * inv_std[None, :, None, None]
        return gx, ggamma, gbeta

    return make_op(out, (x, gamma, beta), backward, "batch_norm")


def minmax_normalize(x: Tensor) -> Tensor:
    """Rescale each sample (axes 1..) to [0, 1]; a constant sample maps to zeros."""
    n = x.shape[0]
    flat = x.data.reshape(n, -1)
    imin = flat.argmin(axis=1)
    imax = flat.argmax(axis=1)
    lo = flat[np.arange(n), imin]
    rng = flat[np.arange(n), imax] - lo
    live = rng > 0
    safe = np.where(live, rng, 1.0)
    y = np.where(live[:, None], (flat - lo[:, None]) / safe[:, None], 0.0)
    shape = x.shape

    def backward(g):
        g = g.reshape(n, -1)
        gx = g / safe[:, None]
        rows = np.arange(n)
        np.add.at(gx, (rows, imin), (g * (y - 1.0)).sum(axis=1) / safe)
        np.add.at(gx, (rows, imax), -(g * y).sum(axis=1) / safe)
        gx[~live] = 0.0
        return (gx.reshape(shape),)

    return make_op(y.reshape(shape), (x,), backward, "minmax_normalize")


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """out[n, c, h*r + i, w*r + j] = in[n, c*r*r + i*r + j, h, w]."""
    _require_4d(x, "pixel_shuffle")
    n, c, h, w = x.shape
    if c % (r * r):
        raise ShapeError(f"pixel_shuffle: channels {c} not divisible by r^2 = {r * r}")
    co = c // (r * r)
    out = x.data.reshape(n, co, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, co, h * r, w * r)

    def backward(g):
        return (g.reshape(n, co, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(n, c, h, w),)

    return make_op(np.ascontiguousarray(out), (x,), backward, "pixel_shuffle")


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    _require_4d(x, "pixel_unshuffle")
    n, c, h, w = x.shape
    if h % r or w % r:
        raise ShapeError(f"pixel_unshuffle: spatial size {h}x{w} not divisible by {r}")
    ho, wo = h // r, w // r
    out = x.data.reshape(n, c, ho, r, wo, r).transpose(0, 1, 3, 5, 2, 4).reshape(n, c * r * r, ho, wo)

    def backward(g):
        return (g.reshape(n, c, r, r, ho, wo).transpose(0, 1, 4, 2, 5, 3).reshape(n, c, h, w),)

    return make_op(np.ascontiguousarray(out), (x,), backward, "pixel_unshuffle")


def maxpool2d(x: Tensor, size: int) -> Tensor:
    """Non-overlapping max pooling (stride = size, no padding)."""
    _require_4d(x, "maxpool2d")
    n, c, h, w = x.shape
    if h % size or w % size:
        raise ShapeError(f"maxpool2d: spatial size {h}x{w} not divisible by pool size {size}")
    if size == 1:
        return x
    ho, wo = h // size, w // size
    win = x.data.reshape(n, c, ho, size, wo, size).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, size * size)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def backward(g):
        gw = np.zeros((n, c, ho, wo, size * size))
        np.put_along_axis(gw, idx[..., None], g[..., None], axis=-1)
        return (gw.reshape(n, c, ho, wo, size, size).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w),)

    return make_op(out, (x,), backward, "maxpool2d")


def global_avg_pool(x: Tensor) -> Tensor:
    _require_4d(x, "global_avg_pool")
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3), keepdims=True)
    return make_op(out, (x,), lambda g: (np.broadcast_to(g / (h * w), x.shape).copy(),), "global_avg_pool")


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return make_op(x.data * mask, (x,), lambda g: (g * mask,), "relu")


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    factor = np.where(x.data > 0, 1.0, slope)
    return make_op(x.data * factor, (x,), lambda g: (g * factor,), "leaky_relu")


def sigmoid(x: Tensor) -> Tensor:
    xd = x.data
    ez = np.exp(-np.abs(xd))
    out = np.where(xd >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))
    return make_op(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_op(out, (x,), backward, "softmax")


def scale_channels(x: Tensor, s: Tensor) -> Tensor:
    """Multiply each (sample, channel) plane of ``x`` by ``s[n, c]`` (shape (N, C) or (N, C, 1, 1))."""
    _require_4d(x, "scale_channels")
    n, c = x.shape[:2]
    if s.shape not in ((n, c), (n, c, 1, 1)):
        raise ShapeError(f"scale_channels: scale shape {s.shape} incompatible with {x.shape}")
    sd = s.data.reshape(n, c, 1, 1)
    sshape = s.shape
    xd = x.data
    return make_op(
        xd * sd,
        (x, s),
        lambda g: (g * sd, (g * xd).sum(axis=(2, 3)).reshape(sshape)),
        "scale_channels",
    )


# ---------------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------------

ATTENTION_CHUNK = 32


def attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """softmax(q @ k^T over keys) @ v for batched (N, L, D) inputs.

    Chunked over query rows. When a gradient is needed the unnormalized
    exponentials are kept (N * L * L floats) for the backward pass.
    """
    if q.ndim != 3 or k.shape != q.shape or v.ndim != 3 or v.shape[:2] != k.shape[:2]:
        raise ShapeError(f"attention: incompatible shapes {q.shape}, {k.shape}, {v.shape}")
    n, length, _ = q.shape
    qd, kd, vd = q.data, k.data, v.data
    keep = needs_grad(q, k, v)
    expo = np.empty((n, length, length)) if keep else None
    out = np.empty((n, length, vd.shape[2]))
    norm = np.empty((n, length, 1))
    for b in range(n):
        kt = np.ascontiguousarray(kd[b].T)
        for i in range(0, length, ATTENTION_CHUNK):
            sl = slice(i, i + ATTENTION_CHUNK)
            s = qd[b, sl] @ kt
            s -= s.max(axis=-1, keepdims=True)
            e = np.exp(s, out=expo[b, sl] if keep else s)
            z = e.sum(axis=-1, keepdims=True)
            out[b, sl] = (e @ vd[b]) / z
            norm[b, sl] = z

    def backward(g):
        gq = np.empty_like(qd)
        gk = np.zeros_like(kd)
        gv = np.zeros_like(vd)
        for b in range(n):
            # [v^T; 1] lets one product produce dP - rowsum(dP * P)
            vt1 = np.vstack([vd[b].T, np.ones((1, length))])
            for i in range(0, length, ATTENTION_CHUNK):
                sl = slice(i, i + ATTENTION_CHUNK)
                e = expo[b, sl]
                gz = g[b, sl] / norm[b, sl]
                gv[b] += (gz.T @ e).T
                centre = -(g[b, sl] * out[b, sl]).sum(axis=-1, keepdims=True) / norm[b, sl]
                ds = np.hstack([gz, centre]) @ vt1
                ds *= e
                gq[b, sl] = ds @ kd[b]
                gk[b] += (qd[b, sl].T @ ds).T
        return gq, gk, gv

    return make_op(out, (q, k, v), backward, "attention")
