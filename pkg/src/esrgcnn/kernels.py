"""Dense NCHW tensor kernels.

Everything here operates on 4-D float arrays shaped (batch, channels,
height, width), float32 in normal operation.  Each forward kernel has an
exact adjoint so the whole network can be differentiated by composition.
Convolutions are fixed at 3x3, stride 1, zero padding 1, which keeps
spatial size unchanged and makes every residual add shape-consistent.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .errors import ContractViolation

# Conventional alias: a Tensor is a 4-D NCHW ndarray.
Tensor = np.ndarray


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ContractViolation(msg)


def _check_4d(x, what: str = "tensor") -> Tensor:
    x = np.asarray(x)
    _require(x.ndim == 4, f"{what} must be 4-D NCHW, got {x.ndim}-D shape {x.shape}")
    return x


@dataclass
class ConvParams:
    """One 3x3 convolution layer: weights (out_c, in_c, 3, 3) plus bias (out_c,)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights)
        b = np.asarray(self.bias)
        _require(w.ndim == 4 and w.shape[2:] == (3, 3),
                 f"conv kernel must be (out, in, 3, 3), got {w.shape}")
        _require(b.ndim == 1 and b.shape[0] == w.shape[0],
                 f"bias length {b.shape} must equal out_channels {w.shape[0]}")
        self.weights = w
        self.bias = b

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]


def _pad1(x: Tensor) -> Tensor:
    n, c, h, w = x.shape
    out = np.zeros((n, c, h + 2, w + 2), dtype=x.dtype)
    out[:, :, 1:-1, 1:-1] = x
    return out


def _windows3(xp: Tensor, h: int, w: int) -> Tensor:
    # All 3x3 neighborhoods of the padded input as a strided view
    # shaped (n, c, 3, 3, h, w); no data is copied here.
    sn, sc, sh, sw = xp.strides
    return as_strided(xp, (xp.shape[0], xp.shape[1], 3, 3, h, w),
                      (sn, sc, sh, sw, sh, sw))


def conv2d_forward(x: Tensor, p: ConvParams) -> Tensor:
    """3x3 convolution (cross-correlation), stride 1, zero padding 1.

    Output has the same spatial size as the input and p.out_channels channels.
    """
    x = _check_4d(x, "conv input")
    n, c, h, w = x.shape
    _require(c == p.in_channels,
             f"conv expects {p.in_channels} input channels, got {c}")
    _require(h > 0 and w > 0, f"conv input has zero-sized spatial dims {(h, w)}")
    win = _windows3(_pad1(x), h, w)
    out = np.tensordot(p.weights, win, axes=([1, 2, 3], [1, 2, 3]))  # (o, n, h, w)
    out = np.ascontiguousarray(out.transpose(1, 0, 2, 3))
    out += p.bias.reshape(1, -1, 1, 1)
    return out


def conv2d_backward(x: Tensor, p: ConvParams, grad_out: Tensor):
    """Exact adjoints of conv2d_forward: (grad_x, grad_w, grad_b)."""
    x = _check_4d(x, "conv input")
    grad_out = _check_4d(grad_out, "grad_out")
    n, c, h, w = x.shape
    _require(c == p.in_channels,
             f"conv expects {p.in_channels} input channels, got {c}")
    _require(grad_out.shape == (n, p.out_channels, h, w),
             f"grad_out shape {grad_out.shape} does not match forward output "
             f"{(n, p.out_channels, h, w)}")
    win = _windows3(_pad1(x), h, w)
    grad_w = np.tensordot(grad_out, win, axes=([0, 2, 3], [0, 4, 5]))
    grad_b = grad_out.sum(axis=(0, 2, 3))
    # grad wrt input = correlation of grad_out with the spatially flipped,
    # in/out-transposed kernel, same padding.
    w_t = np.ascontiguousarray(p.weights[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    gwin = _windows3(_pad1(grad_out), h, w)
    grad_x = np.tensordot(w_t, gwin, axes=([1, 2, 3], [1, 2, 3]))
    grad_x = np.ascontiguousarray(grad_x.transpose(1, 0, 2, 3))
    return grad_x, grad_w, grad_b


def relu(x: Tensor) -> Tensor:
    return np.maximum(x, 0)


def relu_backward(x: Tensor, grad_out: Tensor) -> Tensor:
    """Gradient gate: passes grad where x > 0.  Exact zeros pass zero."""
    x = np.asarray(x)
    grad_out = np.asarray(grad_out)
    _require(x.shape == grad_out.shape,
             f"grad_out shape {grad_out.shape} does not match input {x.shape}")
    return grad_out * (x > 0)


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = np.asarray(a), np.asarray(b)
    _require(a.shape == b.shape, f"add requires identical dims, got {a.shape} vs {b.shape}")
    return a + b


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    a, b = _check_4d(a, "concat lhs"), _check_4d(b, "concat rhs")
    _require(a.shape[0] == b.shape[0] and a.shape[2:] == b.shape[2:],
             f"concat requires matching batch/spatial dims, got {a.shape} vs {b.shape}")
    return np.concatenate((a, b), axis=1)


def split_channels(x: Tensor, k: int):
    """Split into the first k channels and the rest; inverse of concat_channels."""
    x = _check_4d(x, "split input")
    _require(0 <= k <= x.shape[1], f"split point {k} outside [0, {x.shape[1]}]")
    return np.ascontiguousarray(x[:, :k]), np.ascontiguousarray(x[:, k:])


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Rearrange (n, c*r^2, h, w) -> (n, c, h*r, w*r); values are only moved."""
    x = _check_4d(x, "shuffle input")
    n, c, h, w = x.shape
    _require(r >= 1, f"scale factor must be >= 1, got {r}")
    _require(c % (r * r) == 0, f"{c} channels not divisible by {r}^2")
    co = c // (r * r)
    out = x.reshape(n, co, r, r, h, w).transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(out.reshape(n, co, h * r, w * r))


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """Exact inverse of pixel_shuffle: (n, c, h*r, w*r) -> (n, c*r^2, h, w)."""
    x = _check_4d(x, "unshuffle input")
    n, c, h, w = x.shape
    _require(r >= 1, f"scale factor must be >= 1, got {r}")
    _require(h % r == 0 and w % r == 0,
             f"spatial dims {(h, w)} not divisible by {r}")
    out = x.reshape(n, c, h // r, r, w // r, r).transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(out.reshape(n, c * r * r, h // r, w // r))


def _cubic(t: np.ndarray) -> np.ndarray:
    # Keys cubic kernel with a = -0.5, support [-2, 2].
    t = np.abs(t)
    t2 = t * t
    t3 = t2 * t
    return np.where(t <= 1.0, 1.5 * t3 - 2.5 * t2 + 1.0,
                    np.where(t <= 2.0, -0.5 * t3 + 2.5 * t2 - 4.0 * t + 2.0, 0.0))


def _contributions(in_len: int, out_len: int):
    # Align-centers mapping; when downscaling the kernel is widened by the
    # scale ratio (antialiasing).  Source indices are clamped at the edges
    # and the weights renormalized to sum to one.
    scale = out_len / in_len
    u = (np.arange(out_len, dtype=np.float64) + 0.5) / scale - 0.5
    if scale < 1.0:
        width = 4.0 / scale
        kern = lambda t: scale * _cubic(scale * t)  # noqa: E731
    else:
        width = 4.0
        kern = _cubic
    left = np.floor(u - width / 2).astype(np.int64)
    taps = int(np.ceil(width)) + 2
    idx = left[:, None] + np.arange(taps)[None, :]
    wts = kern(u[:, None] - idx)
    wts = wts / wts.sum(axis=1, keepdims=True)
    return np.clip(idx, 0, in_len - 1), wts


def bicubic_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Separable bicubic resampling to (out_h, out_w), antialiased on downscale."""
    x = _check_4d(x, "resize input")
    _require(out_h >= 1 and out_w >= 1, f"output dims must be >= 1, got {(out_h, out_w)}")
    _require(x.shape[2] > 0 and x.shape[3] > 0,
             f"resize input has zero-sized spatial dims {x.shape[2:]}")
    dtype = x.dtype
    y = x.astype(np.float64, copy=False)
    idx, wts = _contributions(x.shape[2], out_h)
    y = np.einsum("op,ncopw->ncow", wts, y[:, :, idx, :])
    idx, wts = _contributions(x.shape[3], out_w)
    y = np.einsum("op,nchop->ncho", wts, y[:, :, :, idx])
    return y.astype(dtype, copy=False)
