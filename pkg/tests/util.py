"""Shared test helpers: independent oracles and synthetic fixtures.

The oracles here are deliberately written as plain scalar loops, transcribed
straight from the operation definitions, so they share no machinery with the
vectorized implementations they check.
"""
import math

import numpy as np

from esrgcnn.data import ImageRecord
from esrgcnn.kernels import bicubic_resize


# --------------------------------------------------------------------- oracles

def conv_bruteforce(x, weights, bias):
    """Direct-loop 3x3 convolution, stride 1, zero padding 1, float64."""
    n, c, h, w = x.shape
    o = weights.shape[0]
    xp = np.pad(np.asarray(x, dtype=np.float64), ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((n, o, h, w), dtype=np.float64)
    for ni in range(n):
        for oi in range(o):
            for y in range(h):
                for xx in range(w):
                    acc = float(bias[oi])
                    for ci in range(c):
                        for dy in range(3):
                            for dx in range(3):
                                acc += float(weights[oi, ci, dy, dx]) * xp[ni, ci, y + dy, xx + dx]
                    out[ni, oi, y, xx] = acc
    return out


def _keys_cubic(t):
    t = abs(t)
    if t <= 1.0:
        return 1.5 * t ** 3 - 2.5 * t ** 2 + 1.0
    if t <= 2.0:
        return -0.5 * t ** 3 + 2.5 * t ** 2 - 4.0 * t + 2.0
    return 0.0


def _resample_line(line, out_len):
    in_len = len(line)
    scale = out_len / in_len
    widen = 1.0 / scale if scale < 1.0 else 1.0
    width = 4.0 * widen
    taps = int(math.ceil(width)) + 2
    out = np.zeros(out_len, dtype=np.float64)
    for i in range(out_len):
        u = (i + 0.5) / scale - 0.5
        left = math.floor(u - width / 2)
        total = 0.0
        acc = 0.0
        for j in range(left, left + taps):
            wt = _keys_cubic((u - j) / widen) / widen
            total += wt
            acc += wt * line[min(max(j, 0), in_len - 1)]
        out[i] = acc / total
    return out


def bicubic_reference(img, out_h, out_w):
    """Per-pixel direct evaluation of the separable Keys (a=-0.5) resample
    with antialias widening and edge clamping; img is 2-D."""
    img = np.asarray(img, dtype=np.float64)
    tmp = np.stack([_resample_line(img[:, j], out_h) for j in range(img.shape[1])], axis=1)
    return np.stack([_resample_line(tmp[i, :], out_w) for i in range(out_h)], axis=0)


def ssim_reference(a, b):
    """Sliding-window SSIM on 2-D images, one window at a time."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    t = np.arange(11, dtype=np.float64) - 5.0
    k1 = np.exp(-(t * t) / (2 * 1.5 ** 2))
    k1 /= k1.sum()
    win = np.outer(k1, k1)
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2
    h, w = a.shape
    vals = []
    for y in range(h - 10):
        for x in range(w - 10):
            pa = a[y:y + 11, x:x + 11]
            pb = b[y:y + 11, x:x + 11]
            mu1 = float((win * pa).sum())
            mu2 = float((win * pb).sum())
            v1 = float((win * pa * pa).sum()) - mu1 * mu1
            v2 = float((win * pb * pb).sum()) - mu2 * mu2
            cov = float((win * pa * pb).sum()) - mu1 * mu2
            vals.append(((2 * mu1 * mu2 + c1) * (2 * cov + c2))
                        / ((mu1 ** 2 + mu2 ** 2 + c1) * (v1 + v2 + c2)))
    return float(np.mean(vals))


def numeric_grad(loss_fn, arr, h=1e-4):
    """Central finite differences of loss_fn() with respect to every entry of
    *arr* (perturbed in place and restored); arr must be float64."""
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = loss_fn()
        flat[i] = keep - h
        down = loss_fn()
        flat[i] = keep
        gflat[i] = (up - down) / (2 * h)
    return grad


def max_rel_err(approx, exact, floor=1e-8):
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(approx), np.abs(exact)), floor)
    return float(np.max(np.abs(approx - exact) / denom))


# ------------------------------------------------------------------- fixtures

def synth_image(seed, h, w):
    """A textured test image: smooth field + oriented gratings + flat patches.

    The gratings sit near the LR Nyquist limit, so bicubic upscaling loses
    visibly recoverable detail; flat-patch edges add sharp structure.
    """
    rng = np.random.default_rng(seed)
    coarse = rng.random((1, 3, max(2, h // 16), max(2, w // 16))).astype(np.float32)
    img = bicubic_resize(coarse, h, w)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    for _ in range(5):
        fy, fx = rng.uniform(0.8, 2.4, 2)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0.08, 0.2)
        ch = int(rng.integers(3))
        img[0, ch] += (amp * np.sin(fy * yy + fx * xx + phase)).astype(np.float32)
    for _ in range(8):
        y0 = int(rng.integers(0, h - 8))
        x0 = int(rng.integers(0, w - 8))
        hh = int(rng.integers(6, max(7, h // 3)))
        ww = int(rng.integers(6, max(7, w // 3)))
        val = rng.random(3).astype(np.float32)
        img[0, :, y0:y0 + hh, x0:x0 + ww] = (
            0.6 * img[0, :, y0:y0 + hh, x0:x0 + ww] + 0.4 * val[:, None, None])
    np.clip(img, 0.0, 1.0, out=img)
    return img


def synth_records(n, h, w, scales, seed0=100):
    records = []
    for i in range(n):
        hr = synth_image(seed0 + i, h, w)
        records.append(ImageRecord(
            f"img{i}", hr,
            {s: bicubic_resize(hr, h // s, w // s) for s in scales}))
    return records


class ScriptedRng:
    """Stands in for a numpy Generator: integers() replays a fixed script."""

    def __init__(self, values):
        self.values = list(values)

    def integers(self, *_args, **_kwargs):
        return self.values.pop(0)
