"""Y-channel PSNR and SSIM with the border-shave evaluation protocol.

RGB in [0, 1] is converted to the BT.601 studio-swing luma channel
(16..235), both images are cropped by the shave width on every border, and
the metrics run on the 0..255 scale.  SSIM uses the standard 11x11 Gaussian
window (sigma 1.5, K1 0.01, K2 0.03) over valid window positions only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation
from .kernels import bicubic_resize
from .model import ModelParams, model_forward

_Y_COEFFS = np.array([65.481, 128.553, 24.966], dtype=np.float64)
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_C1 = (0.01 * 255.0) ** 2
_C2 = (0.03 * 255.0) ** 2


def rgb_to_y(x: np.ndarray) -> np.ndarray:
    """(n, 3, h, w) RGB in [0, 1] -> (n, 1, h, w) luma in [16, 235]."""
    x = np.asarray(x)
    if x.ndim != 4 or x.shape[1] != 3:
        raise ContractViolation(f"expected (n, 3, h, w), got {x.shape}")
    y = 16.0 + np.einsum("c,nchw->nhw", _Y_COEFFS, x.astype(np.float64))
    return y[:, None].astype(np.float32)


def _shaved_pair(a, b, shave):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ContractViolation(f"shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 4:
        raise ContractViolation(f"expected 4-D tensors, got {a.ndim}-D")
    h, w = a.shape[2], a.shape[3]
    if shave < 0 or 2 * shave >= h or 2 * shave >= w:
        raise ContractViolation(f"shave {shave} leaves no pixels of {(h, w)}")
    if shave:
        a = a[:, :, shave:h - shave, shave:w - shave]
        b = b[:, :, shave:h - shave, shave:w - shave]
    return a.astype(np.float64), b.astype(np.float64)


def psnr(a: np.ndarray, b: np.ndarray, shave: int = 0) -> float:
    """Peak signal-to-noise ratio in dB on the 0..255 scale; inf when equal."""
    a, b = _shaved_pair(a, b, shave)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def _gauss_window() -> np.ndarray:
    t = np.arange(_SSIM_WINDOW, dtype=np.float64) - (_SSIM_WINDOW - 1) / 2
    w = np.exp(-(t * t) / (2 * _SSIM_SIGMA ** 2))
    return w / w.sum()


def _window_mean(img: np.ndarray, k: np.ndarray) -> np.ndarray:
    # Separable weighted mean over every valid window position.
    n = len(k)
    h, w = img.shape
    tmp = np.zeros((h - n + 1, w), dtype=np.float64)
    for i in range(n):
        tmp += k[i] * img[i:h - n + 1 + i, :]
    out = np.zeros((h - n + 1, w - n + 1), dtype=np.float64)
    for j in range(n):
        out += k[j] * tmp[:, j:w - n + 1 + j]
    return out


def _ssim_plane(a: np.ndarray, b: np.ndarray, k: np.ndarray) -> float:
    mu1 = _window_mean(a, k)
    mu2 = _window_mean(b, k)
    s11 = _window_mean(a * a, k) - mu1 * mu1
    s22 = _window_mean(b * b, k) - mu2 * mu2
    s12 = _window_mean(a * b, k) - mu1 * mu2
    num = (2 * mu1 * mu2 + _C1) * (2 * s12 + _C2)
    den = (mu1 * mu1 + mu2 * mu2 + _C1) * (s11 + s22 + _C2)
    return float(np.mean(num / den))


def ssim(a: np.ndarray, b: np.ndarray, shave: int = 0) -> float:
    """Mean structural similarity over valid 11x11 Gaussian windows."""
    a, b = _shaved_pair(a, b, shave)
    if a.shape[2] < _SSIM_WINDOW or a.shape[3] < _SSIM_WINDOW:
        raise ContractViolation(
            f"image {a.shape[2:]} too small for the {_SSIM_WINDOW}x{_SSIM_WINDOW} window")
    k = _gauss_window()
    vals = [_ssim_plane(a[i, c], b[i, c], k)
            for i in range(a.shape[0]) for c in range(a.shape[1])]
    return float(np.mean(vals))


# ------------------------------------------------------------------ reporting

@dataclass
class ImageScore:
    image_id: str
    psnr: float
    ssim: float
    error: str | None = None


@dataclass
class MetricReport:
    scale: int
    shave: int
    rows: list
    mean_psnr: float
    mean_ssim: float
    n: int

    def aggregate(self) -> dict:
        return {"scale": self.scale, "shave": self.shave,
                "mean_psnr": self.mean_psnr, "mean_ssim": self.mean_ssim,
                "n": self.n}


def evaluate(records, scale: int, sr_fn, shave: int | None = None) -> MetricReport:
    """Score sr_fn(record) against each record's HR on the Y channel.

    SR output is clamped to [0, 1] before conversion; shave defaults to the
    scale.  Per-image failures land in the report instead of aborting.
    """
    shave = scale if shave is None else shave
    rows = []
    for rec in sorted(records, key=lambda r: r.image_id):
        try:
            sr = np.clip(sr_fn(rec), 0.0, 1.0)
            y_sr = rgb_to_y(sr)
            y_hr = rgb_to_y(rec.hr)
            rows.append(ImageScore(rec.image_id,
                                   psnr(y_sr, y_hr, shave),
                                   ssim(y_sr, y_hr, shave)))
        except Exception as exc:
            rows.append(ImageScore(rec.image_id, math.nan, math.nan, str(exc)))
    scored = [r for r in rows if r.error is None]
    mean_psnr = float(np.mean([r.psnr for r in scored])) if scored else math.nan
    mean_ssim = float(np.mean([r.ssim for r in scored])) if scored else math.nan
    return MetricReport(scale, shave, rows, mean_psnr, mean_ssim, len(scored))


def evaluate_bicubic(records, scale: int, shave: int | None = None) -> MetricReport:
    def upscale(rec):
        return bicubic_resize(rec.lr_by_scale[scale],
                              rec.hr.shape[2], rec.hr.shape[3])
    return evaluate(records, scale, upscale, shave)


def evaluate_model(params: ModelParams, records, scale: int,
                   shave: int | None = None) -> MetricReport:
    def upscale(rec):
        return model_forward(params, rec.lr_by_scale[scale], scale)
    return evaluate(records, scale, upscale, shave)


def write_report_csv(report: MetricReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id,psnr,ssim\n")
        for row in report.rows:
            fh.write(f"{row.image_id},{row.psnr!r},{row.ssim!r}\n")
