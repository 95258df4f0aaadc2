"""Dev-only calibration for the desk-scale training thresholds (not shipped)."""
import time

import numpy as np

from esrgcnn.data import ImageRecord, sample_batch
from esrgcnn.kernels import bicubic_resize
from esrgcnn.metrics import psnr, rgb_to_y
from esrgcnn.model import ModelConfig, init_model, model_forward
from esrgcnn.training import TrainSchedule, train


def synth_image(seed, h, w):
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
        y0 = int(rng.integers(0, h - 8)); x0 = int(rng.integers(0, w - 8))
        hh = int(rng.integers(6, max(7, h // 3))); ww = int(rng.integers(6, max(7, w // 3)))
        val = rng.random(3).astype(np.float32)
        img[0, :, y0:y0 + hh, x0:x0 + ww] = (
            0.6 * img[0, :, y0:y0 + hh, x0:x0 + ww] + 0.4 * val[:, None, None])
    np.clip(img, 0.0, 1.0, out=img)
    return img


def make_records(n=2, h=192, w=192, scale=2):
    recs = []
    for i in range(n):
        hr = synth_image(100 + i, h, w)
        recs.append(ImageRecord(f"img{i}", hr, {scale: bicubic_resize(hr, h // scale, w // scale)}))
    return recs


def patch_psnrs(params, records, scale, n_patches=16, patch=32, seed=999):
    rng = np.random.default_rng(seed)
    batch = sample_batch(records, scale, n_patches, rng, patch)
    model_vals, bic_vals = [], []
    for i in range(n_patches):
        lr = batch.lr[i:i + 1]
        hr = batch.hr[i:i + 1]
        sr = np.clip(model_forward(params, lr, scale), 0, 1)
        bc = np.clip(bicubic_resize(lr, hr.shape[2], hr.shape[3]), 0, 1)
        model_vals.append(psnr(rgb_to_y(sr), rgb_to_y(hr), scale))
        bic_vals.append(psnr(rgb_to_y(bc), rgb_to_y(hr), scale))
    return float(np.mean(model_vals)), float(np.mean(bic_vals))


def main():
    records = make_records()
    cfg = ModelConfig(base_channels=16, num_gebs=2, scales=(2,), seed=7)
    params = init_model(cfg)

    _, bic = patch_psnrs(params, records, 2)
    print(f"bicubic patch PSNR: {bic:.2f} dB")

    sched = TrainSchedule(base_lr=1e-3, halving_period=10**9, total_steps=300,
                          batch_size=8, patch_size=32)
    t0 = time.time()
    rows = train(params, sched, records, np.random.default_rng([7, 1]))
    dt = time.time() - t0
    print(f"300 steps in {dt:.1f}s ({dt / 300 * 1000:.0f} ms/step)")
    print(f"loss[0]={rows[0][2]:.5f} loss[299]={rows[-1][2]:.5f} "
          f"ratio={rows[-1][2] / rows[0][2]:.3f}")
    m, b = patch_psnrs(params, records, 2)
    print(f"after 300: model {m:.2f} vs bicubic {b:.2f} (gain {m - b:+.2f} dB)")

    for extra in (300, 400, 500, 500):
        sched2 = TrainSchedule(base_lr=1e-3, halving_period=10**9, total_steps=extra,
                               batch_size=8, patch_size=32)
        rows += train(params, sched2, records, np.random.default_rng([8, len(rows)]))
        m, b = patch_psnrs(params, records, 2)
        print(f"after {len(rows)}: model {m:.2f} vs bicubic {b:.2f} (gain {m - b:+.2f} dB)")


if __name__ == "__main__":
    main()
