import math

import numpy as np
import pytest

from esrgcnn.errors import ContractViolation
from esrgcnn.metrics import (evaluate, evaluate_bicubic, evaluate_model, psnr,
                             rgb_to_y, ssim, write_report_csv)
from esrgcnn.model import ModelConfig, init_model, named_params
from util import ssim_reference, synth_records


def flat_rgb(r, g, b):
    img = np.zeros((1, 3, 4, 4), dtype=np.float32)
    img[0, 0], img[0, 1], img[0, 2] = r, g, b
    return img


def test_rgb_to_y_reference_colors():
    assert np.allclose(rgb_to_y(flat_rgb(1, 1, 1)), 235.0, atol=1e-4)
    assert np.allclose(rgb_to_y(flat_rgb(0, 0, 0)), 16.0, atol=1e-4)
    assert np.allclose(rgb_to_y(flat_rgb(0, 1, 0)), 144.553, atol=1e-3)
    with pytest.raises(ContractViolation):
        rgb_to_y(np.zeros((1, 1, 4, 4), dtype=np.float32))


def test_psnr_reference_values():
    a = np.random.default_rng(0).uniform(50, 200, (1, 1, 24, 24)).astype(np.float32)
    assert psnr(a, a.copy()) == math.inf
    # constant offset of 16 gray levels, closed form 20*log10(255/16)
    assert abs(psnr(a, a + 16.0) - 20 * math.log10(255 / 16)) <= 1e-3
    b = np.zeros_like(a)
    assert abs(psnr(b, b + 255.0)) <= 1e-9
    assert psnr(a, a + 7.0, shave=3) == psnr(a + 7.0, a, shave=3)


def test_psnr_decreases_with_noise():
    rng = np.random.default_rng(1)
    base = np.full((1, 1, 32, 32), 128.0, dtype=np.float32)
    values = []
    for amp in (4.0, 16.0, 64.0):
        noisy = base + rng.uniform(-amp, amp, base.shape).astype(np.float32)
        values.append(psnr(base, noisy))
    assert values[0] > values[1] > values[2]


def test_psnr_shave_contract():
    a = np.zeros((1, 1, 8, 8), dtype=np.float32)
    with pytest.raises(ContractViolation):
        psnr(a, a, shave=4)
    with pytest.raises(ContractViolation):
        psnr(a, np.zeros((1, 1, 8, 9), dtype=np.float32))


def test_ssim_self_is_exactly_one():
    a = np.random.default_rng(2).uniform(16, 235, (1, 1, 20, 20)).astype(np.float32)
    assert ssim(a, a.copy()) == 1.0


def test_ssim_inverted_texture_is_low():
    a = np.random.default_rng(3).uniform(16, 235, (1, 1, 24, 24)).astype(np.float32)
    assert ssim(a, 255.0 - a) < 0.5


def test_ssim_matches_sliding_window_reference():
    rng = np.random.default_rng(4)
    a = rng.uniform(0, 255, (1, 1, 16, 16)).astype(np.float32)
    b = np.clip(a + rng.normal(0, 20, a.shape), 0, 255).astype(np.float32)
    ours = ssim(a, b)
    ref = ssim_reference(a[0, 0], b[0, 0])
    assert abs(ours - ref) <= 1e-6
    assert ssim(a, b) == ssim(b, a)


def test_ssim_too_small_after_shave():
    a = np.zeros((1, 1, 14, 14), dtype=np.float32)
    with pytest.raises(ContractViolation):
        ssim(a, a, shave=2)


# ------------------------------------------------------------------ evaluate

def test_bicubic_evaluate_aggregates(tmp_path):
    records = synth_records(3, 48, 48, (2, 4))
    report = evaluate_bicubic(records, 2)
    assert report.shave == 2 and report.n == 3
    assert report.mean_psnr == pytest.approx(
        np.mean([r.psnr for r in report.rows]))
    assert all(-1.0 <= r.ssim <= 1.0 for r in report.rows)
    assert [r.image_id for r in report.rows] == sorted(r.image_id for r in report.rows)
    csv_path = tmp_path / "report.csv"
    write_report_csv(report, csv_path)
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "id,psnr,ssim" and len(lines) == 4
    assert report.aggregate() == {"scale": 2, "shave": 2,
                                  "mean_psnr": report.mean_psnr,
                                  "mean_ssim": report.mean_ssim, "n": 3}


def test_zero_model_evaluates_without_crash():
    records = synth_records(1, 32, 32, (2,))
    params = init_model(ModelConfig(base_channels=8, num_gebs=1, scales=(2,), seed=5))
    for _, arr in named_params(params):
        arr[...] = 0
    report = evaluate_model(params, records, 2)
    assert report.n == 1
    assert math.isfinite(report.mean_psnr) and report.mean_psnr > 0


def test_per_image_errors_do_not_abort():
    records = synth_records(2, 48, 48, (2,))
    tiny = synth_records(1, 12, 12, (2,), seed0=50)[0]   # too small for SSIM window
    tiny.image_id = "zzz_tiny"
    report = evaluate_bicubic(records + [tiny], 2)
    assert report.n == 2
    failed = [r for r in report.rows if r.error is not None]
    assert len(failed) == 1 and failed[0].image_id == "zzz_tiny"
    assert math.isfinite(report.mean_psnr)


def test_model_better_than_nothing_on_identity_mapping():
    # x2 bicubic should comfortably beat x4 on the same corpus
    records = synth_records(2, 64, 64, (2, 4))
    assert evaluate_bicubic(records, 2).mean_psnr > evaluate_bicubic(records, 4).mean_psnr
