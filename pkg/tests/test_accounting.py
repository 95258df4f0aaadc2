import pytest

from esrgcnn.accounting import (count_flops, count_params, format_flops,
                                format_params, layer_table, weight_and_bias_counts)
from esrgcnn.errors import ContractViolation, ValveError
from esrgcnn.model import ModelConfig


def test_default_params_both_conventions():
    cfg = ModelConfig()
    # paper convention: weights only, x2 upsampling booked as a 64->64 conv
    assert count_params(cfg, "paper") == 1_238_400
    assert "1,238K" in format_params(count_params(cfg, "paper"))
    # actual: every weight and bias of the buildable x2 path
    assert count_params(cfg, "actual") == 1_351_683
    assert weight_and_bias_counts(cfg) == (1_348_992, 2_691)


def test_default_flops_at_83x83_x2():
    flops = count_flops(ModelConfig(), 83, 83, 2)
    assert flops == 9_328_918_464
    assert format_flops(flops).startswith("9.33G")


def test_ablation_accounting():
    slim = ModelConfig(disable_last_cr=True, disable_wff=True)
    assert count_params(slim, "paper") == 1_201_536
    assert count_flops(slim, 83, 83, 2) == 9_074_962_368
    assert abs(count_flops(slim, 83, 83, 2) - 9.08e9) / 9.08e9 < 0.002

    wide = ModelConfig(disable_last_cr=True, disable_wff=True, disable_group_split=True)
    assert count_params(wide, "paper") == 1_367_424          # reported as 1,367K
    assert abs(count_flops(wide, 83, 83, 2) - 10.21e9) / 10.21e9 < 0.002


def test_last_cr_accounts_for_exactly_one_square_conv():
    full = ModelConfig()
    no_cr = ModelConfig(disable_last_cr=True)
    assert count_params(full, "paper") - count_params(no_cr, "paper") == 36_864


def test_toy_closed_form():
    cfg = ModelConfig(base_channels=8, num_gebs=1)
    head = 3 * 8 * 9
    geb = 8 * 8 * 9 + 3 * (6 * 8 * 9) + 2 * (8 * 8 * 9)
    last_cr = 8 * 8 * 9
    up2_square = 8 * 8 * 9
    recon = 8 * 3 * 9
    assert count_params(cfg, "paper") == head + geb + last_cr + up2_square + recon
    up2_real = 32 * 8 * 9
    weights = head + geb + last_cr + up2_real + recon
    biases = 8 + (8 + 3 * 8 + 2 * 8) + 8 + 32 + 3
    assert count_params(cfg, "actual") == weights + biases


def test_flops_per_scale_resolutions():
    cfg = ModelConfig()
    trunk_w = 1_728 + 6 * 193_536 + 36_864
    up_w = 147_456
    up3_w = 331_776
    recon_w = 1_728
    h = w = 10
    lr = h * w
    assert count_flops(cfg, h, w, 2) == (trunk_w + up_w) * lr + recon_w * 4 * lr
    assert count_flops(cfg, h, w, 3) == (trunk_w + up3_w) * lr + recon_w * 9 * lr
    # second x4 stage runs after the first shuffle, at 2x resolution
    assert count_flops(cfg, h, w, 4) == \
        trunk_w * lr + up_w * lr + up_w * 4 * lr + recon_w * 16 * lr


def test_layer_table_consistency():
    cfg = ModelConfig(base_channels=8, num_gebs=1)
    rows = layer_table(cfg, 5, 7, 4)
    assert sum(o * i * 9 * pos for _, o, i, pos in rows) == count_flops(cfg, 5, 7, 4)
    by_name = {name: pos for name, _, _, pos in rows}
    assert by_name["up4.0"] == 35 and by_name["up4.1"] == 140
    assert by_name["recon"] == 16 * 35


def test_accounting_contracts():
    cfg = ModelConfig(scales=(2,))
    with pytest.raises(ContractViolation):
        count_params(cfg, "bogus")
    with pytest.raises(ValveError):
        count_flops(cfg, 10, 10, 3)
    with pytest.raises(ContractViolation):
        count_flops(cfg, 0, 10, 2)
