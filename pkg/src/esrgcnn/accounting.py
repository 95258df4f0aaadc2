"""Parameter and multiply-accumulate accounting.

Two parameter conventions are reported:

* ``actual`` counts every weight and bias element of the x2 inference path.
* ``paper`` counts weights only and books the x2 upsampling conv as a plain
  square base->base conv.  That square-conv bookkeeping is how the published
  complexity tables arrive at their totals, even though the buildable layer
  must emit base*4 channels for the pixel shuffle; both numbers are exposed
  under explicit convention names rather than silently picking one.

MACs are weight-element-count times output spatial positions, biases
excluded: trunk and first-stage upsampling convs run at LR resolution, the
second x4 stage at 2x, and the reconstruction conv at HR resolution.
"""
from __future__ import annotations

from dataclasses import replace

from .errors import ContractViolation, ValveError
from .model import ModelConfig, model_conv_shapes

_CONVENTIONS = ("actual", "paper")


def _scale2_rows(cfg: ModelConfig) -> list[tuple[str, int, int]]:
    return model_conv_shapes(replace(cfg, scales=(2,)))


def count_params(cfg: ModelConfig, convention: str = "actual") -> int:
    if convention not in _CONVENTIONS:
        raise ContractViolation(f"convention must be one of {_CONVENTIONS}")
    total = 0
    for name, out_c, in_c in _scale2_rows(cfg):
        if convention == "paper":
            if name == "up2":
                out_c = in_c = cfg.base_channels
            total += out_c * in_c * 9
        else:
            total += out_c * in_c * 9 + out_c
    return total


def weight_and_bias_counts(cfg: ModelConfig) -> tuple[int, int]:
    """(weights, biases) of the x2 inference path."""
    rows = _scale2_rows(cfg)
    return (sum(o * i * 9 for _, o, i in rows), sum(o for _, o, _ in rows))


def count_flops(cfg: ModelConfig, lr_h: int, lr_w: int, scale: int) -> int:
    """Multiply-accumulate count for one forward pass at the given LR size."""
    if scale not in cfg.scales:
        raise ValveError(f"scale x{scale} is not configured (config has {cfg.scales})")
    if lr_h < 1 or lr_w < 1:
        raise ContractViolation(f"LR dims must be >= 1, got {(lr_h, lr_w)}")
    total = 0
    for name, out_c, in_c, positions in layer_table(cfg, lr_h, lr_w, scale):
        total += out_c * in_c * 9 * positions
    return total


def layer_table(cfg: ModelConfig, lr_h: int, lr_w: int, scale: int):
    """(name, out_channels, in_channels, output positions) per conv, in order."""
    s = cfg.base_channels
    lr = lr_h * lr_w
    rows = []
    for name, out_c, in_c in model_conv_shapes(replace(cfg, scales=(scale,))):
        if name == "up4.1":
            positions = 4 * lr       # runs after the first x2 shuffle
        elif name == "recon":
            positions = scale * scale * lr
        else:
            positions = lr
        rows.append((name, out_c, in_c, positions))
    return rows


def format_params(n: int) -> str:
    return f"{n:,} ({round(n / 1000):,}K)"


def format_flops(n: int) -> str:
    return f"{n / 1e9:.2f}G ({n:,} MAC)"
