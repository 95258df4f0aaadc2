"""Network assembly.

The trunk is a head conv+ReLU followed by a chain of group-enhanced blocks
(GEBs) and an optional smoothing conv+ReLU.  Each GEB splits its lead convs
into a carried three-quarter slice (fused with its predecessor by a residual
add) and a distilled quarter slice (summed across the block), concatenates
the two streams, refines them with two conv+ReLU layers, and adds the block
input back.  A valve then routes the trunk output through one of up to three
pixel-shuffle upsampling heads (x2, x3, x4 = two stacked x2 stages) before a
final reconstruction conv maps back to RGB.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .autodiff import Tape, Var
from .errors import ContractViolation, ValveError

SUPPORTED_SCALES = (2, 3, 4)


@dataclass
class ModelConfig:
    base_channels: int = 64
    num_gebs: int = 6
    scales: tuple = (2, 3, 4)
    disable_wff: bool = False          # keep only the last distilled slice
    disable_last_cr: bool = False      # drop the smoothing conv+ReLU after the blocks
    disable_distilling: bool = False   # lead convs emit only the carried slice
    disable_group_split: bool = False  # lead convs run full-width, no splits
    seed: int = 0

    def __post_init__(self):
        self.scales = tuple(sorted({int(s) for s in self.scales}))
        if self.base_channels <= 0 or self.base_channels % 4:
            raise ContractViolation(
                f"base_channels must be a positive multiple of 4, got {self.base_channels}")
        if self.num_gebs < 1:
            raise ContractViolation(f"num_gebs must be >= 1, got {self.num_gebs}")
        if not self.scales or any(s not in SUPPORTED_SCALES for s in self.scales):
            raise ContractViolation(
                f"scales must be a non-empty subset of {SUPPORTED_SCALES}, got {self.scales}")
        if self.disable_distilling and self.disable_group_split:
            raise ContractViolation(
                "disable_distilling and disable_group_split are mutually exclusive "
                "(removing the split already removes the distilled slice)")


@dataclass
class GebParams:
    conv_in: K.ConvParams
    conv_mid: tuple          # three lead convs following conv_in
    conv_tail: tuple         # two refinement convs


@dataclass
class ModelParams:
    config: ModelConfig
    head: K.ConvParams
    gebs: list
    last_cr: K.ConvParams | None
    up2: K.ConvParams | None
    up3: K.ConvParams | None
    up4: tuple | None
    recon: K.ConvParams


def geb_conv_shapes(cfg: ModelConfig) -> list[tuple[str, int, int]]:
    """(name, out_channels, in_channels) for every conv in one block."""
    s = cfg.base_channels
    r = 3 * s // 4
    if cfg.disable_group_split:
        in_out, mid_out, mid_in, tail0_in = s, s, s, s
    elif cfg.disable_distilling:
        in_out, mid_out, mid_in, tail0_in = r, r, r, r
    else:
        in_out, mid_out, mid_in, tail0_in = s, s, r, s
    rows = [("conv_in", in_out, s)]
    rows += [(f"conv_mid{i}", mid_out, mid_in) for i in range(3)]
    rows += [("conv_tail0", s, tail0_in), ("conv_tail1", s, s)]
    return rows


def model_conv_shapes(cfg: ModelConfig) -> list[tuple[str, int, int]]:
    """(name, out_channels, in_channels) for every conv in the model."""
    s = cfg.base_channels
    rows = [("head", s, 3)]
    for j in range(cfg.num_gebs):
        rows += [(f"geb{j}.{name}", o, i) for name, o, i in geb_conv_shapes(cfg)]
    if not cfg.disable_last_cr:
        rows.append(("last_cr", s, s))
    for sc in cfg.scales:
        if sc == 2:
            rows.append(("up2", 4 * s, s))
        elif sc == 3:
            rows.append(("up3", 9 * s, s))
        else:
            rows += [("up4.0", 4 * s, s), ("up4.1", 4 * s, s)]
    rows.append(("recon", 3, s))
    return rows


def assemble_params(cfg: ModelConfig, convs: dict) -> ModelParams:
    """Build a ModelParams from a name -> ConvParams mapping (see model_conv_shapes)."""
    gebs = [GebParams(
        conv_in=convs[f"geb{j}.conv_in"],
        conv_mid=tuple(convs[f"geb{j}.conv_mid{i}"] for i in range(3)),
        conv_tail=tuple(convs[f"geb{j}.conv_tail{i}"] for i in range(2)),
    ) for j in range(cfg.num_gebs)]
    return ModelParams(
        config=cfg,
        head=convs["head"],
        gebs=gebs,
        last_cr=convs.get("last_cr"),
        up2=convs.get("up2"),
        up3=convs.get("up3"),
        up4=(convs["up4.0"], convs["up4.1"]) if "up4.0" in convs else None,
        recon=convs["recon"],
    )


def init_model(cfg: ModelConfig) -> ModelParams:
    """He-style initialization, fully determined by cfg.seed; biases zero."""
    rng = np.random.default_rng(cfg.seed)
    convs = {}
    for name, out_c, in_c in model_conv_shapes(cfg):
        std = math.sqrt(2.0 / (in_c * 9))
        w = rng.normal(0.0, std, size=(out_c, in_c, 3, 3)).astype(np.float32)
        convs[name] = K.ConvParams(w, np.zeros(out_c, dtype=np.float32))
    return assemble_params(cfg, convs)


def iter_convs(params: ModelParams):
    """Yield (name, ConvParams) in the canonical serialization order."""
    yield "head", params.head
    for j, geb in enumerate(params.gebs):
        yield f"geb{j}.conv_in", geb.conv_in
        for i, m in enumerate(geb.conv_mid):
            yield f"geb{j}.conv_mid{i}", m
        for i, t in enumerate(geb.conv_tail):
            yield f"geb{j}.conv_tail{i}", t
    if params.last_cr is not None:
        yield "last_cr", params.last_cr
    if params.up2 is not None:
        yield "up2", params.up2
    if params.up3 is not None:
        yield "up3", params.up3
    if params.up4 is not None:
        yield "up4.0", params.up4[0]
        yield "up4.1", params.up4[1]
    yield "recon", params.recon


def named_params(params: ModelParams) -> list[tuple[str, np.ndarray]]:
    """Flat (name, array) view of every weight and bias tensor."""
    out = []
    for name, conv in iter_convs(params):
        out.append((f"{name}.weight", conv.weights))
        out.append((f"{name}.bias", conv.bias))
    return out


# --------------------------------------------------------------------- forward
#
# The composition below is written once against an "ops" provider so that the
# eager path and the recorded (tape) path cannot drift apart.

class _Eager:
    @staticmethod
    def conv2d(x, p, name):
        return K.conv2d_forward(x, p)

    relu = staticmethod(K.relu)
    add = staticmethod(K.add)
    concat = staticmethod(K.concat_channels)
    split = staticmethod(K.split_channels)
    pixel_shuffle = staticmethod(K.pixel_shuffle)


_EAGER = _Eager()


def _geb_apply(ops, geb: GebParams, x, cfg: ModelConfig, tag: str):
    q3 = 3 * cfg.base_channels // 4
    if cfg.disable_group_split or cfg.disable_distilling:
        t = ops.conv2d(x, geb.conv_in, f"{tag}.conv_in")
        for i, mid in enumerate(geb.conv_mid):
            t = ops.add(t, ops.conv2d(ops.relu(t), mid, f"{tag}.conv_mid{i}"))
        fused = t
    else:
        t = ops.conv2d(x, geb.conv_in, f"{tag}.conv_in")
        carry, acc = ops.split(t, q3)
        for i, mid in enumerate(geb.conv_mid):
            u = ops.conv2d(ops.relu(carry), mid, f"{tag}.conv_mid{i}")
            grown, distilled = ops.split(u, q3)
            carry = ops.add(carry, grown)
            acc = distilled if cfg.disable_wff else ops.add(acc, distilled)
        fused = ops.concat(carry, acc)
    ef = ops.relu(fused)
    mid = ops.relu(ops.conv2d(ef, geb.conv_tail[0], f"{tag}.conv_tail0"))
    df = ops.relu(ops.conv2d(mid, geb.conv_tail[1], f"{tag}.conv_tail1"))
    return ops.add(df, x)


def _trunk_apply(ops, params: ModelParams, x):
    g = ops.relu(ops.conv2d(x, params.head, "head"))
    for j, geb in enumerate(params.gebs):
        g = _geb_apply(ops, geb, g, params.config, f"geb{j}")
    if params.last_cr is not None:
        g = ops.relu(ops.conv2d(g, params.last_cr, "last_cr"))
    return g


def _upsample_apply(ops, params: ModelParams, feat, scale: int):
    if scale == 2:
        u = ops.pixel_shuffle(ops.conv2d(feat, params.up2, "up2"), 2)
    elif scale == 3:
        u = ops.pixel_shuffle(ops.conv2d(feat, params.up3, "up3"), 3)
    else:
        u = ops.pixel_shuffle(ops.conv2d(feat, params.up4[0], "up4.0"), 2)
        u = ops.pixel_shuffle(ops.conv2d(u, params.up4[1], "up4.1"), 2)
    return ops.conv2d(u, params.recon, "recon")


def _check_scale(params: ModelParams, scale: int):
    if scale not in params.config.scales:
        raise ValveError(
            f"scale x{scale} is not configured (model has {params.config.scales})")


def _check_rgb(x):
    x = np.asarray(x)
    if x.ndim != 4 or x.shape[1] != 3:
        raise ContractViolation(f"model input must be (n, 3, h, w), got {x.shape}")
    return x


def geb_forward(geb: GebParams, x, cfg: ModelConfig):
    """One block, eagerly."""
    x = np.asarray(x)
    if x.ndim != 4 or x.shape[1] != cfg.base_channels:
        raise ContractViolation(
            f"block input must be (n, {cfg.base_channels}, h, w), got {x.shape}")
    return _geb_apply(_EAGER, geb, x, cfg, "geb")


def trunk_forward(params: ModelParams, x):
    """Head + blocks (+ smoothing conv); identical for every scale."""
    return _trunk_apply(_EAGER, params, _check_rgb(x))


def upsample_forward(params: ModelParams, feat, scale: int):
    """Valve: route trunk features through one upsampling head + reconstruction."""
    _check_scale(params, scale)
    return _upsample_apply(_EAGER, params, feat, scale)


def model_forward(params: ModelParams, x, scale: int):
    """LR RGB in, scale-times-larger RGB out."""
    x = _check_rgb(x)
    _check_scale(params, scale)
    return _upsample_apply(_EAGER, params, _trunk_apply(_EAGER, params, x), scale)


def record_forward(tape: Tape, params: ModelParams, x, scale: int) -> Var:
    """Record the full forward pass on *tape*; returns the output Var."""
    x = _check_rgb(x)
    _check_scale(params, scale)
    xv = tape.input(x)
    return _upsample_apply(tape, params, _trunk_apply(tape, params, xv), scale)


def record_forward_multi(tape: Tape, params: ModelParams, x, scales) -> dict[int, Var]:
    """Record the trunk once and every requested upsampling branch on *tape*."""
    x = _check_rgb(x)
    for s in scales:
        _check_scale(params, s)
    feat = _trunk_apply(tape, params, tape.input(x))
    return {s: _upsample_apply(tape, params, feat, s) for s in scales}
