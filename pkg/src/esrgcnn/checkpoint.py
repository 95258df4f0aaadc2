"""Binary checkpoint serialization.

Little-endian layout: magic ``ESRG``, u32 version, u32 config-JSON length,
the UTF-8 JSON config, u32 tensor count, then per tensor a u16 name length,
the UTF-8 name, a u8 rank, rank u32 dims, and the float32 payload.  No
padding anywhere, so a save/load/save round trip is byte-identical.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import ContractViolation
from .kernels import ConvParams
from .model import ModelConfig, ModelParams, assemble_params, model_conv_shapes, named_params

MAGIC = b"ESRG"
VERSION = 1
_MAX_ELEMENTS = 1 << 31


class CheckpointError(RuntimeError):
    """Checkpoint file could not be read."""


class CheckpointMagicError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class CheckpointDimOverflowError(CheckpointError):
    pass


class CheckpointFormatError(CheckpointError):
    pass


def save_checkpoint(params: ModelParams, path) -> None:
    cfg = params.config
    blob = json.dumps(asdict(cfg), sort_keys=True).encode("utf-8")
    tensors = named_params(params)
    parts = [MAGIC, struct.pack("<I", VERSION),
             struct.pack("<I", len(blob)), blob,
             struct.pack("<I", len(tensors))]
    for name, arr in tensors:
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointTruncatedError(
                f"file ends at byte {len(self.buf)}, needed {n} more at offset {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_checkpoint(path) -> tuple[ModelParams, ModelConfig]:
    reader = _Reader(Path(path).read_bytes())
    magic = reader.take(4)
    if magic != MAGIC:
        raise CheckpointMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = reader.u32()
    if version != VERSION:
        raise CheckpointVersionError(f"unsupported version {version}, expected {VERSION}")
    blob = reader.take(reader.u32())
    try:
        fields = json.loads(blob.decode("utf-8"))
        cfg = ModelConfig(**{**fields, "scales": tuple(fields["scales"])})
    except (ValueError, TypeError, KeyError, ContractViolation) as exc:
        raise CheckpointFormatError(f"invalid config blob: {exc}") from exc

    tensors: dict[str, np.ndarray] = {}
    for _ in range(reader.u32()):
        try:
            name = reader.take(reader.u16()).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointFormatError(f"tensor name is not UTF-8: {exc}") from exc
        rank = reader.u8()
        if rank not in (1, 4):
            raise CheckpointFormatError(f"tensor {name!r} has unsupported rank {rank}")
        dims = struct.unpack(f"<{rank}I", reader.take(4 * rank))
        count = 1
        for d in dims:
            count *= d
        if count > _MAX_ELEMENTS:
            raise CheckpointDimOverflowError(
                f"tensor {name!r} dims {dims} exceed {_MAX_ELEMENTS} elements")
        data = reader.take(4 * count)
        if name in tensors:
            raise CheckpointFormatError(f"duplicate tensor name {name!r}")
        tensors[name] = np.frombuffer(data, dtype="<f4").reshape(dims).copy()
    if reader.pos != len(reader.buf):
        raise CheckpointFormatError(
            f"{len(reader.buf) - reader.pos} trailing bytes after last tensor")

    convs = {}
    for name, out_c, in_c in model_conv_shapes(cfg):
        try:
            weights = tensors.pop(f"{name}.weight")
            bias = tensors.pop(f"{name}.bias")
        except KeyError as exc:
            raise CheckpointFormatError(f"missing tensor for layer {name!r}") from exc
        if weights.shape != (out_c, in_c, 3, 3) or bias.shape != (out_c,):
            raise CheckpointFormatError(
                f"layer {name!r} has shape {weights.shape}/{bias.shape}, "
                f"expected {(out_c, in_c, 3, 3)}/{(out_c,)}")
        convs[name] = ConvParams(weights, bias)
    if tensors:
        raise CheckpointFormatError(f"unexpected tensors: {sorted(tensors)}")
    return assemble_params(cfg, convs), cfg
