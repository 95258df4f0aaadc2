"""Corpus ingestion and patch sampling.

HR images come in as 8-bit RGB PNGs, are normalized to [0, 1], cropped so
both dims are divisible by every configured scale, and degraded to LR by
bicubic downscaling.  Training batches are aligned LR/HR patch pairs with
dihedral augmentation (horizontal mirror plus quarter turns), applied
identically to both members of a pair.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ContractViolation, CorpusError
from .kernels import bicubic_resize


def load_image(path) -> np.ndarray:
    """Decode a PNG into a (1, 3, h, w) float32 tensor in [0, 1]."""
    with Image.open(path) as im:
        if im.mode != "RGB":
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float32) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))[None]


def save_image(x: np.ndarray, path) -> None:
    """Clamp-round a (1, 3, h, w) tensor to 8-bit RGB and write a PNG."""
    x = np.asarray(x)
    if x.ndim != 4 or x.shape[0] != 1 or x.shape[1] != 3:
        raise ContractViolation(f"expected a (1, 3, h, w) image tensor, got {x.shape}")
    u8 = np.rint(np.clip(x[0], 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(u8.transpose(1, 2, 0), mode="RGB").save(path, format="PNG")


def mod_crop(x: np.ndarray, multiple: int) -> np.ndarray:
    """Crop height/width down to the nearest multiple."""
    h, w = x.shape[2], x.shape[3]
    return np.ascontiguousarray(x[:, :, :h - h % multiple, :w - w % multiple])


def flip_horizontal(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x[:, :, :, ::-1])


def rotate_quarter(x: np.ndarray, k: int) -> np.ndarray:
    """k counterclockwise 90-degree turns of the spatial plane."""
    return np.ascontiguousarray(np.rot90(x, k, axes=(2, 3)))


@dataclass
class ImageRecord:
    image_id: str
    hr: np.ndarray                       # (1, 3, H, W), [0, 1]
    lr_by_scale: dict = field(default_factory=dict)


@dataclass
class IngestFailure:
    path: str
    reason: str


@dataclass
class PatchBatch:
    scale: int
    lr: np.ndarray                       # (B, 3, p, p)
    hr: np.ndarray                       # (B, 3, p*scale, p*scale)


def ingest_corpus(directory, scales, workers: int = 1):
    """Load every PNG under *directory*, returning (records, failures).

    Per-file problems are collected and ingestion continues; an empty or
    fully unusable corpus is fatal.
    """
    directory = Path(directory)
    scales = tuple(sorted({int(s) for s in scales}))
    if not scales or any(s < 1 for s in scales):
        raise ContractViolation(f"scales must be positive, got {scales}")
    if not directory.is_dir():
        raise CorpusError(f"{directory} is not a directory")
    paths = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".png")
    if not paths:
        raise CorpusError(f"no PNG images under {directory}")
    multiple = math.lcm(*scales)

    def ingest_one(path: Path):
        try:
            hr = load_image(path)
        except Exception as exc:
            return IngestFailure(str(path), str(exc))
        hr = mod_crop(hr, multiple)
        if hr.shape[2] == 0 or hr.shape[3] == 0:
            return IngestFailure(str(path), f"smaller than the {multiple}px crop multiple")
        lr = {s: bicubic_resize(hr, hr.shape[2] // s, hr.shape[3] // s) for s in scales}
        return ImageRecord(path.stem, hr, lr)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(ingest_one, paths))
    else:
        results = [ingest_one(p) for p in paths]
    records = [r for r in results if isinstance(r, ImageRecord)]
    failures = [r for r in results if isinstance(r, IngestFailure)]
    if not records:
        raise CorpusError(f"no usable images under {directory} "
                          f"({len(failures)} file(s) failed)")
    return records, failures


def sample_batch(records, scale: int, batch_size: int, rng: np.random.Generator,
                 patch_size: int = 83) -> PatchBatch:
    """Draw an augmented batch of aligned LR/HR patch pairs.

    Uniform over eligible records and patch origins; the HR patch origin is
    exactly scale times the LR origin.  Deterministic given the generator
    state (draw order: record, y, x, mirror, turns).
    """
    eligible = [r for r in records
                if scale in r.lr_by_scale
                and r.lr_by_scale[scale].shape[2] >= patch_size
                and r.lr_by_scale[scale].shape[3] >= patch_size]
    if not eligible:
        raise CorpusError(
            f"no record has an x{scale} LR of at least {patch_size}x{patch_size}")
    lr_patches, hr_patches = [], []
    for _ in range(batch_size):
        rec = eligible[int(rng.integers(len(eligible)))]
        lr = rec.lr_by_scale[scale]
        y0 = int(rng.integers(lr.shape[2] - patch_size + 1))
        x0 = int(rng.integers(lr.shape[3] - patch_size + 1))
        lp = lr[:, :, y0:y0 + patch_size, x0:x0 + patch_size]
        hp = rec.hr[:, :, scale * y0:scale * (y0 + patch_size),
                    scale * x0:scale * (x0 + patch_size)]
        if rng.integers(2):
            lp, hp = flip_horizontal(lp), flip_horizontal(hp)
        k = int(rng.integers(4))
        if k:
            lp, hp = rotate_quarter(lp, k), rotate_quarter(hp, k)
        lr_patches.append(lp)
        hr_patches.append(hp)
    return PatchBatch(scale,
                      np.ascontiguousarray(np.concatenate(lr_patches)),
                      np.ascontiguousarray(np.concatenate(hr_patches)))
