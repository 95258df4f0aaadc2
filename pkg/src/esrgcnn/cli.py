"""Command-line surface: train, super-resolve, evaluate, inspect.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  The ESRG_THREADS
environment variable caps ingestion worker threads (default 1, which keeps
runs deterministic).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .accounting import (count_flops, count_params, format_flops, format_params,
                         layer_table, weight_and_bias_counts)
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .data import ingest_corpus, load_image, save_image
from .errors import ContractViolation, CorpusError, TrainingDiverged, ValveError
from .metrics import evaluate_bicubic, evaluate_model, write_report_csv
from .model import ModelConfig, init_model, model_forward
from .training import TrainSchedule, train, write_loss_log

_RUNTIME_ERRORS = (ContractViolation, CorpusError, TrainingDiverged, ValveError,
                   CheckpointError, OSError)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("ESRG_THREADS", "1")))
    except ValueError:
        return 1


def _parse_scales(text: str) -> tuple:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ContractViolation(f"cannot parse scale list {text!r}")


def _parse_size(text: str) -> tuple:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise ContractViolation(f"cannot parse size {text!r}, expected HxW like 83x83")


def _config_from_args(args) -> ModelConfig:
    return ModelConfig(base_channels=args.channels, num_gebs=args.gebs,
                       scales=_parse_scales(args.scales), seed=args.seed,
                       disable_wff=args.disable_wff,
                       disable_last_cr=args.disable_last_cr,
                       disable_distilling=args.disable_distilling,
                       disable_group_split=args.disable_group_split)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--channels", type=int, default=64, help="base channel width")
    p.add_argument("--gebs", type=int, default=6, help="number of blocks")
    p.add_argument("--scales", default="2,3,4", help="comma list from {2,3,4}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--disable-wff", action="store_true")
    p.add_argument("--disable-last-cr", action="store_true")
    p.add_argument("--disable-distilling", action="store_true")
    p.add_argument("--disable-group-split", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esrgcnn", description="multi-scale image super-resolution")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a directory of HR PNGs")
    p.add_argument("--data", required=True, help="directory of HR PNG images")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--steps", type=int, default=600_000)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--patch", type=int, default=83, help="LR patch size")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--lr-halve-every", type=int, default=400_000)
    p.add_argument("--ckpt-every", type=int, default=0,
                   help="also checkpoint every N steps (0 = final only)")
    p.add_argument("--scale-strategy", choices=("round-robin", "random-uniform"),
                   default="round-robin")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("sr", help="super-resolve one PNG")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--scale", type=int, required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_sr)

    p = sub.add_parser("eval", help="PSNR/SSIM over a directory of HR PNGs")
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--model", help="checkpoint path")
    which.add_argument("--bicubic", action="store_true", help="score the bicubic baseline")
    p.add_argument("--data", required=True)
    p.add_argument("--scale", type=int, required=True)
    p.add_argument("--out", default=".", help="directory for report files")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("info", help="parameter/MAC accounting and layer table")
    p.add_argument("--model", help="checkpoint path (otherwise flags below apply)")
    p.add_argument("--size", default="83x83", help="LR size HxW for the MAC count")
    p.add_argument("--scale", type=int, default=2)
    _add_config_flags(p)
    p.set_defaults(fn=cmd_info)
    return parser


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    records, failures = ingest_corpus(args.data, cfg.scales, workers=_threads())
    for f in failures:
        print(f"warning: skipped {f.path}: {f.reason}", file=sys.stderr)
    schedule = TrainSchedule(base_lr=args.lr, halving_period=args.lr_halve_every,
                             total_steps=args.steps, batch_size=args.batch,
                             patch_size=args.patch, scale_strategy=args.scale_strategy,
                             checkpoint_every=args.ckpt_every)
    params = init_model(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def checkpoint_fn(step, p):
        save_checkpoint(p, out / f"model_step{step:07d}.esrg")

    rng = np.random.default_rng([args.seed, 1])
    rows = train(params, schedule, records, rng, checkpoint_fn=checkpoint_fn)
    save_checkpoint(params, out / "model.esrg")
    write_loss_log(rows, out / "loss.csv")
    print(f"trained {len(rows)} steps on {len(records)} image(s); "
          f"final loss {rows[-1][2]:.6g}")
    print(f"wrote {out / 'model.esrg'} and {out / 'loss.csv'}")
    return 0


def cmd_sr(args) -> int:
    params, _ = load_checkpoint(args.model)
    lr = load_image(args.input)
    sr = model_forward(params, lr, args.scale)
    save_image(sr, args.output)
    print(f"wrote {args.output} ({sr.shape[3]}x{sr.shape[2]})")
    return 0


def cmd_eval(args) -> int:
    if args.bicubic:
        records, failures = ingest_corpus(args.data, (args.scale,), workers=_threads())
        report = evaluate_bicubic(records, args.scale)
        label = "bicubic"
    else:
        params, cfg = load_checkpoint(args.model)
        if args.scale not in cfg.scales:
            raise ValveError(f"scale x{args.scale} is not configured "
                             f"(checkpoint has {cfg.scales})")
        records, failures = ingest_corpus(args.data, (args.scale,), workers=_threads())
        report = evaluate_model(params, records, args.scale)
        label = "model"
    for f in failures:
        print(f"warning: skipped {f.path}: {f.reason}", file=sys.stderr)
    for row in report.rows:
        if row.error is not None:
            print(f"warning: {row.image_id}: {row.error}", file=sys.stderr)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"eval_{label}_x{args.scale}.csv"
    json_path = out / f"eval_{label}_x{args.scale}.json"
    write_report_csv(report, csv_path)
    json_path.write_text(json.dumps(report.aggregate(), sort_keys=True) + "\n")
    print(f"{label} x{args.scale}: mean PSNR {report.mean_psnr:.2f} dB, "
          f"mean SSIM {report.mean_ssim:.4f} (n={report.n}, shave={report.shave})")
    print(f"wrote {csv_path} and {json_path}")
    return 0


def cmd_info(args) -> int:
    if args.model:
        _, cfg = load_checkpoint(args.model)
    else:
        cfg = _config_from_args(args)
    h, w = _parse_size(args.size)
    weights, biases = weight_and_bias_counts(cfg)
    print(f"params (paper convention) {format_params(count_params(cfg, 'paper'))}")
    print(f"params (actual) {format_params(count_params(cfg, 'actual'))} "
          f"[weights {weights:,} + biases {biases:,}]")
    scale = args.scale
    if scale in cfg.scales:
        flops = count_flops(cfg, h, w, scale)
        print(f"flops {format_flops(flops)} at {h}x{w} x{scale}")
        print("layers (x{}):".format(scale))
        for name, out_c, in_c, positions in layer_table(cfg, h, w, scale):
            print(f"  {name:<16} {in_c:>4} -> {out_c:<4} weights {out_c * in_c * 9:>9,} "
                  f"bias {out_c:>4,}  positions {positions:,}")
    else:
        print(f"flops: scale x{scale} not configured ({cfg.scales})")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
