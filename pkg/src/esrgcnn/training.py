"""Training: batch-mean squared-error loss, bias-corrected Adam, a stepped
learning-rate schedule, and the multi-scale training loop.

The loop alternates scales (round-robin by default) so the shared trunk
receives a gradient every step while each upsampling head is updated every
len(scales)-th step.  Everything is deterministic given the seeds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tape
from .data import sample_batch
from .errors import ContractViolation, TrainingDiverged
from .model import ModelParams, named_params, record_forward

SCALE_STRATEGIES = ("round-robin", "random-uniform")


@dataclass
class TrainSchedule:
    base_lr: float = 1e-4
    halving_period: int = 400_000
    total_steps: int = 600_000
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patch_size: int = 83
    scale_strategy: str = "round-robin"
    checkpoint_every: int = 0            # 0 = only at termination

    def __post_init__(self):
        if self.base_lr < 0:
            raise ContractViolation(f"base_lr must be >= 0, got {self.base_lr}")
        if self.total_steps < 1:
            raise ContractViolation(f"total_steps must be >= 1, got {self.total_steps}")
        if self.halving_period < 1:
            raise ContractViolation(f"halving_period must be >= 1, got {self.halving_period}")
        if self.scale_strategy not in SCALE_STRATEGIES:
            raise ContractViolation(f"scale_strategy must be one of {SCALE_STRATEGIES}")


class AdamState:
    """Per-parameter first/second moments plus a shared step counter."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Half the squared error summed per sample, averaged over the batch.

    Returns (loss, grad_pred) with grad_pred = (pred - target) / batch.
    """
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ContractViolation(
            f"pred shape {pred.shape} does not match target {target.shape}")
    batch = pred.shape[0]
    diff = pred.astype(np.float64) - target.astype(np.float64)
    loss = float(np.sum(diff * diff) / (2 * batch))
    grad = (diff / batch).astype(pred.dtype)
    return loss, grad


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> None:
    """Standard bias-corrected Adam update, applied in place to *params*."""
    missing = params.keys() - grads.keys()
    if missing:
        raise ContractViolation(f"missing gradients for {sorted(missing)}")
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def lr_at(step: int, schedule: TrainSchedule) -> float:
    """base_lr halved once per elapsed halving period."""
    return schedule.base_lr * 2.0 ** -(step // schedule.halving_period)


def train(params: ModelParams, schedule: TrainSchedule, records,
          rng: np.random.Generator, checkpoint_fn=None):
    """Run the schedule, mutating *params* in place.

    Returns the loss log as a list of (step, scale, loss, lr) rows.  When
    given, checkpoint_fn(step, params) fires every schedule.checkpoint_every
    steps.  A non-finite loss aborts with the offending step named.
    """
    arrays = dict(named_params(params))
    state = AdamState(schedule.beta1, schedule.beta2, schedule.eps)
    scales = params.config.scales
    rows = []
    for step in range(schedule.total_steps):
        if schedule.scale_strategy == "random-uniform":
            scale = scales[int(rng.integers(len(scales)))]
        else:
            scale = scales[step % len(scales)]
        batch = sample_batch(records, scale, schedule.batch_size, rng,
                             schedule.patch_size)
        tape = Tape()
        out = record_forward(tape, params, batch.lr, scale)
        loss, grad = mse_loss(out.value, batch.hr)
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss {loss} at step {step} (x{scale})")
        grads = tape.backward(out, grad)
        lr = lr_at(step, schedule)
        adam_step({name: arrays[name] for name in grads}, grads, state, lr)
        rows.append((step, scale, loss, lr))
        if checkpoint_fn and schedule.checkpoint_every \
                and (step + 1) % schedule.checkpoint_every == 0:
            checkpoint_fn(step + 1, params)
    return rows


def write_loss_log(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,scale,loss,lr\n")
        for step, scale, loss, lr in rows:
            fh.write(f"{step},{scale},{loss!r},{lr!r}\n")
