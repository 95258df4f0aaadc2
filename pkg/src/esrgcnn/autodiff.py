"""Reverse-mode differentiation over the tensor kernels.

A Tape records a linear sequence of kernel applications; backward() walks it
once in reverse, accumulating exact adjoints into a gradient map keyed by
parameter name.  Accumulation order is the fixed tape order, so gradients are
deterministic.  A tape is confined to one thread; parameter arrays may be
shared read-only across tapes.
"""
from __future__ import annotations

import numpy as np

from . import kernels as K
from .errors import ContractViolation


class Var:
    """A value produced on a tape.  Holds the forward array, nothing else."""

    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value


class _Node:
    __slots__ = ("outputs", "inputs", "backward")

    def __init__(self, outputs, inputs, backward):
        self.outputs = outputs
        self.inputs = inputs
        self.backward = backward


class Tape:
    def __init__(self):
        self._owned: set[int] = set()
        self._nodes: list[_Node] = []
        self._params: dict[str, Var] = {}

    # ------------------------------------------------------------------ values
    def input(self, value) -> Var:
        return self._adopt(Var(np.asarray(value)))

    def param(self, name: str, value) -> Var:
        """Register a named parameter array; repeated names must rebind the
        same array (shared layers accumulate gradients)."""
        arr = np.asarray(value)
        held = self._params.get(name)
        if held is not None:
            if held.value is not arr:
                raise ContractViolation(
                    f"parameter {name!r} already bound to a different array")
            return held
        v = self._adopt(Var(arr))
        self._params[name] = v
        return v

    def _adopt(self, v: Var) -> Var:
        self._owned.add(id(v))
        return v

    def _check(self, v) -> Var:
        if not isinstance(v, Var) or id(v) not in self._owned:
            raise ContractViolation("operand was not produced on this tape")
        return v

    def _emit(self, outputs, inputs, backward):
        self._nodes.append(_Node(outputs, inputs, backward))

    # -------------------------------------------------------------- operations
    def conv2d(self, x: Var, p: K.ConvParams, name: str) -> Var:
        x = self._check(x)
        wv = self.param(name + ".weight", p.weights)
        bv = self.param(name + ".bias", p.bias)
        out = self._adopt(Var(K.conv2d_forward(x.value, p)))
        x_val = x.value
        self._emit((out,), (x, wv, bv),
                   lambda gouts: K.conv2d_backward(x_val, p, gouts[0]))
        return out

    def relu(self, x: Var) -> Var:
        x = self._check(x)
        out = self._adopt(Var(K.relu(x.value)))
        x_val = x.value
        self._emit((out,), (x,),
                   lambda gouts: (K.relu_backward(x_val, gouts[0]),))
        return out

    def add(self, a: Var, b: Var) -> Var:
        a, b = self._check(a), self._check(b)
        out = self._adopt(Var(K.add(a.value, b.value)))
        self._emit((out,), (a, b), lambda gouts: (gouts[0], gouts[0]))
        return out

    def concat(self, a: Var, b: Var) -> Var:
        a, b = self._check(a), self._check(b)
        out = self._adopt(Var(K.concat_channels(a.value, b.value)))
        ca = a.value.shape[1]

        def backward(gouts):
            g = gouts[0]
            return (np.ascontiguousarray(g[:, :ca]),
                    np.ascontiguousarray(g[:, ca:]))

        self._emit((out,), (a, b), backward)
        return out

    def split(self, x: Var, k: int):
        x = self._check(x)
        first, rest = K.split_channels(x.value, k)
        a, b = self._adopt(Var(first)), self._adopt(Var(rest))
        self._emit((a, b), (x,),
                   lambda gouts: (K.concat_channels(gouts[0], gouts[1]),))
        return a, b

    def pixel_shuffle(self, x: Var, r: int) -> Var:
        x = self._check(x)
        out = self._adopt(Var(K.pixel_shuffle(x.value, r)))
        self._emit((out,), (x,),
                   lambda gouts: (K.pixel_unshuffle(gouts[0], r),))
        return out

    # ----------------------------------------------------------- reverse sweep
    def backward(self, output: Var, grad_output) -> dict[str, np.ndarray]:
        """Adjoint of everything recorded, seeded at *output*.

        Returns one gradient per registered parameter name; parameters the
        recorded graph never reached get zeros.
        """
        output = self._check(output)
        seed = np.asarray(grad_output)
        if seed.shape != output.value.shape:
            raise ContractViolation(
                f"gradient shape {seed.shape} does not match output "
                f"{output.value.shape}")
        grads: dict[int, np.ndarray] = {id(output): seed}
        for node in reversed(self._nodes):
            gouts = [grads.get(id(o)) for o in node.outputs]
            if all(g is None for g in gouts):
                continue
            gouts = [g if g is not None else np.zeros_like(o.value)
                     for g, o in zip(gouts, node.outputs)]
            for var, g in zip(node.inputs, node.backward(gouts)):
                have = grads.get(id(var))
                grads[id(var)] = g if have is None else have + g
        return {name: grads.get(id(v), np.zeros_like(v.value))
                for name, v in self._params.items()}


def forward_record(builder, *inputs):
    """Run *builder* on a fresh tape.

    The builder receives the tape followed by one Var per input array and
    must compose only tape operations; returns (output Var, tape).
    """
    tape = Tape()
    in_vars = tuple(tape.input(v) for v in inputs)
    out = builder(tape, *in_vars)
    tape._check(out)
    return out, tape
