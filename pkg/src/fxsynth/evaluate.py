"""Integer-only evaluation of a network under a FormatAssignment.

This is the executable semantics the generated C code reproduces bit for bit:

* input j is converted (toward zero) at the widest storage format
  ``<M, T-2-M>`` and then shifted down to ``Lx[0, j]``;
* every product ``w * x`` is truncated to the neuron's ``Lu`` immediately and
  accumulated in input order in a 64-bit accumulator, then the bias (converted
  at ``Lu``) is added;
* the activation is applied and the result stored at ``<Mu, Lu>``;
* a value fed to the next layer is shifted down to its ``Lx``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DimensionError, FxOverflowError
from .fxp import (
    ACTIVATIONS,
    WORD_BITS,
    ZERO,
    FxFormat,
    FxNum,
    align,
    exact,
    float_to_fixed,
    fx_add,
    fx_mul,
    ufp,
)
from .model import NetModel, eval_float
from .solve import FormatAssignment


def input_load_L(M: int, Lx: int, T: int) -> int:
    """Fractional length at which a network input is first materialised."""
    return max(Lx, T - 2 - M)


def accumulator_format(L: int) -> FxFormat:
    return FxFormat(WORD_BITS - 2 - L, L)


def bias_format(b: float, L: int) -> FxFormat:
    q = abs(exact(b))
    M = ufp(q) if q else 0
    return FxFormat(max(M, -L), L)


@dataclass
class FxTrace:
    """``inputs[k]`` feeds layer k+1; ``pre[k]`` / ``post[k]`` belong to layer k+1."""

    loaded: list[FxNum]
    inputs: list[list[FxNum]]
    pre: list[list[FxNum]]
    post: list[list[FxNum]]
    warnings: list[str] = field(default_factory=list)

    @property
    def outputs(self) -> list[FxNum]:
        return self.post[-1]

    def to_dict(self) -> dict:
        def enc(a: FxNum) -> dict:
            return {"mantissa": a.mantissa, "M": a.M, "L": a.L, "value": float(a)}

        return {
            "loaded": [enc(a) for a in self.loaded],
            "inputs": [[enc(a) for a in v] for v in self.inputs],
            "pre": [[enc(a) for a in v] for v in self.pre],
            "post": [[enc(a) for a in v] for v in self.post],
            "outputs": [enc(a) for a in self.outputs],
            "warnings": list(self.warnings),
        }


def _store(m: int, fmt: FxFormat, strict: bool, warnings: list, label: str) -> FxNum:
    if m == 0:
        return ZERO
    if fmt.fits(m):
        return FxNum(m, fmt)
    if strict:
        raise FxOverflowError(f"{label}: mantissa {m} does not fit {fmt}")
    widened = FxFormat(max(fmt.M, ufp(abs(m)) - fmt.L), fmt.L)
    warnings.append(f"{label}: value needs {widened}, assigned {fmt}")
    return FxNum(m, widened)


def eval_fixed(model: NetModel, assignment: FormatAssignment, x: Sequence,
               strict: bool = True) -> FxTrace:
    """Fixed-point trace for input ``x``.

    A value that does not fit its assigned format raises FxOverflowError; with
    ``strict=False`` (implied for inputs outside the declared range) it is kept
    at a widened format and reported in ``warnings`` instead.
    """
    if len(x) != model.input_dim:
        raise DimensionError(f"expected {model.input_dim} inputs, got {len(x)}")
    T = assignment.T
    warnings: list[str] = []
    xs = [float(np.float32(v)) for v in x]
    for j, (v, (lo, hi)) in enumerate(zip(xs, model.input_range)):
        if not lo <= v <= hi:
            warnings.append(f"input {j} = {v} outside [{lo}, {hi}]; error guarantee void")
            strict = False

    loaded, cur = [], []
    for j, v in enumerate(xs):
        fx = assignment.x(0, j)
        M = fx.M
        if v != 0 and ufp(abs(v)) > M:
            M = ufp(abs(v))
        a = float_to_fixed(v, FxFormat(M, input_load_L(M, fx.L, T)))
        loaded.append(a)
        cur.append(_store(align(a, fx.L).mantissa, fx, strict, warnings, f"x[0][{j}]"))

    inputs, pres, posts = [], [], []
    for k, layer in enumerate(model.layers, start=1):
        act = ACTIVATIONS[layer.activation]
        inputs.append(cur)
        pre_row, post_row = [], []
        for i, (row, b) in enumerate(zip(layer.weights, layer.bias)):
            fu = assignment.u(k, i)
            acc_fmt = accumulator_format(fu.L)
            acc = ZERO
            for j, (w, xj) in enumerate(zip(row, cur)):
                wf = float_to_fixed(w, assignment.w(k - 1, i, j))
                acc = fx_add(acc, fx_mul(wf, xj, acc_fmt), acc_fmt)
            acc = fx_add(acc, float_to_fixed(b, bias_format(b, fu.L)), acc_fmt)
            pre_row.append(acc)
            post_row.append(_store(act(acc).mantissa, fu, strict, warnings, f"u[{k}][{i}]"))
        pres.append(pre_row)
        posts.append(post_row)
        if k < model.depth:
            cur = [
                _store(align(u, assignment.x(k, i).L).mantissa, assignment.x(k, i), strict,
                       warnings, f"x[{k}][{i}]")
                for i, u in enumerate(post_row)
            ]
    return FxTrace(loaded, inputs, pres, posts, warnings)


def abs_error(model: NetModel, assignment: FormatAssignment, x: Sequence) -> list[float]:
    """Per output, |float32 reference - decoded fixed-point result|."""
    ref = eval_float(model, x)
    fixed = eval_fixed(model, assignment, x).outputs
    return [float(abs(Fraction(r) - a.to_fraction())) for r, a in zip(ref, fixed)]
