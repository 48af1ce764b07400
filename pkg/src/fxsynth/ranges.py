"""Range analysis: bounds on every neuron value over the declared input box, and the
integer-part widths M derived from them."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .fxp import exact, ufp
from .model import NetModel, eval_float_trace
from .symbols import Lu, Lw, Lx, VarId

SEED_ENV = "FXSYNTH_SEED"


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", exact(self.lo))
        object.__setattr__(self, "hi", exact(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def scale(self, c: Fraction) -> "Interval":
        a, b = self.lo * c, self.hi * c
        return Interval(min(a, b), max(a, b))

    def shift(self, c: Fraction) -> "Interval":
        return Interval(self.lo + c, self.hi + c)

    def relu(self) -> "Interval":
        return Interval(max(self.lo, 0), max(self.hi, 0))

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    @property
    def magnitude(self) -> Fraction:
        return max(abs(self.lo), abs(self.hi))

    def contains(self, v) -> bool:
        return self.lo <= exact(v) <= self.hi


def magnitude_ufp(iv: Interval) -> int:
    """ufp of the largest magnitude in ``iv``; 0 for the zero interval."""
    mag = iv.magnitude
    return ufp(mag) if mag > 0 else 0


@dataclass
class RangeReport:
    """Bounds indexed like the variables: ``pre[k-1][i]`` / ``post[k-1][i]`` for layer k."""

    inputs: list[Interval]
    pre: list[list[Interval]]
    post: list[list[Interval]]
    mode: str = "interval"
    samples: int = 0
    seed: int | None = None

    @property
    def sound(self) -> bool:
        return self.mode == "interval"

    def output_M(self, k: int, i: int) -> int:
        """ufp of the post-activation magnitude bound of neuron (k, i), k = 1..m."""
        return magnitude_ufp(self.post[k - 1][i])

    def input_M(self, j: int) -> int:
        return magnitude_ufp(self.inputs[j])

    def to_dict(self) -> dict:
        def iv(x: Interval) -> dict:
            return {"lo": float(x.lo), "hi": float(x.hi), "lo_exact": str(x.lo), "hi_exact": str(x.hi)}

        return {
            "mode": self.mode,
            "sound": self.sound,
            "samples": self.samples,
            "seed": self.seed,
            "inputs": [dict(iv(x), M=magnitude_ufp(x)) for x in self.inputs],
            "layers": [
                [
                    {"pre": iv(p), "post": iv(q), "M": magnitude_ufp(q)}
                    for p, q in zip(pre, post)
                ]
                for pre, post in zip(self.pre, self.post)
            ],
        }


def _input_intervals(model: NetModel) -> list[Interval]:
    return [Interval(lo, hi) for lo, hi in model.input_range]


def analyze_interval(model: NetModel) -> RangeReport:
    cur = _input_intervals(model)
    inputs = list(cur)
    pre_all, post_all = [], []
    for layer in model.layers:
        pre = []
        for row, b in zip(layer.weights, layer.bias):
            acc = Interval(0, 0)
            for w, xv in zip(row, cur):
                acc = acc + xv.scale(exact(w))
            pre.append(acc.shift(exact(b)))
        post = [p.relu() for p in pre] if layer.activation == "relu" else list(pre)
        pre_all.append(pre)
        post_all.append(post)
        cur = post
    return RangeReport(inputs, pre_all, post_all, mode="interval")


def sampling_seed(seed: int | None = None) -> int:
    if seed is not None:
        return seed
    return int(os.environ.get(SEED_ENV, "0"))


def sample_points(model: NetModel, samples: int, seed: int | None = None) -> np.ndarray:
    """Scrambled Halton points scaled into the input box, one row per sample."""
    from scipy.stats import qmc

    lo = np.array([r[0] for r in model.input_range], dtype=float)
    hi = np.array([r[1] for r in model.input_range], dtype=float)
    unit = qmc.Halton(d=model.input_dim, scramble=True, seed=sampling_seed(seed)).random(samples)
    return lo + unit * (hi - lo)


def analyze_sampled(model: NetModel, samples: int, seed: int | None = None) -> RangeReport:
    """Min/max of the float32 evaluation over quasi-random inputs (not sound)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    seed = sampling_seed(seed)
    pre_all = post_all = None
    for x in sample_points(model, samples, seed):
        trace = eval_float_trace(model, list(x))
        point_pre = [[Interval(v, v) for v in pre] for pre, _ in trace]
        point_post = [[Interval(v, v) for v in post] for _, post in trace]
        if pre_all is None:
            pre_all, post_all = point_pre, point_post
        else:
            pre_all = [[a.hull(b) for a, b in zip(ra, rb)] for ra, rb in zip(pre_all, point_pre)]
            post_all = [[a.hull(b) for a, b in zip(ra, rb)] for ra, rb in zip(post_all, point_post)]
    return RangeReport(_input_intervals(model), pre_all, post_all, mode="sampled",
                       samples=samples, seed=seed)


M_POLICIES = ("tight", "structural")


def weight_M(w) -> int:
    q = abs(exact(w))
    return ufp(q) if q else 0


def assign_M(report: RangeReport, model: NetModel, policy: str = "tight",
             margins: Sequence[Sequence[Fraction]] | None = None) -> dict[VarId, int]:
    """Integer-part width M for every precision variable.

    ``tight`` takes M from the post-activation bound (one guard bit in sampled
    mode).  ``structural`` ignores the bounds past the input layer and uses
    ``max_j(M_w + M_x) + 1``, the conservative product-plus-carry rule.
    ``margins[k-1][i]``, when given, is added to the bound of neuron (k, i) so the
    computed value, not only the exact one, stays inside the binade.
    """
    if policy not in M_POLICIES:
        raise ValueError(f"unknown M policy {policy!r}")
    out: dict[VarId, int] = {}
    for k, layer in enumerate(model.layers):
        for i, row in enumerate(layer.weights):
            for j, w in enumerate(row):
                out[Lw(k, i, j)] = weight_M(w)
    for j in range(model.input_dim):
        out[Lx(0, j)] = report.input_M(j)
    guard = 0 if report.sound else 1
    for k, layer in enumerate(model.layers, start=1):
        for i in range(layer.width):
            if policy == "tight":
                mag = report.post[k - 1][i].magnitude
                if margins is not None:
                    mag += margins[k - 1][i]
                mu = ufp(mag) + guard if mag > 0 else 0
            else:
                terms = [
                    out[Lw(k - 1, i, j)] + out[Lx(k - 1, j)]
                    for j, w in enumerate(layer.weights[i])
                    if w != 0 and _nonzero_input(report, k - 1, j)
                ]
                b = layer.bias[i]
                mu = max(terms) + 1 if terms else (weight_M(b) if b else 0)
            out[Lu(k, i)] = mu
            if k < model.depth:
                out[Lx(k, i)] = mu
    return out


def _nonzero_input(report: RangeReport, k: int, j: int) -> bool:
    iv = report.inputs[j] if k == 0 else report.post[k - 1][j]
    return iv.magnitude > 0
