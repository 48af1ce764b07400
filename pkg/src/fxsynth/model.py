"""Network description, JSON loading/saving and the single-precision reference evaluator.

JSON layout::

    {"input_dim": 2,
     "input_range": [[lo, hi], ...],
     "layers": [{"activation": "relu" | "linear",
                 "weights": [[...], ...],   # width_k rows of width_{k-1}
                 "bias": [...]}]}

Every coefficient is rounded to the nearest float32 on load (ties to even,
decided exactly from the decimal text).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DimensionError,
    MissingRangeError,
    ModelParseError,
    NonFiniteError,
    ShapeMismatchError,
)

ACTIVATION_NAMES = ("relu", "linear")


def nearest_float32(v) -> float:
    """Round an exact decimal/rational/float to the nearest float32 (ties to even)."""
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        if isinstance(v, float) and not math.isfinite(v):
            raise NonFiniteError(f"non-finite coefficient {v!r}")
        q = Fraction(v)
    elif isinstance(v, (Decimal, Fraction)):
        if isinstance(v, Decimal) and not v.is_finite():
            raise NonFiniteError(f"non-finite coefficient {v!r}")
        q = Fraction(v)
    else:
        raise ModelParseError(f"expected a number, got {v!r}")
    with np.errstate(over="ignore"):
        guess = np.float32(float(q))
    if not np.isfinite(guess):
        raise NonFiniteError(f"coefficient {v!r} overflows single precision")
    # float(q) is correctly rounded to double; a second rounding to float32 can be
    # off by one ulp, so compare the neighbours exactly.
    lo = np.nextafter(guess, np.float32(-np.inf))
    hi = np.nextafter(guess, np.float32(np.inf))
    best = None
    for cand in (lo, guess, hi):
        if not np.isfinite(cand):
            continue
        d = abs(Fraction(float(cand)) - q)
        key = (d, int(np.float32(cand).view(np.uint32)) & 1)
        if best is None or key < best[0]:
            best = (key, cand)
    return float(best[1])


@dataclass(frozen=True)
class LayerSpec:
    weights: tuple[tuple[float, ...], ...]
    bias: tuple[float, ...]
    activation: str = "linear"

    def __post_init__(self):
        if self.activation not in ACTIVATION_NAMES:
            raise ModelParseError(f"unknown activation {self.activation!r}")
        w = tuple(tuple(nearest_float32(c) for c in row) for row in self.weights)
        b = tuple(nearest_float32(c) for c in self.bias)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        if len(w) == 0:
            raise ShapeMismatchError("layer has no neurons")
        if len(b) != len(w):
            raise ShapeMismatchError(f"bias length {len(b)} != {len(w)} neurons")
        widths = {len(r) for r in w}
        if len(widths) != 1 or 0 in widths:
            raise ShapeMismatchError("ragged or empty weight matrix")

    @property
    def width(self) -> int:
        return len(self.weights)

    @property
    def fan_in(self) -> int:
        return len(self.weights[0])


@dataclass(frozen=True)
class NetModel:
    layers: tuple[LayerSpec, ...]
    input_dim: int
    input_range: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ShapeMismatchError("model has no layers")
        if self.input_range is None:
            raise MissingRangeError("input_range is required")
        rng = []
        for pair in self.input_range:
            if len(pair) != 2:
                raise ModelParseError(f"bad input_range entry {pair!r}")
            lo, hi = nearest_float32(pair[0]), nearest_float32(pair[1])
            if lo > hi:
                raise ModelParseError(f"input_range lower {lo} > upper {hi}")
            rng.append((lo, hi))
        object.__setattr__(self, "input_range", tuple(rng))
        if len(rng) != self.input_dim:
            raise ShapeMismatchError(f"input_range has {len(rng)} entries, input_dim is {self.input_dim}")
        prev = self.input_dim
        for k, layer in enumerate(self.layers):
            if layer.fan_in != prev:
                raise ShapeMismatchError(f"layer {k} expects {layer.fan_in} inputs, previous width is {prev}")
            prev = layer.width

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_dim,) + tuple(l.width for l in self.layers)

    @property
    def neuron_count(self) -> int:
        return sum(l.width for l in self.layers)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "input_range": [[_num(lo), _num(hi)] for lo, hi in self.input_range],
            "layers": [
                {
                    "activation": l.activation,
                    "weights": [[_num(w) for w in row] for row in l.weights],
                    "bias": [_num(b) for b in l.bias],
                }
                for l in self.layers
            ],
        }


def _num(v: float) -> float:
    """Shortest decimal that rounds back to the same float32, as a Python float."""
    return float(np.format_float_positional(np.float32(v), unique=True, trim="-"))


def model_from_dict(doc: dict) -> NetModel:
    if not isinstance(doc, dict):
        raise ModelParseError("model document must be a JSON object")
    for key in ("input_dim", "layers"):
        if key not in doc:
            raise ModelParseError(f"missing key {key!r}")
    if "input_range" not in doc:
        raise MissingRangeError("missing key 'input_range'")
    layers_doc = doc["layers"]
    if not isinstance(layers_doc, list) or not layers_doc:
        raise ShapeMismatchError("'layers' must be a non-empty list")
    dim = doc["input_dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ModelParseError("'input_dim' must be a positive integer")
    layers = []
    for k, ld in enumerate(layers_doc):
        try:
            layers.append(LayerSpec(ld["weights"], ld["bias"], ld.get("activation", "linear")))
        except (KeyError, TypeError) as exc:
            raise ModelParseError(f"layer {k}: {exc}") from exc
    return NetModel(tuple(layers), dim, tuple(tuple(p) for p in doc["input_range"]))


def _reject_constant(name: str):
    raise NonFiniteError(f"non-finite coefficient {name}")


def loads_model(text: str) -> NetModel:
    try:
        doc = json.loads(text, parse_float=Decimal, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ModelParseError(str(exc)) from exc
    return model_from_dict(doc)


def load_model(path) -> NetModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelParseError(f"cannot read {path}: {exc}") from exc
    return loads_model(text)


def dumps_model(model: NetModel) -> str:
    """Canonical text: one line per weight row, shortest float32 decimals."""
    d = model.to_dict()
    row = lambda v: json.dumps(v)
    lines = ["{", f'  "input_dim": {d["input_dim"]},',
             f'  "input_range": [{", ".join(row(r) for r in d["input_range"])}],', '  "layers": [']
    for n, layer in enumerate(d["layers"]):
        rows = ",\n".join(f"      {row(r)}" for r in layer["weights"])
        lines += ["    {", f'     "activation": "{layer["activation"]}",',
                  f'     "weights": [\n{rows}\n     ],', f'     "bias": {row(layer["bias"])}',
                  "    }" + ("," if n + 1 < len(d["layers"]) else "")]
    lines += ["  ]", "}"]
    return "\n".join(lines) + "\n"


def save_model(model: NetModel, path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def _as_f32_vector(model: NetModel, x: Sequence) -> list:
    if len(x) != model.input_dim:
        raise DimensionError(f"expected {model.input_dim} inputs, got {len(x)}")
    return [np.float32(v) for v in x]


def eval_float_trace(model: NetModel, x: Sequence) -> list[tuple[list[float], list[float]]]:
    """Per layer, the (pre-activation, post-activation) float32 neuron values.

    Accumulation is left to right over the inputs, then the bias is added.
    """
    cur = _as_f32_vector(model, x)
    out = []
    with np.errstate(over="ignore", invalid="ignore"):
        for layer in model.layers:
            pre, post = [], []
            for row, b in zip(layer.weights, layer.bias):
                s = np.float32(0)
                for w, xv in zip(row, cur):
                    s = np.float32(s + np.float32(w) * xv)
                s = np.float32(s + np.float32(b))
                pre.append(s)
                post.append(s if layer.activation == "linear" or s > 0 else np.float32(0))
            out.append(([float(v) for v in pre], [float(v) for v in post]))
            cur = post
    return out


def eval_float(model: NetModel, x: Sequence) -> list[float]:
    return eval_float_trace(model, x)[-1][1]


def example_model(box: float = 0.0) -> NetModel:
    """The 3-layer, 2-neuron-per-layer example network, input (2, 0.5) +/- box."""
    return NetModel(
        layers=(
            LayerSpec(((3.5, 0.25), (-1.06, 4.1)), (-2.0, 4.5), "relu"),
            LayerSpec(((-0.75, 4.85), (2.1, 0.48)), (1.2, 0.5), "relu"),
            LayerSpec(((-5.0, 12.4), (0.2, -2.0)), (3.0, 1.0), "linear"),
        ),
        input_dim=2,
        input_range=((2.0 - box, 2.0 + box), (0.5 - box, 0.5 + box)),
    )
