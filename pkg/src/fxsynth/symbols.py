"""Names of the precision variables.

Indexing follows the layer numbering used throughout the package:
  * ``Lu[k,i]`` - output of neuron i in layer k, k = 1..m;
  * ``Lx[k,i]`` - value i fed into layer k+1, k = 0..m-1 (k = 0 are network inputs);
  * ``Lw[k,i,j]`` - weight from input j to neuron i of layer k+1, k = 0..m-1.
``model.layers[k]`` holds the weights ``Lw[k,...]`` and produces ``Lu[k+1,...]``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

KIND_ORDER = {"Lu": 0, "Lx": 1, "Lw": 2}


@dataclass(frozen=True)
class VarId:
    kind: str
    k: int
    i: int
    j: int = -1

    def __post_init__(self):
        if self.kind not in KIND_ORDER:
            raise ValueError(f"unknown variable kind {self.kind!r}")
        if (self.kind == "Lw") != (self.j >= 0):
            raise ValueError("only Lw variables carry a j index")

    def sort_key(self) -> tuple:
        return (KIND_ORDER[self.kind], self.k, self.i, self.j)

    def __lt__(self, other: "VarId") -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        if self.kind == "Lw":
            return f"Lw[{self.k},{self.i},{self.j}]"
        return f"{self.kind}[{self.k},{self.i}]"

    @staticmethod
    def parse(text: str) -> "VarId":
        m = _NAME.fullmatch(text.strip())
        if not m:
            raise ValueError(f"not a variable name: {text!r}")
        idx = [int(t) for t in m.group(2).split(",")]
        if m.group(1) == "Lw":
            if len(idx) != 3:
                raise ValueError(f"Lw needs three indices: {text!r}")
            return VarId("Lw", *idx)
        if len(idx) != 2:
            raise ValueError(f"{m.group(1)} needs two indices: {text!r}")
        return VarId(m.group(1), *idx)


_NAME = re.compile(r"(Lu|Lx|Lw)\[(\d+(?:,\d+){1,2})\]")


def Lu(k: int, i: int) -> VarId:
    return VarId("Lu", k, i)


def Lx(k: int, i: int) -> VarId:
    return VarId("Lx", k, i)


def Lw(k: int, i: int, j: int) -> VarId:
    return VarId("Lw", k, i, j)


def model_variables(model) -> list[VarId]:
    """Every precision variable of ``model`` in canonical (kind, k, i, j) order."""
    out = []
    for k, layer in enumerate(model.layers, start=1):
        out += [Lu(k, i) for i in range(layer.width)]
    widths = model.widths
    for k in range(model.depth):
        out += [Lx(k, i) for i in range(widths[k])]
    for k, layer in enumerate(model.layers):
        out += [Lw(k, i, j) for i in range(layer.width) for j in range(layer.fan_in)]
    return out
