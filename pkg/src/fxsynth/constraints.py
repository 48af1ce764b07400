"""Integer linear constraints over the fractional lengths L.

Families (tags), generated in this order:

  C1..C3   word size: M + L fits the storage word, for inputs, outputs, weights
  C4mul    word size of a product  w * x
  C5..C7   L >= 0 for inputs, outputs, weights
  C8       output accuracy: L of every network output >= -ufp(threshold)
  C9       an output has no more fractional bits than any of its inputs
  C10      an input fed forward has no more fractional bits than the neuron producing it
  C11      linearized per-neuron accuracy requirement
  C12      local error bound theta <= 2**(ufp(threshold)+1), split term by term
  C13      propagated error certificate (see ``_chain_constraints``)

Profile ``linearized`` emits C1..C11 only, with T-1 bit budgets (M + L <= T-1 for
storage and for products).  Profile ``sound`` (default) reserves the sign bit
(M + L <= T-2, so a P-bit magnitude plus sign fits T bits), sizes products for
the 64-bit accumulator (M_w + L_w + M_x + L_x <= 61) and adds C12 and C13, which
together guarantee every output error is at most the threshold relative to exact
arithmetic on the float32 coefficients.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, LPFormatError
from .fxp import FxFormat, WORD_BITS, exact, ufp
from .model import NetModel
from .symbols import Lu, Lw, Lx, VarId, model_variables

WORD_SIZES = (8, 16, 32)
PROFILES = ("sound", "linearized")
FAMILY_ORDER = ("C1", "C2", "C3", "C4mul", "C5", "C6", "C7", "C8", "C9", "C10", "C11", "C12", "C13")


@dataclass(frozen=True)
class SynthesisConfig:
    threshold: float
    T: int = 32
    analysis_mode: str = "interval"
    M_policy: str = "tight"
    profile: str = "sound"
    samples: int = 1000
    objective_weights: Mapping[VarId, int] | None = None

    def __post_init__(self):
        try:
            thr = float(self.threshold)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"threshold must be a number, got {self.threshold!r}") from exc
        # 1 itself is admitted so threshold sweeps can start at 2**0
        if not 0 < thr <= 1 or thr != thr:
            raise ConfigError(f"threshold must lie in (0, 1], got {self.threshold}")
        if self.T not in WORD_SIZES:
            raise ConfigError(f"T must be one of {WORD_SIZES}, got {self.T}")
        if self.analysis_mode not in ("interval", "sampled"):
            raise ConfigError(f"unknown analysis mode {self.analysis_mode!r}")
        if self.M_policy not in ("tight", "structural"):
            raise ConfigError(f"unknown M policy {self.M_policy!r}")
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")

    @property
    def tau(self) -> int:
        """ufp of the threshold; never positive."""
        return ufp(exact(self.threshold))

    @property
    def storage_budget(self) -> int:
        """Largest admissible M + L for a stored value."""
        return self.T - 1 if self.profile == "linearized" else self.T - 2

    @property
    def product_budget(self) -> int:
        return self.T - 1 if self.profile == "linearized" else WORD_BITS - 3


@dataclass(frozen=True)
class LinConstraint:
    """``sum(c * var) rel rhs`` with integer coefficients; ``rel`` is '<=' or '>='."""

    terms: tuple[tuple[VarId, int], ...]
    rel: str
    rhs: int
    tag: str

    def __post_init__(self):
        merged: dict[VarId, int] = {}
        for v, c in self.terms:
            merged[v] = merged.get(v, 0) + int(c)
        terms = tuple(sorted(((v, c) for v, c in merged.items() if c != 0), key=lambda t: t[0].sort_key()))
        if not terms:
            raise ValueError(f"{self.tag}: constraint without variables")
        if self.rel not in ("<=", ">="):
            raise ValueError(f"bad relation {self.rel!r}")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "rhs", int(self.rhs))

    @property
    def coefficients(self) -> dict[VarId, int]:
        return dict(self.terms)

    def lhs(self, values: Mapping[VarId, int]) -> int:
        return sum(c * values[v] for v, c in self.terms)

    def holds(self, values: Mapping[VarId, int]) -> bool:
        s = self.lhs(values)
        return s <= self.rhs if self.rel == "<=" else s >= self.rhs

    def key(self) -> tuple:
        return (self.terms, self.rel, self.rhs)

    def __str__(self) -> str:
        return f"{self.tag}: {_expr(self.terms)} {self.rel} {self.rhs}"


def _expr(terms: Iterable[tuple[VarId, int]]) -> str:
    parts = []
    for n, (v, c) in enumerate(terms):
        sign = "-" if c < 0 else "+"
        body = f"{abs(c)} {v}"
        parts.append(("-" + body if c < 0 else body) if n == 0 else f"{sign} {body}")
    return " ".join(parts)


@dataclass
class ConstraintSystem:
    variables: tuple[VarId, ...]
    constraints: list[LinConstraint]
    objective: dict[VarId, int]
    M: dict[VarId, int] = field(default_factory=dict)
    T: int | None = None

    def __post_init__(self):
        self.variables = tuple(sorted(set(self.variables), key=VarId.sort_key))
        declared = set(self.variables)
        for c in self.constraints:
            for v, _ in c.terms:
                if v not in declared:
                    raise ValueError(f"{c.tag} uses undeclared variable {v}")
        for v in declared:
            self.objective.setdefault(v, 1)

    def families(self) -> list[str]:
        seen: list[str] = []
        for c in self.constraints:
            if c.tag not in seen:
                seen.append(c.tag)
        return seen

    def with_constraints(self, extra: Iterable[LinConstraint]) -> "ConstraintSystem":
        return ConstraintSystem(self.variables, list(self.constraints) + list(extra),
                                dict(self.objective), dict(self.M), self.T)

    def restricted(self, tags: Iterable[str]) -> "ConstraintSystem":
        keep = set(tags)
        return ConstraintSystem(self.variables, [c for c in self.constraints if c.tag in keep],
                                dict(self.objective), dict(self.M), self.T)

    def to_lp_text(self) -> str:
        return to_lp_text(self)


def theta_bound(x_formats: Sequence[FxFormat], w_formats: Sequence[FxFormat], u_format: FxFormat) -> Fraction:
    """Per-neuron bound on conversion plus computation error of one affine neuron.

    ``sum_j 2**(Mx_j - Lw_j) + 2**(Mw_j - Lx_j)  +  n * 2**-Lu  +  2**(1 - Lu)``.
    """
    if len(x_formats) != len(w_formats):
        raise ValueError("one weight format per input is required")
    two = Fraction(2)
    total = Fraction(0)
    for fx, fw in zip(x_formats, w_formats):
        total += two ** (fx.M - fw.L) + two ** (fw.M - fx.L)
    n = len(x_formats)
    return total + n * two ** (-u_format.L) + two ** (1 - u_format.L)


def clog2(n: int) -> int:
    """ceil(log2(n)) for n >= 1."""
    return (n - 1).bit_length()


def _le(terms, rhs, tag) -> LinConstraint:
    return LinConstraint(tuple(terms), "<=", rhs, tag)


def _ge(terms, rhs, tag) -> LinConstraint:
    return LinConstraint(tuple(terms), ">=", rhs, tag)


def generate(model: NetModel, Mmap: Mapping[VarId, int], cfg: SynthesisConfig) -> ConstraintSystem:
    variables = model_variables(model)
    missing = [v for v in variables if v not in Mmap]
    if missing:
        raise ValueError(f"M map lacks {missing[0]}")
    M = {v: Mmap[v] for v in variables}
    T, m, tau = cfg.T, model.depth, cfg.tau
    store, prod = cfg.storage_budget, cfg.product_budget
    widths = model.widths
    xs = [Lx(k, i) for k in range(m) for i in range(widths[k])]
    us = [Lu(k, i) for k in range(1, m + 1) for i in range(widths[k])]
    ws = [Lw(k, i, j) for k in range(m) for i in range(widths[k + 1]) for j in range(widths[k])]
    fam: dict[str, list[LinConstraint]] = {t: [] for t in FAMILY_ORDER}

    fam["C1"] = [_le([(v, 1)], store - M[v], "C1") for v in xs]
    fam["C2"] = [_le([(v, 1)], store - M[v], "C2") for v in us]
    fam["C3"] = [_le([(v, 1)], store - M[v], "C3") for v in ws]
    fam["C4mul"] = [
        _le([(w, 1), (Lx(w.k, w.j), 1)], prod - M[w] - M[Lx(w.k, w.j)], "C4mul") for w in ws
    ]
    fam["C5"] = [_ge([(v, 1)], 0, "C5") for v in xs]
    fam["C6"] = [_ge([(v, 1)], 0, "C6") for v in us]
    fam["C7"] = [_ge([(v, 1)], 0, "C7") for v in ws]
    fam["C8"] = [_ge([(Lu(m, i), 1)], abs(tau), "C8") for i in range(widths[m])]
    fam["C9"] = [
        _le([(Lu(k, i), 1), (Lx(k - 1, j), -1)], 0, "C9")
        for k in range(1, m + 1) for i in range(widths[k]) for j in range(widths[k - 1])
    ]
    fam["C10"] = [
        _le([(Lx(k, i), 1), (Lu(k, i), -1)], 0, "C10") for k in range(1, m) for i in range(widths[k])
    ]
    for k in range(1, m + 1):
        n = widths[k - 1]
        for i in range(widths[k]):
            terms = [(Lu(k, i), ufp(n) + 1)]
            rhs = -tau - 1
            for j in range(n):
                terms += [(Lx(k - 1, j), 1), (Lw(k - 1, i, j), 1)]
                rhs += M[Lx(k - 1, j)] + M[Lw(k - 1, i, j)]
            fam["C11"].append(_ge(terms, rhs, "C11"))

    if cfg.profile == "sound":
        fam["C12"] = _theta_constraints(model, M, tau)
        fam["C13"] = _chain_constraints(model, M, tau)

    seen, out = set(), []
    for tag in FAMILY_ORDER:
        for c in fam[tag]:
            if c.key() not in seen:
                seen.add(c.key())
                out.append(c)
    objective = {v: 1 for v in variables}
    if cfg.objective_weights:
        objective.update({v: int(w) for v, w in cfg.objective_weights.items() if v in objective})
    return ConstraintSystem(tuple(variables), out, objective, M, T)


def _theta_constraints(model: NetModel, M: Mapping[VarId, int], tau: int) -> list[LinConstraint]:
    """Keep theta <= 2**(tau+1) term by term.

    The (n+2) 2**-Lu group gets half of the budget and the 2n product terms
    share the other half, so the accumulator L pays one bit instead of
    ceil(log2(2n+1)).
    """
    out = []
    widths = model.widths
    for k in range(1, model.depth + 1):
        n = widths[k - 1]
        share = 1 + clog2(2 * n)
        for i in range(widths[k]):
            for j in range(n):
                out.append(_ge([(Lw(k - 1, i, j), 1)], M[Lx(k - 1, j)] - tau - 1 + share, "C12"))
                out.append(_ge([(Lx(k - 1, j), 1)], M[Lw(k - 1, i, j)] - tau - 1 + share, "C12"))
            out.append(_ge([(Lu(k, i), 1)], theta_floor(n, tau), "C12"))
    return out


def theta_floor(n: int, tau: int) -> int:
    """Smallest accumulator L that C12 admits for a neuron of fan-in ``n``."""
    return clog2(n + 2) - tau


def chain_slack(model: NetModel) -> list[list[int]]:
    """Per neuron the exponent g with certified error(u) <= 2**(g - Lu).

    g = ceil(log2(nnz + 1)) + 1 where nnz counts the nonzero weights of the neuron.
    """
    return [[clog2(sum(1 for w in row if w != 0) + 1) + 1 for row in layer.weights]
            for layer in model.layers]


def error_margins(model: NetModel, cfg: SynthesisConfig) -> list[list[Fraction]]:
    """A priori cap on the computed-value error of every neuron under the sound profile.

    C12 forces Lu >= lam(n) before any solve and C13 certifies error <= 2**(g - Lu),
    so 2**(g - lam) bounds the error whatever the solver picks.
    """
    tau, widths = cfg.tau, model.widths
    out = []
    for k, gs in enumerate(chain_slack(model), start=1):
        n = widths[k - 1]
        lam = theta_floor(n, tau)
        out.append([Fraction(2) ** (g - lam) for g in gs])
    return out


def _chain_constraints(model: NetModel, M: Mapping[VarId, int], tau: int) -> list[LinConstraint]:
    """Error certificate propagated layer to layer.

    With |x_j| < 2**(Mx_j+1), |w| < 2**(Mw+1) and inputs carrying an error below
    2**(h_j - Lx_j), the error of neuron u is at most
        sum_j |x_j| 2**-Lw + |w| 2**(h_j - Lx_j)   +   (nnz+1) 2**-Lu.
    Requiring every one of the 2*nnz product terms to be <= 2**(g - c - Lu) with
    2**c >= 4*nnz bounds the products by 2**(g-1-Lu); the truncations add at most
    2**(g-1-Lu).  Hence error(u) <= 2**(g - Lu).  A truncated copy x = u >> s then
    errs by less than 2**(g+1-Lx), so h = g + 1 downstream; network inputs have h = 0.
    Outputs need g - Lu <= tau.
    """
    slack = chain_slack(model)
    out, C8like = [], []
    m = model.depth
    for k in range(1, m + 1):
        layer = model.layers[k - 1]
        for i, row in enumerate(layer.weights):
            nz = [j for j, w in enumerate(row) if w != 0]
            g = slack[k - 1][i]
            if nz:
                c = 2 + clog2(len(nz))
                for j in nz:
                    h = 0 if k == 1 else slack[k - 2][j] + 1
                    out.append(_ge([(Lw(k - 1, i, j), 1), (Lu(k, i), -1)],
                                   M[Lx(k - 1, j)] + 1 - g + c, "C13"))
                    out.append(_ge([(Lx(k - 1, j), 1), (Lu(k, i), -1)],
                                   M[Lw(k - 1, i, j)] + 1 + h - g + c, "C13"))
            if k == m:
                C8like.append(_ge([(Lu(k, i), 1)], g - tau, "C13"))
    return out + C8like


# --- textual LP format -------------------------------------------------------

def to_lp_text(system: ConstraintSystem) -> str:
    lines = [f"# fxsynth constraint system, {len(system.variables)} variables, "
             f"{len(system.constraints)} constraints"]
    if system.T is not None:
        lines.append(f"# T {system.T}")
    for v in system.variables:
        if v in system.M:
            lines.append(f"# M {v} {system.M[v]}")
    lines.append("minimize: " + _expr((v, system.objective[v]) for v in system.variables))
    lines += [str(c) for c in system.constraints]
    return "\n".join(lines) + "\n"


_TERM = re.compile(r"([+-])?\s*(\d+)\s+(L[uxw]\[[\d,]+\])")
_ROW = re.compile(r"^(\w+):\s*(.*?)\s*(<=|>=)\s*(-?\d+)\s*$")


def _parse_terms(text: str, lineno: int) -> list[tuple[VarId, int]]:
    pos, terms = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m:
            raise LPFormatError(f"line {lineno}: cannot parse term at {text[pos:]!r}")
        c = int(m.group(2)) * (-1 if m.group(1) == "-" else 1)
        terms.append((VarId.parse(m.group(3)), c))
        pos = m.end()
        while pos < len(text) and text[pos] == " ":
            pos += 1
    return terms


def parse_lp_text(text: str) -> ConstraintSystem:
    objective: dict[VarId, int] | None = None
    constraints, M, T = [], {}, None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 3 and parts[0] == "M":
                M[VarId.parse(parts[1])] = int(parts[2])
            elif len(parts) == 2 and parts[0] == "T":
                T = int(parts[1])
            continue
        if line.startswith("minimize:"):
            objective = {v: c for v, c in _parse_terms(line[len("minimize:"):], lineno)}
            continue
        m = _ROW.match(line)
        if not m:
            raise LPFormatError(f"line {lineno}: not a constraint: {raw!r}")
        constraints.append(LinConstraint(tuple(_parse_terms(m.group(2), lineno)), m.group(3),
                                         int(m.group(4)), m.group(1)))
    if objective is None:
        raise LPFormatError("missing objective line")
    variables = set(objective)
    for c in constraints:
        variables.update(v for v, _ in c.terms)
    return ConstraintSystem(tuple(variables), constraints, objective, M, T)
