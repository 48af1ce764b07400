"""Integer solve of a ConstraintSystem: LP relaxation by exact simplex, then
branch-and-bound, then a lexicographic pass that makes the optimum unique."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .constraints import ConstraintSystem, LinConstraint
from .errors import IterationLimitError
from .fxp import FxFormat
from .lp import solve_lp
from .symbols import Lu, Lw, Lx, VarId

DEFAULT_NODE_BUDGET = 20_000


@dataclass(frozen=True)
class FormatAssignment:
    L: Mapping[VarId, int]
    M: Mapping[VarId, int]
    T: int = 32

    def __post_init__(self):
        for v, l in self.L.items():
            if not isinstance(l, int) or l < 0:
                raise ValueError(f"{v}: fractional length must be a natural number, got {l!r}")

    def format(self, v: VarId) -> FxFormat:
        """<M, L> of ``v``; M is raised to -L when the value is below resolution."""
        L = self.L[v]
        return FxFormat(max(self.M[v], -L), L)

    def u(self, k: int, i: int) -> FxFormat:
        return self.format(Lu(k, i))

    def x(self, k: int, i: int) -> FxFormat:
        return self.format(Lx(k, i))

    def w(self, k: int, i: int, j: int) -> FxFormat:
        return self.format(Lw(k, i, j))

    def to_dict(self) -> dict:
        keys = sorted(self.L, key=VarId.sort_key)
        return {"T": self.T, "formats": {str(v): {"M": self.M[v], "L": self.L[v]} for v in keys}}

    @staticmethod
    def from_dict(doc: Mapping) -> "FormatAssignment":
        L, M = {}, {}
        for name, f in doc["formats"].items():
            v = VarId.parse(name)
            L[v], M[v] = int(f["L"]), int(f["M"])
        return FormatAssignment(L, M, int(doc.get("T", 32)))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


@dataclass(frozen=True)
class InfeasibilityWitness:
    family: str
    conflicts_with: tuple[str, ...] = ()

    def __str__(self) -> str:
        if self.conflicts_with:
            return f"{self.family} conflicts with {', '.join(self.conflicts_with)}"
        return f"{self.family} is infeasible on its own"


@dataclass(frozen=True)
class Feasible:
    assignment: FormatAssignment
    objective: int
    stats: dict = field(default_factory=dict, compare=False)
    feasible = True


@dataclass(frozen=True)
class Infeasible:
    witness: InfeasibilityWitness
    feasible = False


SolveOutcome = Feasible | Infeasible


class _Problem:
    """A ConstraintSystem lowered to index form, single-variable rows folded into bounds."""

    def __init__(self, system: ConstraintSystem, constraints: Sequence[LinConstraint] | None = None):
        self.vars = list(system.variables)
        self.index = {v: n for n, v in enumerate(self.vars)}
        n = len(self.vars)
        self.cost = [system.objective.get(v, 1) for v in self.vars]
        self.lb: list = [0] * n
        self.ub: list = [None] * n
        self.rows, self.rlo, self.rhi = [], [], []
        for c in system.constraints if constraints is None else constraints:
            self.add(c)

    def add(self, c: LinConstraint):
        if len(c.terms) == 1:
            (v, a), = c.terms
            j = self.index[v]
            # integer variable: round the implied bound inward
            le = (c.rel == "<=") == (a > 0)
            bound = Fraction(c.rhs, a)
            if le:
                b = math.floor(bound)
                self.ub[j] = b if self.ub[j] is None else min(self.ub[j], b)
            else:
                self.lb[j] = max(self.lb[j], math.ceil(bound))
            return
        self.rows.append({self.index[v]: a for v, a in c.terms})
        self.rlo.append(c.rhs if c.rel == ">=" else None)
        self.rhi.append(c.rhs if c.rel == "<=" else None)

    def add_row(self, coeffs: dict[int, int], lo=None, hi=None):
        self.rows.append(coeffs)
        self.rlo.append(lo)
        self.rhi.append(hi)


def _bb(p: _Problem, cost, lb, ub, budget: int, incumbent=None, inc_obj=None):
    """Depth-first branch-and-bound; returns (x, objective) of the best integer point."""
    stack = [(list(lb), list(ub))]
    nodes = 0
    while stack:
        lo, hi = stack.pop()
        nodes += 1
        if nodes > budget:
            raise IterationLimitError(f"branch-and-bound exceeded {budget} nodes")
        res = solve_lp(cost, p.rows, p.rlo, p.rhi, lo, hi)
        if res.status != "optimal":
            continue
        bound = math.ceil(res.objective)
        if inc_obj is not None and bound >= inc_obj:
            continue
        frac = next((j for j, v in enumerate(res.x) if v.denominator != 1), None)
        if frac is None:
            incumbent, inc_obj = [int(v) for v in res.x], int(res.objective)
            continue
        v = res.x[frac]
        up_lo = list(lo)
        up_lo[frac] = math.ceil(v)
        down_hi = list(hi)
        down_hi[frac] = math.floor(v)
        stack.append((up_lo, hi))
        stack.append((lo, down_hi))
    return incumbent, inc_obj, nodes


def _integer_feasible(p: _Problem, budget: int) -> bool:
    x, _, _ = _bb(p, [0] * len(p.vars), p.lb, p.ub, budget)
    return x is not None


def _witness(system: ConstraintSystem, budget: int) -> InfeasibilityWitness:
    fams = system.families()
    by_tag = {t: [c for c in system.constraints if c.tag == t] for t in fams}

    def feasible(tags):
        return _integer_feasible(_Problem(system, [c for t in tags for c in by_tag[t]]), budget)

    prefix: list[str] = []
    for t in fams:
        prefix.append(t)
        if not feasible(prefix):
            earlier = prefix[:-1]
            needed = tuple(f for f in earlier if feasible([g for g in prefix if g != f]))
            return InfeasibilityWitness(t, needed)
    # integer infeasibility that no prefix exposes cannot happen; keep a fallback
    return InfeasibilityWitness(fams[-1] if fams else "none")


def solve(system: ConstraintSystem, node_budget: int = DEFAULT_NODE_BUDGET,
          lexicographic: bool = True) -> SolveOutcome:
    """Minimise the weighted sum of L; ties resolved toward the lexicographically
    smallest vector in (kind, k, i, j) order."""
    p = _Problem(system)
    n = len(p.vars)
    if any(p.ub[j] is not None and p.ub[j] < p.lb[j] for j in range(n)):
        return Infeasible(_witness(system, node_budget))
    x, obj, nodes = _bb(p, p.cost, p.lb, p.ub, node_budget)
    if x is None:
        return Infeasible(_witness(system, node_budget))
    lp_calls = nodes
    if lexicographic:
        x, extra = _lexicographic(p, x, obj, node_budget)
        lp_calls += extra
    assignment = FormatAssignment({v: x[j] for j, v in enumerate(p.vars)},
                                  {v: system.M[v] for v in p.vars if v in system.M},
                                  system.T or 32)
    if not verify_values(assignment.L, system):
        raise AssertionError("solver produced an assignment that violates the system")
    return Feasible(assignment, obj, {"nodes": nodes, "lp_solves": lp_calls})


def _lexicographic(p: _Problem, x: list[int], obj: int, budget: int):
    n = len(p.vars)
    p.add_row({j: c for j, c in enumerate(p.cost) if c}, hi=obj)
    lb, ub = list(p.lb), list(p.ub)
    calls = 0
    for r in range(n):
        if x[r] > lb[r]:
            unit = [0] * n
            unit[r] = 1
            res = solve_lp(unit, p.rows, p.rlo, p.rhi, lb, ub)
            calls += 1
            if math.ceil(res.objective) < x[r]:
                found, _, nodes = _bb(p, unit, lb, ub, budget, incumbent=x, inc_obj=x[r])
                calls += nodes
                x = found
        lb[r] = ub[r] = x[r]
    p.rows.pop(), p.rlo.pop(), p.rhi.pop()
    return x, calls


def verify_values(values: Mapping[VarId, int], system: ConstraintSystem) -> bool:
    for v in system.variables:
        l = values.get(v)
        if not isinstance(l, int) or l < 0:
            return False
    return all(c.holds(values) for c in system.constraints)


def verify(assignment: FormatAssignment | Mapping[VarId, int], system: ConstraintSystem) -> bool:
    values = assignment.L if isinstance(assignment, FormatAssignment) else assignment
    return verify_values(values, system)
