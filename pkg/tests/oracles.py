"""Reference implementations the tests compare the package against.

Nothing here calls the code under test for the quantity being checked: the
arithmetic oracle works on Fractions with math.floor/trunc, the ILP oracle
enumerates integer points with numpy, and the exact forward pass uses rationals.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Sequence

import numpy as np

TWO = Fraction(2)


# --- arithmetic --------------------------------------------------------------

def value(m: int, L: int) -> Fraction:
    return Fraction(m, 2 ** L)


def to_grid_floor(q: Fraction, L: int) -> int:
    return math.floor(q * 2 ** L)


def to_grid_trunc(q: Fraction, L: int) -> int:
    return math.trunc(q * 2 ** L)


def ref_add(am: int, aL: int, bm: int, bL: int, tL: int) -> int:
    """Each operand floored onto the target grid, then summed."""
    return to_grid_floor(value(am, aL), tL) + to_grid_floor(value(bm, bL), tL)


def ref_mul(am: int, aL: int, bm: int, bL: int, tL: int) -> int:
    """Exact rational product floored onto the target grid."""
    return to_grid_floor(value(am, aL) * value(bm, bL), tL)


def ref_ufp(q: Fraction) -> int:
    """floor(log2 q) by doubling/halving, no bit tricks."""
    assert q > 0
    e = 0
    while q >= 2:
        q /= 2
        e += 1
    while q < 1:
        q *= 2
        e -= 1
    return e


# --- integer programming -----------------------------------------------------

def _domains(system, hi: int):
    """Per-variable [lo, hi] from the single-variable rows, clipped to [0, hi]."""
    lo = {v: 0 for v in system.variables}
    up = {v: hi for v in system.variables}
    for c in system.constraints:
        if len(c.terms) != 1:
            continue
        (v, a), = c.terms
        b = Fraction(c.rhs, a)
        if (c.rel == "<=") == (a > 0):
            up[v] = min(up[v], math.floor(b))
        else:
            lo[v] = max(lo[v], math.ceil(b))
    return lo, up


def feasible_chunks(system, hi: int = 16):
    """Yield arrays of all integer points of {0..hi}^n satisfying the system,
    columns in ``system.variables`` order."""
    names = list(system.variables)
    n = len(names)
    lo, up = _domains(system, hi)
    if any(lo[v] > up[v] for v in names):
        return
    ranges = [np.arange(lo[v], up[v] + 1, dtype=np.int64) for v in names]
    pos = {v: k for k, v in enumerate(names)}
    rows = [c for c in system.constraints if len(c.terms) > 1]

    # loop over a prefix of variables in Python, vectorise the rest
    tail, size = n, 1
    while tail > 0 and size * len(ranges[tail - 1]) <= 200_000:
        tail -= 1
        size *= len(ranges[tail])
    if tail < n:
        grid = np.stack(np.meshgrid(*ranges[tail:], indexing="ij"), axis=-1).reshape(-1, n - tail)
    else:
        grid = np.zeros((1, 0), dtype=np.int64)
    for head in itertools.product(*ranges[:tail]):
        pts = np.concatenate([np.tile(np.array(head, dtype=np.int64), (len(grid), 1)), grid], axis=1)
        ok = np.ones(len(pts), dtype=bool)
        for c in rows:
            s = sum(a * pts[:, pos[v]] for v, a in c.terms)
            ok &= (s <= c.rhs) if c.rel == "<=" else (s >= c.rhs)
        if ok.any():
            yield pts[ok]


def brute_force_ilp(system, hi: int = 16):
    """Exhaustive minimum over {0..hi}^n of the objective, ties broken by the
    lexicographically smallest vector in the system's variable order.

    Returns ``(objective, {var: value})`` or ``None`` when no point is feasible.
    """
    names = list(system.variables)
    cost = np.array([system.objective[v] for v in names], dtype=np.int64)
    best = None
    for good in feasible_chunks(system, hi):
        obj = good @ cost
        m = obj.min()
        cand = good[obj == m]
        order = np.lexsort(cand.T[::-1])
        key = (int(m), tuple(int(t) for t in cand[order[0]]))
        if best is None or key < best:
            best = key
    if best is None:
        return None
    return best[0], dict(zip(names, best[1]))



def dfs_ilp(system, hi: int = 16):
    """Exhaustive depth-first search over {0..hi}^n with interval pruning.

    Same contract as ``brute_force_ilp``.  Values are tried in increasing order
    along the variable order, so the first point reaching a given objective is
    the lexicographically smallest one (costs are nonnegative); a branch is cut only when no completion
    can satisfy some row or beat the incumbent.
    """
    names = list(system.variables)
    n = len(names)
    pos = {v: k for k, v in enumerate(names)}
    lo, up = _domains(system, hi)
    if any(lo[v] > up[v] for v in names):
        return None
    lo_l = [lo[v] for v in names]
    up_l = [up[v] for v in names]
    cost = [system.objective[v] for v in names]
    rows = [([(pos[v], a) for v, a in c.terms], c.rel, c.rhs) for c in system.constraints if len(c.terms) > 1]
    # rows are re-checked with interval arithmetic whenever one of their variables is set
    touching = [[r for r in rows if any(p == k for p, _ in r[0])] for k in range(n)]
    rest_min = [sum(cost[j] * lo_l[j] for j in range(k, n)) for k in range(n + 1)]
    vals = [0] * n
    best = [None, None]

    def possible(r, depth):
        terms, rel, rhs = r
        smin = smax = 0
        for p, a in terms:
            if p <= depth:
                smin += a * vals[p]
                smax += a * vals[p]
            elif a > 0:
                smin += a * lo_l[p]
                smax += a * up_l[p]
            else:
                smin += a * up_l[p]
                smax += a * lo_l[p]
        return smin <= rhs if rel == "<=" else smax >= rhs

    def go(depth, partial):
        if best[0] is not None and partial + rest_min[depth] >= best[0]:
            return
        if depth == n:
            best[0], best[1] = partial, tuple(vals)
            return
        for val in range(lo_l[depth], up_l[depth] + 1):
            vals[depth] = val
            if all(possible(r, depth) for r in touching[depth]):
                go(depth + 1, partial + cost[depth] * val)

    go(0, 0)
    if best[0] is None:
        return None
    return best[0], dict(zip(names, best[1]))

# --- networks ----------------------------------------------------------------

def random_net(rng: np.random.Generator, max_layers: int = 4, max_neurons: int = 8,
               wmax: float = 8.0, dims: Sequence[int] = (1, 2, 3)):
    """Random feed-forward net, ReLU hidden layers, Linear output, small input box."""
    from fxsynth.model import LayerSpec, NetModel

    d = int(rng.choice(dims))
    depth = int(rng.integers(1, max_layers + 1))
    budget = max_neurons
    widths = [d]
    for k in range(depth):
        room = budget - (depth - k - 1)
        w = int(rng.integers(1, max(1, min(4, room)) + 1))
        budget -= w
        widths.append(w)
    layers = []
    for k in range(depth):
        W = rng.uniform(-wmax, wmax, (widths[k + 1], widths[k]))
        W *= rng.choice([1.0, 0.1], size=W.shape)
        b = rng.uniform(-2, 2, widths[k + 1])
        act = "relu" if k < depth - 1 else "linear"
        layers.append(LayerSpec(W.tolist(), b.tolist(), act))
    box = []
    for lo in rng.uniform(-2, 2, d):
        box.append((float(lo), float(lo + rng.uniform(0.1, 3))))
    return NetModel(tuple(layers), d, tuple(box))


def _f32_inside(lo: float, hi: float) -> tuple[np.float32, np.float32]:
    a, b = np.float32(lo), np.float32(hi)
    if float(a) < lo:
        a = np.nextafter(a, np.float32(np.inf))
    if float(b) > hi:
        b = np.nextafter(b, np.float32(-np.inf))
    return a, b


def random_inputs(rng: np.random.Generator, model, count: int) -> list[list[float]]:
    """Uniform points of the input box, rounded to float32 values that stay inside it."""
    bounds = [_f32_inside(lo, hi) for lo, hi in model.input_range]
    out = []
    for _ in range(count):
        out.append([float(np.clip(np.float32(rng.uniform(float(a), float(b))), a, b))
                    for a, b in bounds])
    return out


def exact_forward(model, x: Sequence[float]) -> list[list[Fraction]]:
    """Post-activation value of every neuron in exact rational arithmetic."""
    cur = [Fraction(float(np.float32(v))) for v in x]
    out = []
    for layer in model.layers:
        nxt = []
        for row, b in zip(layer.weights, layer.bias):
            s = sum((Fraction(w) * v for w, v in zip(row, cur)), Fraction(0)) + Fraction(b)
            nxt.append(max(s, Fraction(0)) if layer.activation == "relu" else s)
        out.append(nxt)
        cur = nxt
    return out


def theta_formula(x_MLs, w_MLs, u_L: int, magnitude_shift: int = 0) -> Fraction:
    """Per-neuron bound written out directly from its closed form.

    ``magnitude_shift=1`` replaces every 2**M magnitude by 2**(M+1).
    """
    s = Fraction(0)
    for (Mx, Lx), (Mw, Lw) in zip(x_MLs, w_MLs):
        s += TWO ** (Mx + magnitude_shift - Lw) + TWO ** (Mw + magnitude_shift - Lx)
    n = len(x_MLs)
    return s + n * TWO ** (-u_L) + TWO ** (1 - u_L)


def theta_check(model, assignment, inputs, magnitude_shift: int = 0):
    """Compare each neuron's fixed-point error with its per-neuron bound plus the
    error inherited from the previous layer (scaled by |w|).

    Returns ``(checks, violations, worst ratio)``.
    """
    from fxsynth.evaluate import eval_fixed

    checks = violations = 0
    worst = 0.0
    for x in inputs:
        ref = exact_forward(model, x)
        trace = eval_fixed(model, assignment, x, strict=False)
        upstream = [Fraction(0)] * model.input_dim
        for k, layer in enumerate(model.layers, start=1):
            errs = []
            for i, row in enumerate(layer.weights):
                xf = [assignment.x(k - 1, j) for j in range(len(row))]
                wf = [assignment.w(k - 1, i, j) for j in range(len(row))]
                bound = theta_formula([(f.M, f.L) for f in xf], [(f.M, f.L) for f in wf],
                                      assignment.u(k, i).L, magnitude_shift)
                bound += sum(abs(Fraction(w)) * e for w, e in zip(row, upstream))
                err = abs(trace.post[k - 1][i].to_fraction() - ref[k - 1][i])
                checks += 1
                violations += err > bound
                worst = max(worst, float(err / bound))
                errs.append(err)
            upstream = errs
    return checks, violations, worst
