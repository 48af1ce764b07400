"""End-to-end pipeline, size accounting, feasibility sweeps and report rendering."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .constraints import ConstraintSystem, SynthesisConfig, error_margins, generate
from .evaluate import FxTrace, eval_fixed
from .model import NetModel, eval_float
from .ranges import RangeReport, analyze_interval, analyze_sampled, assign_M
from .solve import Feasible, FormatAssignment, Infeasible, solve
from .symbols import VarId

MAX_CORNER_DIM = 8


# --- sizes -------------------------------------------------------------------

def gain_percent(before: int, after: int) -> Fraction:
    """Exact (before - after) / before * 100."""
    if before <= 0:
        raise ValueError("before must be positive")
    return Fraction((before - after) * 100, before)


def format_percent(q: Fraction, digits: int = 2) -> str:
    """Decimal text truncated (not rounded) to ``digits`` places, e.g. 284/3 -> '94.66'."""
    scale = 10 ** digits
    t = math.trunc(q * scale)
    sign = "-" if t < 0 else ""
    t = abs(t)
    return f"{sign}{t // scale}.{t % scale:0{digits}d}"


@dataclass
class SizeReport:
    T: int
    layers: list[dict]
    before_bits: int
    after_bits: int

    @property
    def gain(self) -> Fraction:
        return gain_percent(self.before_bits, self.after_bits)

    @property
    def gain_text(self) -> str:
        return format_percent(self.gain)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "layers": self.layers,
            "before_bits": self.before_bits,
            "after_bits": self.after_bits,
            "before_bytes": Fraction(self.before_bits, 8).__float__(),
            "after_bytes": Fraction(self.after_bits, 8).__float__(),
            "gain_percent": self.gain_text,
            "gain_exact": str(self.gain),
        }


def gain_report(assignment: FormatAssignment, cfg: SynthesisConfig | int | None = None) -> SizeReport:
    """Bits of all neuron outputs at T versus at their synthesized <M, L>."""
    if cfg is None:
        T = assignment.T
    else:
        T = cfg if isinstance(cfg, int) else cfg.T
    per_layer: dict[int, list[int]] = {}
    for v in sorted(assignment.L, key=VarId.sort_key):
        if v.kind == "Lu":
            f = assignment.format(v)
            per_layer.setdefault(v.k, []).append(f.M + f.L + 1)
    layers = []
    for k in sorted(per_layer):
        before, after = len(per_layer[k]) * T, sum(per_layer[k])
        layers.append({"layer": k, "neurons": len(per_layer[k]), "before_bits": before,
                       "after_bits": after, "gain_percent": format_percent(gain_percent(before, after))})
    return SizeReport(T, layers, sum(l["before_bits"] for l in layers), sum(l["after_bits"] for l in layers))


# --- pipeline ----------------------------------------------------------------

def probe_inputs(model: NetModel, extra: Sequence[Sequence[float]] = ()) -> list[list[float]]:
    """Centre, then corners of the input box (low/high vectors only past 8 inputs), then ``extra``."""
    lo = [r[0] for r in model.input_range]
    hi = [r[1] for r in model.input_range]
    pts = [[(a + b) / 2 for a, b in zip(lo, hi)]]
    if model.input_dim <= MAX_CORNER_DIM:
        corners = [list(c) for c in itertools.product(*model.input_range)]
    else:
        corners = [lo, hi]
    for c in corners + [list(map(float, e)) for e in extra]:
        if c not in pts:
            pts.append(c)
    return pts


def argmax(values: Sequence[float]) -> int:
    return max(range(len(values)), key=lambda i: (values[i], -i))


@dataclass
class ProbeResult:
    x: list[float]
    reference: list[float]
    trace: FxTrace

    @property
    def errors(self) -> list[float]:
        return [float(abs(Fraction(r) - a.to_fraction())) for r, a in zip(self.reference, self.trace.outputs)]

    @property
    def agrees(self) -> bool:
        return argmax(self.reference) == argmax([float(a) for a in self.trace.outputs])


@dataclass
class SynthesisReport:
    model: NetModel
    cfg: SynthesisConfig
    ranges: RangeReport
    system: ConstraintSystem
    outcome: Feasible | Infeasible
    probes: list[ProbeResult] = field(default_factory=list)
    sizes: SizeReport | None = None

    @property
    def feasible(self) -> bool:
        return self.outcome.feasible

    @property
    def assignment(self) -> FormatAssignment | None:
        return self.outcome.assignment if self.feasible else None

    @property
    def max_error(self) -> float:
        return max((max(p.errors) for p in self.probes), default=0.0)

    @property
    def within_threshold(self) -> bool:
        return self.feasible and self.max_error <= float(self.cfg.threshold)

    @property
    def agreement(self) -> tuple[int, int]:
        return sum(p.agrees for p in self.probes), len(self.probes)

    def exit_status(self) -> int:
        if not self.feasible:
            return 2
        return 0 if self.within_threshold else 1

    def neuron_rows(self, probe: int = 0) -> list[dict]:
        """Per-neuron rows (float, mantissa, format, decoded) for one probe; the error column is filled for outputs only."""
        if not self.probes:
            return []
        p = self.probes[probe]
        ref_trace = _float_layers(self.model, p.x)
        rows = []
        for k, post in enumerate(p.trace.post, start=1):
            for i, a in enumerate(post):
                fl = ref_trace[k - 1][i]
                fmt = self.assignment.u(k, i)
                rows.append({
                    "neuron": f"u{k}{i}",
                    "float": fl,
                    "mantissa": a.mantissa,
                    "format": str(fmt),
                    "fixed": float(a),
                    "abs_error": float(abs(Fraction(fl) - a.to_fraction())) if k == self.model.depth else None,
                })
        return rows

    def to_dict(self) -> dict:
        doc = {
            "config": {"threshold": float(self.cfg.threshold), "T": self.cfg.T, "mode": self.cfg.analysis_mode,
                       "M_policy": self.cfg.M_policy, "profile": self.cfg.profile},
            "model": {"widths": list(self.model.widths), "input_range": [list(r) for r in self.model.input_range]},
            "constraints": {"count": len(self.system.constraints), "variables": len(self.system.variables),
                            "families": {t: sum(c.tag == t for c in self.system.constraints)
                                         for t in self.system.families()}},
            "ranges": self.ranges.to_dict(),
            "feasible": self.feasible,
        }
        if not self.feasible:
            doc["witness"] = {"family": self.outcome.witness.family,
                              "conflicts_with": list(self.outcome.witness.conflicts_with),
                              "text": str(self.outcome.witness)}
            return doc
        agree, total = self.agreement
        doc.update({
            "objective": self.outcome.objective,
            "assignment": self.assignment.to_dict(),
            "neurons": self.neuron_rows(),
            "probes": [{"x": p.x, "reference": p.reference, "fixed": [float(a) for a in p.trace.outputs],
                        "mantissas": [a.mantissa for a in p.trace.outputs], "errors": p.errors,
                        "warnings": p.trace.warnings} for p in self.probes],
            "max_error": self.max_error,
            "within_threshold": self.within_threshold,
            "class_agreement": {"agree": agree, "total": total,
                                "rule": "argmax of outputs (reconstructed decision rule)"},
            "sizes": self.sizes.to_dict() if self.sizes else None,
        })
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_markdown(self) -> str:
        c = self.cfg
        out = [f"# Fixed-point synthesis report", "",
               f"- network widths: {list(self.model.widths)}",
               f"- threshold: {c.threshold}, T = {c.T}, range mode: {c.analysis_mode}, "
               f"M policy: {c.M_policy}, profile: {c.profile}",
               f"- constraints: {len(self.system.constraints)} over {len(self.system.variables)} variables",
               ""]
        if not self.feasible:
            out.append(f"**Infeasible**: {self.outcome.witness}")
            return "\n".join(out) + "\n"
        out.append(f"**Feasible**, total fractional bits {self.outcome.objective}")
        out += ["", f"## Neurons at probe {self.probes[0].x}", "",
                "| neuron | float | fixed | format | decoded | abs error |",
                "|---|---|---|---|---|---|"]
        for r in self.neuron_rows():
            err = f"{r['abs_error']:.3g}" if r["abs_error"] is not None else ""
            out.append(f"| {r['neuron']} | {r['float']:.6g} | {r['mantissa']} | {r['format']} "
                       f"| {r['fixed']:.6g} | {err} |")
        agree, total = self.agreement
        out += ["", "## Probes", "",
                f"- max output error over {total} probes: {self.max_error:.3g} "
                f"({'within' if self.within_threshold else 'ABOVE'} threshold)",
                f"- argmax agreement (reconstructed decision rule): {agree}/{total}"]
        warn = sorted({w for p in self.probes for w in p.trace.warnings})
        out += [f"- warning: {w}" for w in warn]
        s = self.sizes
        out += ["", "## Sizes", "", "| layer | neurons | bits before | bits after | gain % |", "|---|---|---|---|---|"]
        for l in s.layers:
            out.append(f"| {l['layer']} | {l['neurons']} | {l['before_bits']} | {l['after_bits']} | {l['gain_percent']} |")
        out.append(f"| all | | {s.before_bits} | {s.after_bits} | {s.gain_text} |")
        return "\n".join(out) + "\n"


def _float_layers(model: NetModel, x) -> list[list[float]]:
    from .model import eval_float_trace
    return [post for _, post in eval_float_trace(model, x)]


def M_map(model: NetModel, ranges: RangeReport, cfg: SynthesisConfig) -> dict[VarId, int]:
    """M per variable; the sound profile widens M by the a priori error cap."""
    margins = error_margins(model, cfg) if cfg.profile == "sound" else None
    return assign_M(ranges, model, cfg.M_policy, margins)


def analyze(model: NetModel, cfg: SynthesisConfig) -> RangeReport:
    if cfg.analysis_mode == "sampled":
        return analyze_sampled(model, cfg.samples)
    return analyze_interval(model)


def synthesize(model: NetModel, cfg: SynthesisConfig, probes: Sequence[Sequence[float]] = (),
               ranges: RangeReport | None = None, node_budget: int | None = None) -> SynthesisReport:
    """Range analysis, constraint generation, solve and probe evaluation."""
    ranges = ranges or analyze(model, cfg)
    system = generate(model, M_map(model, ranges, cfg), cfg)
    outcome = solve(system) if node_budget is None else solve(system, node_budget)
    rep = SynthesisReport(model, cfg, ranges, system, outcome)
    if outcome.feasible:
        a = outcome.assignment
        # only the sound profile over interval ranges guarantees every value fits;
        # otherwise overflowing values are widened and reported as trace warnings
        strict = cfg.profile == "sound" and ranges.sound
        for x in probe_inputs(model, probes):
            rep.probes.append(ProbeResult(x, eval_float(model, x), eval_fixed(model, a, x, strict=strict)))
        rep.sizes = gain_report(a, cfg)
    return rep


# --- sweep -------------------------------------------------------------------

@dataclass
class SweepResult:
    thresholds: list[float]
    bits: list[int]
    cells: dict[tuple[int, float], tuple[bool, str]]

    def row(self, T: int) -> list[bool]:
        return [self.cells[(T, t)][0] for t in self.thresholds]

    def monotone(self) -> bool:
        """No feasible cell right of an infeasible one in a row, nor below it in a column."""
        for T in self.bits:
            r = self.row(T)
            if any(not a and b for a, b in zip(r, r[1:])):
                return False
        by_T = sorted(self.bits)
        for t in self.thresholds:
            col = [self.cells[(T, t)][0] for T in by_T]
            if any(a and not b for a, b in zip(col, col[1:])):
                return False
        return True

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["T"] + [threshold_label(t) for t in self.thresholds])
        for T in self.bits:
            w.writerow([T] + ["✓" if ok else "×" for ok in self.row(T)])
        return buf.getvalue()


def threshold_label(t: float) -> str:
    m, e = math.frexp(t)
    return f"2^{e - 1}" if m == 0.5 else repr(t)


def _cell(args):
    model, ranges, cfg = args
    out = solve(generate(model, M_map(model, ranges, cfg), cfg))
    return out.feasible, "" if out.feasible else str(out.witness)


def feasibility_sweep(model: NetModel, thresholds: Sequence[float], bits: Sequence[int],
                      base: SynthesisConfig | None = None, jobs: int = 1) -> SweepResult:
    base = base or SynthesisConfig(0.5)
    ranges = analyze(model, base)
    grid = [(T, t) for T in bits for t in thresholds]
    tasks = [(model, ranges, replace(base, threshold=t, T=T)) for T, t in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell, tasks))
    else:
        results = [_cell(t) for t in tasks]
    return SweepResult(list(thresholds), list(bits), dict(zip(grid, results)))
