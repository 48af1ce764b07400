"""Command line entry point: ``fxsynth synth`` and ``fxsynth sweep``.

Exit status of ``synth``: 0 feasible and every probe within the threshold,
2 infeasible (argparse also uses 2 for usage errors), 1 anything else.
"""
from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from .codegen import emit, emit_float_reference
from .constraints import WORD_SIZES, SynthesisConfig
from .errors import FxError
from .model import load_model
from .report import feasibility_sweep, probe_inputs, synthesize


def _float_list(text: str) -> list[float]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if part.startswith("2^"):
            out.append(2.0 ** int(part[2:]))
        elif part:
            out.append(float(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _bits_list(text: str) -> list[int]:
    vals = [int(p) for p in text.split(",") if p.strip()]
    bad = [v for v in vals if v not in WORD_SIZES]
    if bad or not vals:
        raise argparse.ArgumentTypeError(f"word sizes must be among {WORD_SIZES}")
    return vals


def _load_probes(path: str | None) -> list[list[float]]:
    if not path:
        return []
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, dict):
        doc = doc.get("probes", [])
    if doc and not isinstance(doc[0], list):
        doc = [doc]
    return [[float(v) for v in p] for p in doc]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fxsynth", description="Synthesize integer-only fixed-point code for a feed-forward network.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="synthesize formats, report and C code for one configuration")
    s.add_argument("--model", required=True)
    s.add_argument("--threshold", required=True, type=float)
    s.add_argument("--bits", required=True, type=int, choices=WORD_SIZES)
    s.add_argument("--mode", choices=("interval", "sampled"), default="interval")
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--profile", choices=("sound", "linearized"), default="sound")
    s.add_argument("--m-policy", choices=("tight", "structural"), default="tight")
    s.add_argument("--emit-c", metavar="PATH", help="write the fixed-point C program")
    s.add_argument("--emit-float-c", metavar="PATH", help="write the float32 reference C program")
    s.add_argument("--argv-inputs", action="store_true", help="emitted programs read inputs from argv")
    s.add_argument("--report", metavar="PATH", help="report file; .json gives JSON, anything else Markdown")
    s.add_argument("--lp", metavar="PATH", help="write the constraint system in text LP form")
    s.add_argument("--probe", metavar="JSON", help="extra probe vectors (list of lists)")
    s.add_argument("--node-budget", type=int, default=None)

    w = sub.add_parser("sweep", help="feasibility matrix over thresholds and word sizes")
    w.add_argument("--model", required=True)
    w.add_argument("--thresholds", required=True, type=_float_list, help="comma list; 2^-k allowed")
    w.add_argument("--bits-list", required=True, type=_bits_list)
    w.add_argument("--out", required=True)
    w.add_argument("--mode", choices=("interval", "sampled"), default="interval")
    w.add_argument("--samples", type=int, default=1000)
    w.add_argument("--profile", choices=("sound", "linearized"), default="sound")
    w.add_argument("--m-policy", choices=("tight", "structural"), default="tight")
    w.add_argument("--jobs", type=int, default=1)
    return p


def _synth(args) -> int:
    model = load_model(args.model)
    cfg = SynthesisConfig(args.threshold, args.bits, args.mode, args.m_policy, args.profile, args.samples)
    rep = synthesize(model, cfg, _load_probes(args.probe), node_budget=args.node_budget)
    if args.lp:
        Path(args.lp).write_text(rep.system.to_lp_text(), encoding="utf-8")
    if args.report:
        text = rep.to_json() if args.report.endswith(".json") else rep.to_markdown()
        Path(args.report).write_text(text, encoding="utf-8")
    if not rep.feasible:
        print(f"infeasible: {rep.outcome.witness}")
        return 2
    centre = probe_inputs(model)[0]
    if args.emit_c:
        Path(args.emit_c).write_text(emit(model, rep.assignment, centre, args.argv_inputs), encoding="utf-8")
    if args.emit_float_c:
        Path(args.emit_float_c).write_text(emit_float_reference(model, centre, args.argv_inputs), encoding="utf-8")
    agree, total = rep.agreement
    print(f"feasible: {rep.outcome.objective} fractional bits; max probe error {rep.max_error:.3g} "
          f"over {total} probes (threshold {cfg.threshold}); gain {rep.sizes.gain_text}%")
    if not rep.within_threshold:
        print("probe error above threshold: the selected profile does not certify the bound", file=sys.stderr)
        return 1
    return 0


def _sweep(args) -> int:
    model = load_model(args.model)
    base = SynthesisConfig(1.0, 32, args.mode, args.m_policy, args.profile, args.samples)
    res = feasibility_sweep(model, args.thresholds, args.bits_list, base, jobs=args.jobs)
    Path(args.out).write_text(res.to_csv(), encoding="utf-8")
    print(res.to_csv(), end="")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _synth(args) if args.command == "synth" else _sweep(args)
    except FxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001 - any crash maps to the internal-error status
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
