import re
import subprocess

import pytest

from fxsynth.codegen import emit, emit_float_reference
from fxsynth.constraints import SynthesisConfig
from fxsynth.errors import EmitError
from fxsynth.evaluate import eval_fixed
from fxsynth.report import synthesize
from fxsynth.solve import FormatAssignment
from fxsynth.symbols import Lw, Lx

from golden import compile_c, input_mantissas, load_fixture, run_outputs
from oracles import random_inputs
from worked_example import X0, worked_assignment


def _listing_assignment(example):
    """Worked-example formats with the first input at <1,23> and weight 3.5 at <1,5>."""
    a = worked_assignment(example)
    L = dict(a.L)
    L[Lx(0, 0)], L[Lw(0, 0, 0)] = 23, 5
    return FormatAssignment(L, a.M, 32)


def test_listing_lines(example):
    src = emit(example, _listing_assignment(example), X0)
    lines = [ln.strip() for ln in src.splitlines()]
    assert "x[0][0]=1073741824;    // <1,29>" in lines
    assert "x[0][0]=x[0][0]>>6;    // <1,23>" in lines
    assert any(ln.startswith("mul=INT64_C(112)*x[0][0];") and "<1,5>" in ln for ln in lines)
    assert any(ln.startswith("u[1][0]=max(0,u[1][0]);") for ln in lines)


def test_integer_only(example, example_box):
    for m in (example, example_box):
        rep = synthesize(m, SynthesisConfig(0.02, 32))
        for src in (emit(m, rep.assignment), emit(m, rep.assignment, argv_inputs=True)):
            code = re.sub(r"/\*.*?\*/|//[^\n]*", "", src, flags=re.S)
            assert not re.search(r"\b(float|double)\b", code)
            assert "arith_shift_probe" in src


def test_emission_is_deterministic(example):
    a = worked_assignment(example)
    assert emit(example, a, X0).encode() == emit(example, a, X0).encode()


def test_literal_overflow(example):
    a = worked_assignment(example)
    M = dict(a.M)
    M[Lx(0, 0)] = -3            # 2.0 cannot be loaded at <-3, 29>
    with pytest.raises(EmitError):
        emit(example, FormatAssignment(a.L, M, 32), X0)


def test_unsupported_word_size(example):
    a = worked_assignment(example)
    with pytest.raises(EmitError):
        emit(example, FormatAssignment(a.L, a.M, 64), X0)


def test_compiles_without_warnings(cc, tmp_path, example, example_box):
    for n, (m, a) in enumerate([(example, worked_assignment(example)),
                                (example_box, synthesize(example_box, SynthesisConfig(2**-6, 32)).assignment),
                                (example, synthesize(example, SynthesisConfig(2**-2, 16, profile="linearized")).assignment)]):
        for argv in (False, True):
            _, warnings = compile_c(cc, emit(m, a, X0, argv_inputs=argv), tmp_path, f"p{n}{argv:d}")
            assert warnings == ""


def test_baked_worked_example_program(cc, tmp_path, example):
    exe, _ = compile_c(cc, emit(example, worked_assignment(example), X0), tmp_path)
    out = subprocess.run([str(exe)], capture_output=True, text=True, check=True).stdout
    assert out.splitlines() == ["u[3][0]=76620 <9,10>", "u[3][1]=-22536 <7,10>"]


def test_argv_program_checks_arity(cc, tmp_path, example):
    exe, _ = compile_c(cc, emit(example, worked_assignment(example), argv_inputs=True), tmp_path)
    assert subprocess.run([str(exe), "1"], capture_output=True).returncode == 2


def test_float_reference(cc, tmp_path, example):
    exe, _ = compile_c(cc, emit_float_reference(example, X0), tmp_path, "ref")
    out = subprocess.run([str(exe)], capture_output=True, text=True, check=True).stdout
    vals = [float(line.split("=")[1]) for line in out.splitlines()]
    assert round(vals[0], 4) == 74.8136 and round(vals[1], 4) == -22.0094


def test_golden_live(cc, tmp_path, example_box, rng):
    """100 random in-range inputs: compiled program and evaluator agree bit for bit."""
    a = synthesize(example_box, SynthesisConfig(0.02, 32)).assignment
    exe, _ = compile_c(cc, emit(example_box, a, argv_inputs=True), tmp_path)
    for x in random_inputs(rng, example_box, 100):
        want = [v.mantissa for v in eval_fixed(example_box, a, x).outputs]
        assert run_outputs(exe, input_mantissas(example_box, a, x)) == want


def test_golden_fixture():
    """Outputs recorded from compiled programs; runs without a compiler."""
    cases = list(load_fixture())
    assert len(cases) >= 6 and len(cases[0][2]) == 100
    for m, a, runs in cases:
        for run in runs:
            assert input_mantissas(m, a, run["x"]) == run["argv"]
            assert [v.mantissa for v in eval_fixed(m, a, run["x"]).outputs] == run["outputs"]
