"""C99 emission of the integer-only network and of a float32 reference program.

The fixed-point program follows the evaluator step for step: inputs are stored
at their widest format and shifted to Lx, each product is shifted to the
neuron's L before it is accumulated, ReLU is ``max(0, u)``.  Stored values
(``x`` arrays) use the exact-width type of the word size; accumulators and
products are ``int64_t``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import EmitError, FxOverflowError
from .evaluate import bias_format, input_load_L
from .fxp import FxFormat, float_to_fixed
from .model import NetModel
from .solve import FormatAssignment

STORAGE_TYPES = {8: "int8_t", 16: "int16_t", 32: "int32_t"}

_PRELUDE = """\
#include <stdint.h>
#include <stdio.h>
{extra_includes}
/* Right shifts of negative values must be arithmetic (floor). */
typedef char fx_arith_shift_probe[((INT64_C(-1) >> 1) == INT64_C(-1)) ? 1 : -1];

static inline int64_t max(int64_t a, int64_t b)
{{
    return a > b ? a : b;
}}
"""


def _fmt(f: FxFormat) -> str:
    return f"<{f.M},{f.L}>"


def _shift_stmt(lhs: str, src: str, by: int) -> str:
    """``lhs = src`` scaled by 2**-by (right shift) or 2**-by (exact multiply)."""
    if by > 0:
        return f"{lhs}={src}>>{by};"
    if by < 0:
        return f"{lhs}={src}*INT64_C({1 << -by});"
    return f"{lhs}={src};" if lhs != src else ""


def _check_literal(value: int, bits: int, what: str) -> int:
    if not -(1 << (bits - 1)) <= value < (1 << (bits - 1)):
        raise EmitError(f"{what} literal {value} exceeds {bits}-bit storage")
    return value


def _mantissa(value: float, fmt: FxFormat, bits: int, what: str) -> int:
    try:
        mant = float_to_fixed(value, fmt).mantissa
    except FxOverflowError as exc:
        raise EmitError(f"{what} {value} does not fit {_fmt(fmt)}") from exc
    return _check_literal(mant, bits, what)


def emit(model: NetModel, assignment: FormatAssignment, x: Sequence | None = None,
         argv_inputs: bool = False) -> str:
    """C source for the network; ``x`` is baked in unless ``argv_inputs`` is set.

    With ``argv_inputs`` the program reads ``input_dim`` integers from the command
    line, each the mantissa of an input at its load format (listed in the header).
    """
    T = assignment.T
    store = STORAGE_TYPES.get(T)
    if store is None:
        raise EmitError(f"unsupported word size {T}")
    if x is None and not argv_inputs:
        x = [(lo + hi) / 2 for lo, hi in model.input_range]
    widths = model.widths
    width = max(widths)
    m = model.depth
    body: list[str] = []

    def put(stmt: str, comment: str = ""):
        if stmt:
            body.append(f"    {stmt}" + (f"    // {comment}" if comment else ""))

    load_formats = []
    for j in range(model.input_dim):
        fx = assignment.x(0, j)
        load_formats.append(FxFormat(fx.M, input_load_L(fx.M, fx.L, T)))

    header = [f"/* Fixed-point network, {m} layers, widths {list(widths)}, T={T}."]
    if argv_inputs:
        header.append(" * Usage: prog m_0 ... m_{n-1}; input j has value m_j * 2^-L_j with")
        for j, f in enumerate(load_formats):
            header.append(f" *   input {j}: format {_fmt(f)}, L_{j} = {f.L}")
    header.append(" */")

    put("/* inputs */")
    for j, lf in enumerate(load_formats):
        fx = assignment.x(0, j)
        if argv_inputs:
            put(f"x[0][{j}]=({store})strtoll(argv[{j + 1}], NULL, 10);", _fmt(lf))
        else:
            mant = _mantissa(float(np.float32(x[j])), lf, T, "input")
            put(f"x[0][{j}]={mant};", _fmt(lf))
        put(_shift_stmt(f"x[0][{j}]", f"x[0][{j}]", lf.L - fx.L), _fmt(fx))

    for k, layer in enumerate(model.layers, start=1):
        put(f"/* layer {k} */")
        for i, (row, b) in enumerate(zip(layer.weights, layer.bias)):
            fu = assignment.u(k, i)
            u = f"u[{k}][{i}]"
            put(f"{u}=0;")
            for j, w in enumerate(row):
                fw, fx = assignment.w(k - 1, i, j), assignment.x(k - 1, j)
                wm = _mantissa(w, fw, 64, "weight")
                put(f"mul=INT64_C({wm})*x[{k - 1}][{j}];",
                    f"<{fw.M + fx.M + 1},{fw.L + fx.L}>={_fmt(fw)}*{_fmt(fx)}")
                put(_shift_stmt("mul", "mul", fw.L + fx.L - fu.L), f"<{fw.M + fx.M + 1},{fu.L}>")
                put(f"{u}={u}+mul;", _fmt(fu))
            bm = _mantissa(b, bias_format(b, fu.L), 64, "bias")
            put(f"{u}={u}+INT64_C({bm});",
                f"{_fmt(fu)}+{_fmt(bias_format(b, fu.L))}")
            if layer.activation == "relu":
                put(f"{u}=max(0,{u});", f"ReLU({u})")
        if k < m:
            for i in range(layer.width):
                fu, fx = assignment.u(k, i), assignment.x(k, i)
                src = f"u[{k}][{i}]" if fu.L == fx.L else f"(u[{k}][{i}]>>{fu.L - fx.L})"
                if fu.L < fx.L:
                    raise EmitError(f"input x[{k}][{i}] would need more bits than its producer")
                put(f"x[{k}][{i}]=({store}){src};", _fmt(fx))

    put("/* outputs: mantissa and format */")
    for i in range(widths[m]):
        fu = assignment.u(m, i)
        put(f'printf("u[{m}][{i}]=%lld <{fu.M},{fu.L}>\\n", (long long)u[{m}][{i}]);')

    extra = "#include <stdlib.h>\n" if argv_inputs else ""
    sig = "int main(int argc, char **argv)" if argv_inputs else "int main(void)"
    lines = header + [_PRELUDE.format(extra_includes=extra), sig, "{"]
    lines.append(f"    {store} x[{m}][{width}];")
    lines.append(f"    int64_t u[{m + 1}][{width}];")
    lines.append("    int64_t mul;")
    lines.append("    if ((INT64_C(-8) >> 1) != INT64_C(-4)) {")
    lines.append('        fputs("arithmetic right shift required\\n", stderr);')
    lines.append("        return 3;")
    lines.append("    }")
    if argv_inputs:
        lines.append(f"    if (argc != {model.input_dim + 1}) {{")
        lines.append(f'        fputs("expected {model.input_dim} input mantissas\\n", stderr);')
        lines.append("        return 2;")
        lines.append("    }")
    lines += body
    lines += ["    return 0;", "}"]
    return "\n".join(lines) + "\n"


def _c_float(v: float) -> str:
    text = np.format_float_scientific(np.float32(v), unique=True, trim="-")
    return f"{text}f"


def emit_float_reference(model: NetModel, x: Sequence | None = None, argv_inputs: bool = False) -> str:
    """Single-precision C program with the evaluator's accumulation order."""
    if x is None and not argv_inputs:
        x = [(lo + hi) / 2 for lo, hi in model.input_range]
    widths = model.widths
    width = max(widths)
    m = model.depth
    lines = [f"/* Float32 reference network, {m} layers, widths {list(widths)}. */",
             "#include <stdio.h>"]
    if argv_inputs:
        lines.append("#include <stdlib.h>")
    lines += ["", "int main(int argc, char **argv)" if argv_inputs else "int main(void)", "{",
              f"    float x[{m + 1}][{width}];", "    float s;"]
    if argv_inputs:
        lines += [f"    if (argc != {model.input_dim + 1}) return 2;"]
    for j in range(model.input_dim):
        src = f"strtof(argv[{j + 1}], NULL)" if argv_inputs else _c_float(x[j])
        lines.append(f"    x[0][{j}]={src};")
    for k, layer in enumerate(model.layers, start=1):
        for i, (row, b) in enumerate(zip(layer.weights, layer.bias)):
            lines.append("    s=0.0f;")
            for j, w in enumerate(row):
                lines.append(f"    s=s+{_c_float(w)}*x[{k - 1}][{j}];")
            lines.append(f"    s=s+{_c_float(b)};")
            if layer.activation == "relu":
                lines.append("    if (!(s > 0.0f)) s=0.0f;")
            lines.append(f"    x[{k}][{i}]=s;")
    for i in range(widths[m]):
        lines.append(f'    printf("u[{m}][{i}]=%.9g\\n", (double)x[{m}][{i}]);')
    lines += ["    return 0;", "}"]
    return "\n".join(lines) + "\n"
