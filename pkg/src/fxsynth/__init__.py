"""Synthesis of integer-only fixed-point code for feed-forward neural networks."""
from .constraints import ConstraintSystem, LinConstraint, SynthesisConfig, generate, parse_lp_text, theta_bound
from .evaluate import FxTrace, abs_error, eval_fixed
from .fxp import (
    FxFormat,
    FxNum,
    align,
    fixed_to_float,
    float_to_fixed,
    fx_add,
    fx_linear,
    fx_mul,
    fx_relu,
    ufp,
)
from .model import LayerSpec, NetModel, eval_float, eval_float_trace, load_model, save_model
from .ranges import RangeReport, analyze_interval, analyze_sampled, assign_M
from .report import SynthesisReport, feasibility_sweep, gain_report, synthesize
from .solve import Feasible, FormatAssignment, Infeasible, solve, verify
from .symbols import VarId

__version__ = "0.1.0"
