"""SSA IR with nested regions for a small functional language.

Three levels share one IR: the lp dialect (switches, join points, closures,
reference counts), the rgn dialect (first-class region values) and a flat
control-flow graph.  See lz.cli for the command-line driver.
"""
from lz.interp import ProgramResult, RcMode, eval_module
from lz.ir import FuncIR, ModuleIR
from lz.lowering import lower_lp_to_rgn, lower_rgn_to_cfg, lower_to_cfg
from lz.passes import FULL_RGN_PIPELINE, run_pipeline
from lz.textual import parse_module, print_module
from lz.verify import verify_module

__all__ = [
    "FULL_RGN_PIPELINE", "FuncIR", "ModuleIR", "ProgramResult", "RcMode", "eval_module",
    "lower_lp_to_rgn", "lower_rgn_to_cfg", "lower_to_cfg", "parse_module", "print_module",
    "run_pipeline", "verify_module",
]
