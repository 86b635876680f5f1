"""Scalar comparison and the flat-CFG terminators produced by rgn lowering."""
from __future__ import annotations

from lz.dialects import OpSignature
from lz.ir import IntListAttr


def _check_cmp(op, error):
    if len(op.operands) == 2 and op.operands[0].type != op.operands[1].type:
        error("arith.cmpeq operands have different widths")


def _succ_count(n):
    def check(op, error):
        if len(op.successors) != n:
            error(f"{op.name} expects {n} successors, got {len(op.successors)}")

    return check


def _check_switch_br(op, error):
    cases = op.attrs.get("cases")
    if isinstance(cases, IntListAttr) and len(op.successors) != len(cases.values) + 1:
        error("switch_br needs one successor per case plus a default")


def std_op_table() -> list[OpSignature]:
    return [
        OpSignature("arith.cmpeq", operands=("int", "int"), results=("i1",), check=_check_cmp),
        OpSignature("br", is_terminator=True, successors=True, check=_succ_count(1)),
        OpSignature(
            "cond_br", operands=("i1",), is_terminator=True, successors=True, check=_succ_count(2)
        ),
        OpSignature(
            "switch_br", operands=("int",), attrs=(("cases", "ints"),), is_terminator=True,
            successors=True, check=_check_switch_br,
        ),
        OpSignature("ret", operands=("val",), is_terminator=True),
    ]
