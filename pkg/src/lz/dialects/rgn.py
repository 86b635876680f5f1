"""The rgn dialect: regions as first-class, non-escaping SSA values."""
from __future__ import annotations

from lz.dialects import OpSignature
from lz.ir import IntListAttr, ModuleIR, RgnValType
from lz.verify import Diagnostic, DiagnosticSink


def _check_val(op, error):
    if len(op.regions) != 1 or not op.regions[0].blocks:
        return
    params = tuple(p.type for p in op.regions[0].entry.params)
    if op.results and op.results[0].type != RgnValType(params):
        error("rgn.val result type does not match its region parameters")


def _check_run(op, error):
    if not op.operands or not isinstance(op.operands[0].type, RgnValType):
        return
    expected = list(op.operands[0].type.params)
    if [v.type for v in op.operands[1:]] != expected:
        error("rgn.run arguments do not match region parameters")


def _check_select(op, error):
    if len(op.operands) != 3 or not op.results:
        return
    a, b = op.operands[1].type, op.operands[2].type
    if a != b:
        error("select operands have mismatched types")
    elif op.results[0].type != a:
        error("select result type differs from operand type")


def _check_switch(op, error):
    cases = op.attrs.get("cases")
    if not isinstance(cases, IntListAttr) or not op.results:
        return
    if len(op.operands) != len(cases.values) + 2:
        error(f"switch needs {len(cases.values) + 1} value operands for {len(cases.values)} cases")
        return
    if len(set(cases.values)) != len(cases.values):
        error("duplicate case value in switch")
    rty = op.results[0].type
    if any(v.type != rty for v in op.operands[1:]):
        error("switch operands have mismatched types")


def rgn_op_table() -> list[OpSignature]:
    return [
        OpSignature("rgn.val", results=("rgn",), regions=1, region_params=True, check=_check_val),
        OpSignature("rgn.run", operands=("rgn",), variadic="val", is_terminator=True, check=_check_run),
        OpSignature("select", operands=("i1", "any", "any"), results=("any",), check=_check_select),
        OpSignature(
            "switch", operands=("int",), variadic="any", results=("any",),
            attrs=(("cases", "ints"),), check=_check_switch,
        ),
    ]


def _escape_message(user) -> str:
    if user.name == "call":
        return "region value escapes via call"
    if user.name in ("lp.return", "ret"):
        return "region value returned"
    if user.name == "lp.construct":
        return "region value stored in constructor"
    if user.name in ("lp.pap", "lp.papextend"):
        return "region value captured by closure"
    return f"region value used by {user.name}"


def _legal_use(user, position: int) -> bool:
    if user.name == "rgn.run":
        return position == 0
    if user.name == "select":
        return position in (1, 2)
    if user.name == "switch":
        return position >= 1
    return False


def verify_rgn(m: ModuleIR) -> list[Diagnostic]:
    sink = DiagnosticSink(m)
    for func in m.funcs.values():
        for block in [func.body.entry] + [b for op in func.walk() for r in op.regions for b in r.blocks]:
            for p in block.params:
                if isinstance(p.type, RgnValType):
                    owner = block.ops[0] if block.ops else None
                    sink.at(func, owner)("region value as block parameter")
        for op in func.walk():
            error = sink.at(func, op)
            for i, v in enumerate(op.operands):
                if isinstance(v.type, RgnValType) and not _legal_use(op, i):
                    error(_escape_message(op))
            for s in op.successors:
                if any(isinstance(v.type, RgnValType) for v in s.args):
                    error("region value passed to a block")
            if op.name == "rgn.val" and op.regions and op.regions[0].blocks:
                term = op.regions[0].entry.terminator
                if term is None or term.name not in ("lp.return", "lp.jump", "rgn.run"):
                    error("rgn.val region must end in lp.return, lp.jump or rgn.run")
    return sink.sorted()
