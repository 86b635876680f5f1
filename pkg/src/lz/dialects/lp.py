"""The lp dialect: integers, constructors, closures, join points and refcounts."""
from __future__ import annotations

from lz.dialects import RUNTIME_CALLS, OpSignature
from lz.ir import IntAttr, IntType, ModuleIR, ObjType, int_fits
from lz.verify import Diagnostic, DiagnosticSink

SMALL_LIMIT = 1 << 62


def _check_int(op, error):
    ty = op.results[0].type if op.results else None
    value = op.attrs.get("value")
    if not isinstance(value, IntAttr):
        return
    if isinstance(ty, IntType):
        if not int_fits(value.value, ty):
            error(f"integer literal {value.value} does not fit {ty}")
    elif isinstance(ty, ObjType):
        if not -SMALL_LIMIT < value.value < SMALL_LIMIT:
            error("boxed lp.int literal exceeds the small integer range; use lp.bigint")
    else:
        error("lp.int must produce an integer or !lp.t")


def _check_switch(op, error):
    cases = op.attrs.get("cases")
    if cases is None:
        return
    if len(op.regions) != len(cases.values) + 1:
        error(
            f"lp.switch has {len(cases.values)} cases but {len(op.regions)} regions"
            " (expected one per case plus @default)"
        )
    if len(set(cases.values)) != len(cases.values):
        error("duplicate case value in lp.switch")


def _check_construct(op, error):
    tag = op.attrs.get("tag")
    if isinstance(tag, IntAttr) and tag.value < 0:
        error("constructor tag must be non-negative")


def _check_project(op, error):
    idx = op.attrs.get("index")
    if isinstance(idx, IntAttr) and idx.value < 0:
        error("lp.project index must be non-negative")


def _check_joinpoint(op, error):
    if len(op.regions) == 2 and op.regions[1].blocks and op.regions[1].entry.params:
        error("lp.joinpoint scope region must not take parameters")


def lp_op_table() -> list[OpSignature]:
    """Signatures of every lp op (plus `call`, which lp programs use for saturated calls)."""
    return [
        OpSignature("lp.int", results=("val",), attrs=(("value", "int"),), check=_check_int),
        OpSignature("lp.bigint", results=("obj",), attrs=(("value", "int"),)),
        OpSignature(
            "lp.switch",
            operands=("int",),
            attrs=(("cases", "ints"),),
            regions=None,
            is_terminator=True,
            check=_check_switch,
        ),
        OpSignature(
            "lp.construct", variadic="obj", results=("obj",), attrs=(("tag", "int"),),
            check=_check_construct,
        ),
        OpSignature("lp.getlabel", operands=("obj",), results=("i64",)),
        OpSignature(
            "lp.project", operands=("obj",), results=("obj",), attrs=(("index", "int"),),
            check=_check_project,
        ),
        OpSignature("lp.pap", variadic="obj", results=("obj",), attrs=(("fn", "sym"),)),
        OpSignature("lp.papextend", operands=("obj", "obj"), variadic="obj", results=("obj",)),
        OpSignature(
            "lp.joinpoint", regions=2, region_params=True, is_terminator=True,
            check=_check_joinpoint,
        ),
        OpSignature("lp.jump", variadic="val", is_terminator=True),
        OpSignature("lp.inc", operands=("obj",)),
        OpSignature("lp.dec", operands=("obj",)),
        OpSignature("lp.return", operands=("val",), is_terminator=True),
        OpSignature(
            "call", variadic="val", results=("val",), attrs=(("fn", "sym"),),
            optional_attrs=(("musttail", "flag"),),
        ),
        # Reads a top-level closure slot (see ModuleIR.globals).
        OpSignature("lp.global", results=("obj",), attrs=(("name", "sym"),)),
    ]


ARM_TERMINATORS = {"lp.return", "lp.jump", "lp.switch", "lp.joinpoint", "rgn.run"}


def enclosing_joinpoint(op):
    """The nearest lp.joinpoint whose *scope* region contains ``op``.

    Jumps inside a join point's body therefore target an outer join point,
    which keeps join points non-recursive.
    """
    child = op
    cur = op.parent_op()
    while cur is not None:
        if cur.name == "lp.joinpoint" and len(cur.regions) == 2:
            region = child.parent.parent
            if region is cur.regions[1]:
                return cur
        child = cur
        cur = cur.parent_op()
    return None


def callee_signature(m: ModuleIR, name: str):
    """(param types or None, arity, result type or constraint) for a call target."""
    if name in m.funcs:
        f = m.funcs[name]
        return f.param_types, len(f.param_types), f.result_type
    if name in RUNTIME_CALLS:
        arity, res = RUNTIME_CALLS[name]
        return None, arity, res
    return None


def verify_lp(m: ModuleIR) -> list[Diagnostic]:
    sink = DiagnosticSink(m)
    for func in m.funcs.values():
        for op in func.walk():
            error = sink.at(func, op)
            if op.name in ("lp.switch", "lp.joinpoint"):
                for region in op.regions:
                    for block in region.blocks:
                        term = block.terminator
                        if term is None or term.name not in ARM_TERMINATORS:
                            error(f"{op.name} region must end in lp.return or lp.jump")
            elif op.name == "lp.jump":
                jp = enclosing_joinpoint(op)
                if jp is None:
                    error("jump without enclosing joinpoint")
                    continue
                params = jp.regions[0].entry.params if jp.regions[0].blocks else []
                if [p.type for p in params] != [v.type for v in op.operands]:
                    error("lp.jump arguments do not match joinpoint parameters")
            elif op.name == "call":
                _verify_call(m, func, op, error)
            elif op.name == "lp.pap":
                target = op.attrs["fn"].name
                if target not in m.funcs:
                    error(f"lp.pap target @{target} is not a function")
                    continue
                arity = len(m.funcs[target].param_types)
                if len(op.operands) >= arity:
                    error(
                        f"lp.pap of @{target} with {len(op.operands)} arguments is not partial"
                        f" (arity {arity})"
                    )
                if any(not isinstance(t, ObjType) for t in m.funcs[target].param_types):
                    error(f"lp.pap target @{target} must take only !lp.t parameters")
            elif op.name == "lp.global":
                if op.attrs["name"].name not in m.globals:
                    error(f"unknown global slot @{op.attrs['name'].name}")
    return sink.sorted()


def _verify_call(m, func, op, error):
    target = op.attrs["fn"].name
    sig = callee_signature(m, target)
    if sig is None:
        error(f"call to unknown function @{target}")
        return
    params, arity, result = sig
    if len(op.operands) != arity:
        error(f"call to @{target} is not saturated: {len(op.operands)} arguments for arity {arity}")
    elif params is not None and [v.type for v in op.operands] != list(params):
        error(f"call to @{target} has mismatched argument types")
    if op.results:
        rty = op.results[0].type
        if isinstance(result, str):
            from lz.dialects import satisfies

            if not satisfies(rty, result):
                error(f"call to @{target} has wrong result type {rty}")
        elif rty != result:
            error(f"call to @{target} has wrong result type {rty}")
    if "musttail" in op.attrs:
        block = op.parent
        idx = block.ops.index(op)
        nxt = block.ops[idx + 1] if idx + 1 < len(block.ops) else None
        if (
            nxt is None
            or nxt.name not in ("lp.return", "ret")
            or not op.results
            or nxt.operands != [op.results[0]]
        ):
            error("musttail not in tail position")
        elif op.results[0].type != func.result_type:
            error("musttail callee result type differs from caller result type")
