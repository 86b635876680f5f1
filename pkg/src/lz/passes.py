"""Region-aware SSA optimizations.

Every pass takes a FuncIR and returns a fresh, optimized copy; the input is
never mutated.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from lz.ir import (
    Block,
    FuncIR,
    IntAttr,
    IntType,
    ModuleIR,
    Op,
    Region,
    SymbolAttr,
    Value,
    clone_func,
    defining_op,
    regions_alpha_equal,
    replace_all_uses,
    uses,
)

# Ops that may not be deleted even when their results are unused.  `call` can
# have arbitrary effects, inc/dec touch the heap and a saturating papextend
# invokes a function.
EFFECTFUL = {"call", "lp.inc", "lp.dec", "lp.papextend"}


def is_pure(op: Op) -> bool:
    return op.name not in EFFECTFUL and not op.is_terminator


def _blocks(region: Region):
    """All blocks of ``region`` and of every region nested inside it."""
    for b in region.blocks:
        yield b
        for op in b.ops:
            for r in op.regions:
                yield from _blocks(r)


def const_int(v: Value):
    d = defining_op(v)
    if d is not None and d.name == "lp.int" and isinstance(v.type, IntType):
        return d.attrs["value"].value
    return None


def _drop(op: Op):
    op.parent.ops.remove(op)
    op.parent = None


# ---------------------------------------------------------------------------
# Dead code elimination


def dce(func: FuncIR) -> FuncIR:
    """Remove pure ops whose results are never used, repeating until nothing changes.

    An unused rgn.val disappears together with its whole region.
    """
    f = clone_func(func)
    while True:
        used = uses(f)
        dead = [
            op
            for op in f.walk()
            if op.results and is_pure(op) and not any(r in used for r in op.results)
        ]
        if not dead:
            return f
        removed = set()
        for op in dead:
            # Skip ops nested inside something already removed this round.
            cur, skip = op.parent_op(), False
            while cur is not None:
                if id(cur) in removed:
                    skip = True
                    break
                cur = cur.parent_op()
            if not skip:
                _drop(op)
                removed.add(id(op))


# ---------------------------------------------------------------------------
# select / switch folding


def _fold_once(f: FuncIR) -> bool:
    for op in list(f.walk()):
        if op.parent is None:
            continue
        chosen = None
        if op.name == "select":
            c, a, b = op.operands
            k = const_int(c)
            if k is not None:
                chosen = a if k else b
            elif a is b:
                chosen = a
        elif op.name == "switch":
            scrut, *vals = op.operands
            cases = op.attrs["cases"].values
            k = const_int(scrut)
            if k is not None:
                chosen = vals[cases.index(k)] if k in cases else vals[-1]
            elif all(v is vals[0] for v in vals):
                chosen = vals[0]
        if chosen is not None:
            replace_all_uses(f, op.results[0], chosen, check=False)
            _drop(op)
            return True
    return False


def fold_select_switch(func: FuncIR) -> FuncIR:
    f = clone_func(func)
    while _fold_once(f):
        pass
    return f


# ---------------------------------------------------------------------------
# Run of a known region


def _inline_once(f: FuncIR) -> bool:
    used = uses(f)
    for op in list(f.walk()):
        if op.name != "rgn.run" or op.parent is None:
            continue
        val = defining_op(op.operands[0])
        if val is None or val.name != "rgn.val" or len(used.get(op.operands[0], ())) != 1:
            continue
        body = val.regions[0].entry
        block = op.parent
        idx = block.ops.index(op)
        block.ops.pop(idx)
        op.parent = None
        for i, inner in enumerate(body.ops):
            block.insert(idx + i, inner)
        body.ops = []
        for p, a in zip(body.params, op.operands[1:]):
            replace_all_uses(f, p, a, check=False)
        _drop(val)
        return True
    return False


def simplify_run_known(func: FuncIR) -> FuncIR:
    """Inline a region at its run site when the rgn.val is used by that run only."""
    f = clone_func(func)
    while _inline_once(f):
        pass
    return f


# ---------------------------------------------------------------------------
# Region value numbering

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
ROLL = 1000003
MASK = (1 << 64) - 1


def fnv1a(data: bytes, h: int = FNV_OFFSET) -> int:
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK
    return h


def _attr_bytes(attrs: dict) -> bytes:
    parts = []
    for k in sorted(attrs):
        a = attrs[k]
        kind = type(a).__name__
        parts.append(f"{k}:{kind}:{a}")
    return ";".join(parts).encode()


class NotStraightLineError(ValueError):
    pass


@dataclass
class NumberingCtx:
    """Value numbers shared across the regions being compared."""

    table: dict = field(default_factory=dict)
    next_external: int = 0

    def external(self, v: Value) -> int:
        n = self.table.get(v)
        if n is None:
            n = self.table[v] = fnv1a(b"ext" + self.next_external.to_bytes(8, "little"))
            self.next_external += 1
        return n


def instruction_number(op: Op, operand_numbers) -> int:
    h = fnv1a(op.name.encode())
    h = fnv1a(b"|" + _attr_bytes(op.attrs), h)
    h = fnv1a(b"|" + ",".join(str(r.type) for r in op.results).encode(), h)
    for n in operand_numbers:
        h = fnv1a(n.to_bytes(8, "little"), h)
    return h


def region_value_number(region: Region, ctx: NumberingCtx | None = None) -> int:
    """Rolling hash over the value numbers of a straight-line region's instructions."""
    ctx = NumberingCtx() if ctx is None else ctx
    if len(region.blocks) != 1 or any(op.regions or op.successors for op in region.entry.ops):
        raise NotStraightLineError("region is not straight-line")
    block = region.entry
    local: dict = {}
    h = fnv1a(",".join(str(p.type) for p in block.params).encode())
    for i, p in enumerate(block.params):
        local[p] = fnv1a(b"param" + i.to_bytes(8, "little") + str(p.type).encode())
    for op in block.ops:
        nums = [local[v] if v in local else ctx.external(v) for v in op.operands]
        n = instruction_number(op, nums)
        for r in op.results:
            local[r] = fnv1a(r.index.to_bytes(8, "little"), n)
        h = (h * ROLL + n) & MASK
    return h


def _straight_line(region: Region) -> bool:
    return len(region.blocks) == 1 and not any(op.regions or op.successors for op in region.entry.ops)


def _region_cse_once(f: FuncIR, hasher) -> bool:
    for block in list(_blocks(f.body)):
        ctx = NumberingCtx()
        buckets: dict[int, list[Op]] = {}
        for op in list(block.ops):
            if op.name != "rgn.val" or not _straight_line(op.regions[0]):
                continue
            num = hasher(op.regions[0], ctx)
            for rep in buckets.get(num, ()):
                if rep.results[0].type == op.results[0].type and regions_alpha_equal(
                    rep.regions[0], op.regions[0]
                ):
                    replace_all_uses(f, op.results[0], rep.results[0], check=False)
                    _drop(op)
                    return True
            buckets.setdefault(num, []).append(op)
    return False


def region_cse(func: FuncIR, hasher: Callable = region_value_number) -> FuncIR:
    """Merge structurally identical straight-line rgn.vals defined in the same block.

    The value number only groups candidates; a merge additionally requires
    alpha-equivalence, so a hash collision can never merge different regions.
    """
    f = clone_func(func)
    while _region_cse_once(f, hasher):
        pass
    return f


# ---------------------------------------------------------------------------
# Scalar CSE and constant folding

CSE_OPS = {"lp.int", "arith.cmpeq", "lp.getlabel", "lp.project", "select", "switch", "lp.global"}


def _cse_key(op: Op):
    return (
        op.name,
        tuple(sorted((k, type(a).__name__, str(a)) for k, a in op.attrs.items())),
        tuple(id(v) for v in op.operands),
        tuple(str(r.type) for r in op.results),
    )


def _cse_block(f: FuncIR, block: Block, table: dict) -> bool:
    table = dict(table)
    changed = False
    for op in list(block.ops):
        if op.name in CSE_OPS and not op.regions:
            key = _cse_key(op)
            prev = table.get(key)
            if prev is not None:
                for r, q in zip(op.results, prev.results):
                    replace_all_uses(f, r, q, check=False)
                _drop(op)
                changed = True
                continue
            table[key] = op
        for r in op.regions:
            for b in r.blocks:
                changed |= _cse_block(f, b, table)
    return changed


def scalar_cse(func: FuncIR) -> FuncIR:
    """Per-block CSE of pure, non-allocating ops; nested regions see the outer table."""
    f = clone_func(func)
    for b in f.body.blocks:
        _cse_block(f, b, {})
    return f


def constant_fold(func: FuncIR) -> FuncIR:
    """Fold @nat_dec_eq and arith.cmpeq applied to two integer constants."""
    f = clone_func(func)
    changed = True
    while changed:
        changed = False
        for op in list(f.walk()):
            if op.parent is None:
                continue
            folded = None
            if op.name == "call" and op.attrs["fn"] == SymbolAttr("nat_dec_eq") and "musttail" not in op.attrs:
                ks = [_lit(v) for v in op.operands]
                if None not in ks:
                    folded = int(ks[0] == ks[1])
            elif op.name == "arith.cmpeq":
                ks = [const_int(v) for v in op.operands]
                if None not in ks:
                    folded = int(ks[0] == ks[1])
            if folded is None:
                continue
            block = op.parent
            const = Op("lp.int", result_types=[op.results[0].type], attrs={"value": IntAttr(folded)})
            block.insert(block.ops.index(op), const)
            replace_all_uses(f, op.results[0], const.results[0], check=False)
            _drop(op)
            changed = True
    return f


def _lit(v: Value):
    d = defining_op(v)
    if d is not None and d.name == "lp.int":
        return d.attrs["value"].value
    return None


# ---------------------------------------------------------------------------
# Pipelines

PASSES: dict[str, Callable[[FuncIR], FuncIR]] = {
    "dce": dce,
    "fold": fold_select_switch,
    "run-known": simplify_run_known,
    "region-cse": region_cse,
    "cse": scalar_cse,
    "constfold": constant_fold,
}

FULL_RGN_PIPELINE = ["region-cse", "fold", "run-known", "dce"]


class UnknownPassError(ValueError):
    pass


def run_pipeline(m: ModuleIR, names) -> ModuleIR:
    """Apply the named passes in order to every function of ``m``."""
    names = list(names)
    for n in names:
        if n not in PASSES:
            raise UnknownPassError(f"unknown pass '{n}'")
    funcs = {}
    for k, f in m.funcs.items():
        for n in names:
            f = PASSES[n](f)
        funcs[k] = f
    return ModuleIR(funcs, dict(m.globals))
