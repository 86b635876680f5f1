"""lp control flow -> rgn region values -> flat CFG."""
from __future__ import annotations

from lz.ir import (
    I1,
    Block,
    FuncIR,
    IntAttr,
    IntListAttr,
    IntType,
    ModuleIR,
    Op,
    Region,
    RgnValType,
    Successor,
    clone_func,
    defining_op,
)


class LoweringError(Exception):
    pass


# ---------------------------------------------------------------------------
# lp -> rgn


def _rgn_val(region: Region) -> Op:
    params = tuple(p.type for p in region.entry.params)
    return Op("rgn.val", result_types=[RgnValType(params)], regions=[region])


def _lower_block(block: Block, jp_stack: list):
    """Rewrite ``block`` in place; ``jp_stack`` maps enclosing joinpoints to their rgn.val."""
    old_ops = block.ops
    block.ops = []
    for op in old_ops:
        if op.name == "lp.switch":
            _lower_switch(block, op, jp_stack)
        elif op.name == "lp.joinpoint":
            body, scope = op.regions
            _lower_block(body.entry, jp_stack)
            val = block.append(_rgn_val(body))
            scope_block = scope.entry
            _lower_block(scope_block, jp_stack + [val.result])
            for inner in scope_block.ops:
                block.append(inner)
        elif op.name == "lp.jump":
            if not jp_stack:
                raise LoweringError("jump without enclosing joinpoint")
            block.append(Op("rgn.run", [jp_stack[-1]] + op.operands))
        else:
            for r in op.regions:
                for b in r.blocks:
                    _lower_block(b, jp_stack)
            block.append(op)


def _lower_switch(block: Block, op: Op, jp_stack: list):
    (scrutinee,) = op.operands
    cases = op.attrs["cases"].values
    arms = []
    for region in op.regions:
        _lower_block(region.entry, jp_stack)
        arms.append(block.append(_rgn_val(region)).result)
    ty = RgnValType(())
    if len(arms) == 1:
        chosen = arms[0]
    elif len(arms) == 2:
        if scrutinee.type == I1 and cases[0] == 1:
            cond = scrutinee
        else:
            k = block.append(Op("lp.int", result_types=[scrutinee.type], attrs={"value": IntAttr(cases[0])}))
            cond = block.append(Op("arith.cmpeq", [scrutinee, k.result], [I1])).result
        chosen = block.append(Op("select", [cond, arms[0], arms[1]], [ty])).result
    else:
        chosen = block.append(
            Op("switch", [scrutinee] + arms, [ty], {"cases": IntListAttr(tuple(cases))})
        ).result
    block.append(Op("rgn.run", [chosen]))


def lower_func_to_rgn(func: FuncIR) -> FuncIR:
    f = clone_func(func)
    for b in f.body.blocks:
        _lower_block(b, [])
    return f


def lower_lp_to_rgn(m: ModuleIR) -> ModuleIR:
    """Replace lp.switch / lp.joinpoint / lp.jump by rgn.val, select/switch and rgn.run."""
    return ModuleIR({k: lower_func_to_rgn(f) for k, f in m.funcs.items()}, dict(m.globals))


# ---------------------------------------------------------------------------
# rgn -> CFG


class _CfgBuilder:
    def __init__(self, func: FuncIR):
        self.func = func
        self.body = Region()
        self.blocks: dict[Op, Block] = {}  # rgn.val -> materialized block
        self.work: list = []

    def block_for(self, val_op: Op) -> Block:
        blk = self.blocks.get(val_op)
        if blk is None:
            src = val_op.regions[0].entry
            blk = Block()
            # Region parameters become block parameters (same Value objects).
            blk.params = src.params
            for p in blk.params:
                p.owner = blk
            self.blocks[val_op] = blk
            self.body.add_block(blk)
            self.work.append((src.ops, blk))
        return blk

    def run(self) -> FuncIR:
        entry_src = self.func.body.entry
        entry = Block()
        entry.params = entry_src.params
        for p in entry.params:
            p.owner = entry
        self.body.add_block(entry)
        self.work.append((entry_src.ops, entry))
        while self.work:
            ops, blk = self.work.pop(0)
            self.fill(ops, blk)
        return FuncIR(self.func.name, None, self.func.result_type, self.body)

    def fill(self, ops, blk: Block):
        for op in ops:
            if op.name == "rgn.val":
                continue
            if op.name in ("select", "switch") and isinstance(op.results[0].type, RgnValType):
                continue
            if op.name == "rgn.run":
                blk.append(self.branch(op.operands[0], op.operands[1:]))
            elif op.name == "lp.return":
                blk.append(Op("ret", op.operands))
            elif op.regions:
                raise LoweringError(f"{op.name} still carries regions; lower lp control flow first")
            else:
                blk.append(op)

    def branch(self, target, args) -> Op:
        d = defining_op(target)
        if d is None:
            raise LoweringError("rgn.run target is not resolvable to a region")
        if d.name == "rgn.val":
            return Op("br", successors=[Successor(self.block_for(d), list(args))])
        if d.name == "select":
            cond, a, b = d.operands
            return Op("cond_br", [cond], successors=[self.succ(a, args), self.succ(b, args)])
        if d.name == "switch":
            scrut, *vals = d.operands
            return Op(
                "switch_br", [scrut], attrs=dict(d.attrs),
                successors=[self.succ(v, args) for v in vals],
            )
        raise LoweringError(f"rgn.run target defined by {d.name}")

    def succ(self, target, args) -> Successor:
        d = defining_op(target)
        if d is not None and d.name == "rgn.val":
            return Successor(self.block_for(d), list(args))
        # Nested choice: route through a trampoline block.
        tramp = self.body.add_block(Block())
        tramp.append(self.branch(target, args))
        return Successor(tramp, [])


def lower_func_to_cfg(func: FuncIR) -> FuncIR:
    if len(func.body.blocks) > 1:
        return clone_func(func)  # already a CFG
    return _CfgBuilder(clone_func(func)).run()


def lower_rgn_to_cfg(m: ModuleIR) -> ModuleIR:
    """Flatten rgn.val regions into blocks and rgn.run into br/cond_br/switch_br."""
    return ModuleIR({k: lower_func_to_cfg(f) for k, f in m.funcs.items()}, dict(m.globals))


def lower_to_cfg(m: ModuleIR) -> ModuleIR:
    return lower_rgn_to_cfg(lower_lp_to_rgn(m))
