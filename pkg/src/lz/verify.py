"""Structural verifier: SSA scoping, op signatures, block structure, symbols."""
from __future__ import annotations

from dataclasses import dataclass

from lz.ir import FuncIR, ModuleIR, ObjType, Op, Region, RgnValType, SymbolAttr


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    func: str
    path: tuple  # (block, op[, region, block, op ...]) indices from the function body

    @property
    def block(self) -> int:
        return self.path[0] if self.path else 0

    @property
    def op(self) -> int:
        return self.path[1] if len(self.path) > 1 else 0

    def __str__(self):
        loc = ".".join(str(i) for i in self.path)
        return f"{self.severity}: @{self.func}[{loc}]: {self.message}"


def op_path(op: Op | None) -> tuple:
    if op is None or op.parent is None:
        return (0, 0)
    parts = []
    cur = op
    while cur is not None:
        block = cur.parent
        region = block.parent
        parts.append(block.ops.index(cur))
        parts.append(region.blocks.index(block))
        owner = region.parent
        if isinstance(owner, Op):
            parts.append(owner.regions.index(region))
            cur = owner
        else:
            cur = None
    return tuple(reversed(parts))


class DiagnosticSink:
    def __init__(self, module: ModuleIR):
        self.order = {name: i for i, name in enumerate(module.funcs)}
        self.items: list[Diagnostic] = []

    def at(self, func: FuncIR | str, op: Op | None, severity="error"):
        name = func if isinstance(func, str) else func.name

        def emit(message: str):
            self.items.append(Diagnostic(severity, message, name, op_path(op)))

        return emit

    def sorted(self) -> list[Diagnostic]:
        return sorted(
            self.items, key=lambda d: (self.order.get(d.func, len(self.order)), d.func, d.path)
        )


def predecessors(region: Region) -> dict:
    preds = {b: [] for b in region.blocks}
    for b in region.blocks:
        term = b.terminator
        if term is None:
            continue
        for s in term.successors:
            if s.block in preds:
                preds[s.block].append(b)
    return preds


def reachable_blocks(region: Region) -> list:
    seen = []
    stack = [region.entry]
    while stack:
        b = stack.pop()
        if b in seen:
            continue
        seen.append(b)
        term = b.terminator
        if term is not None:
            stack.extend(reversed([s.block for s in term.successors]))
    return seen


def block_dominators(region: Region) -> dict:
    """Map each block to the set of blocks dominating it (itself included)."""
    blocks = region.blocks
    entry = blocks[0]
    reach = set(reachable_blocks(region))
    preds = predecessors(region)
    everything = set(blocks)
    dom = {b: ({b} if b is entry else set(everything)) for b in blocks}
    changed = True
    while changed:
        changed = False
        for b in blocks:
            if b is entry:
                continue
            ps = [p for p in preds[b] if p in reach]
            new = set.intersection(*(dom[p] for p in ps)) if ps else set()
            new = new | {b}
            if new != dom[b]:
                dom[b] = new
                changed = True
    return dom


def _check_signature(op: Op, sig, error):
    from lz.dialects import ATTR_KINDS, satisfies

    n = len(op.operands)
    fixed = len(sig.operands)
    if (sig.variadic is None and n != fixed) or n < fixed:
        error(f"{op.name} expects {fixed}{'+' if sig.variadic else ''} operands, got {n}")
    else:
        for i, v in enumerate(op.operands):
            constraint = sig.operands[i] if i < fixed else sig.variadic
            # Misplaced region values get a more specific message from verify_rgn.
            if not satisfies(v.type, constraint) and not isinstance(v.type, RgnValType):
                error(f"{op.name} operand {i} has type {v.type}, expected {constraint}")
    if len(op.results) != len(sig.results):
        error(f"{op.name} expects {len(sig.results)} results, got {len(op.results)}")
    else:
        for r, constraint in zip(op.results, sig.results):
            if not satisfies(r.type, constraint):
                error(f"{op.name} result has type {r.type}, expected {constraint}")
    allowed = dict(sig.attrs) | dict(sig.optional_attrs)
    for name, kind in sig.attrs:
        if name not in op.attrs:
            error(f"{op.name} is missing attribute '{name}'")
    for name, attr in op.attrs.items():
        if name not in allowed:
            error(f"{op.name} has unexpected attribute '{name}'")
        elif not isinstance(attr, ATTR_KINDS[allowed[name]]):
            error(f"{op.name} attribute '{name}' has the wrong kind")
    if sig.regions is not None and len(op.regions) != sig.regions:
        error(f"{op.name} expects {sig.regions} regions, got {len(op.regions)}")
    if not sig.region_params:
        for r in op.regions:
            if r.blocks and r.entry.params:
                error(f"{op.name} regions take no parameters")
    if op.successors and not sig.successors:
        error(f"{op.name} cannot have successors")
    if sig.check is not None:
        sig.check(op, error)


class _Structural:
    def __init__(self, module: ModuleIR, sink: DiagnosticSink):
        self.module = module
        self.sink = sink

    def run(self):
        from lz.dialects import RUNTIME_CALLS

        m = self.module
        for slot, init in m.globals.items():
            f = m.funcs.get(init)
            if f is None:
                self.sink.at(init, None)(f"global @{slot} initializer @{init} is not a function")
            elif f.param_types or not isinstance(f.result_type, ObjType):
                self.sink.at(f, None)(f"global initializer @{init} must take no arguments and return !lp.t")
        symbols = set(m.funcs) | set(m.globals) | set(RUNTIME_CALLS)
        for func in m.funcs.values():
            self.func = func
            self.region(func.body, frozenset(), top=True)
            for op in func.walk():
                for attr in op.attrs.values():
                    if isinstance(attr, SymbolAttr) and attr.name not in symbols:
                        self.sink.at(func, op)(f"unresolved symbol @{attr.name}")

    def region(self, region: Region, visible: frozenset, top=False):
        error = self.sink.at(self.func, region.parent if isinstance(region.parent, Op) else None)
        if not region.blocks:
            error("empty region")
            return
        if len(region.blocks) == 1:
            self.block(region.entry, visible)
            return
        if not top:
            error("region owned by an operation must have exactly one block")
        reach = set(reachable_blocks(region))
        doms = block_dominators(region)
        defs = {b: set(b.params) | {r for op in b.ops for r in op.results} for b in region.blocks}
        for b in region.blocks:
            if b not in reach:
                first = b.ops[0] if b.ops else None
                self.sink.at(self.func, first)("unreachable block")
                continue
            vis = set(visible)
            for d in doms[b]:
                if d is not b:
                    vis |= defs[d]
            self.block(b, frozenset(vis))

    def block(self, block, visible: frozenset):
        from lz.dialects import lookup

        vis = set(visible) | set(block.params)
        if not block.ops:
            self.sink.at(self.func, None)("block must end in a terminator")
            return
        last = len(block.ops) - 1
        for i, op in enumerate(block.ops):
            error = self.sink.at(self.func, op)
            sig = lookup(op.name)
            if sig is None:
                error(f"unknown operation '{op.name}'")
            for v in op.all_operands():
                if v not in vis:
                    error("use of undefined value")
                    break
            if sig is not None:
                if sig.is_terminator and i != last:
                    error("terminator not last")
                if i == last and not sig.is_terminator:
                    error("block must end in a terminator")
                _check_signature(op, sig, error)
            for s in op.successors:
                region = block.parent
                if s.block.parent is not region:
                    error("branch target outside the enclosing region")
                elif [v.type for v in s.args] != [p.type for p in s.block.params]:
                    error("branch arguments do not match block parameters")
            if op.name in ("lp.return", "ret") and len(op.operands) == 1:
                if op.operands[0].type != self.func.result_type:
                    error(
                        f"returned value has type {op.operands[0].type},"
                        f" function returns {self.func.result_type}"
                    )
            for r in op.regions:
                self.region(r, frozenset(vis))
            vis.update(op.results)


def verify_structure(m: ModuleIR) -> list[Diagnostic]:
    sink = DiagnosticSink(m)
    _Structural(m, sink).run()
    return sink.sorted()


def verify_module(m: ModuleIR) -> list[Diagnostic]:
    """All structural checks plus the lp and rgn dialect rules.

    Returns the diagnostics ordered by location; an empty list means the
    module is well formed.  Dialect rules only run on structurally clean
    modules, since they assume resolvable operands.
    """
    from lz.dialects.lp import verify_lp
    from lz.dialects.rgn import verify_rgn

    diags = verify_structure(m)
    if diags:
        return diags
    sink = DiagnosticSink(m)
    sink.items = verify_lp(m) + verify_rgn(m)
    return sink.sorted()
