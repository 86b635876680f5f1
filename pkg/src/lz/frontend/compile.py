"""Lowering of surface programs to the lp dialect.

Pattern matches become a decision tree built column by column, left to
right.  A row whose right-hand side would be reached from more than one leaf
of the tree is emitted once, inside an lp.joinpoint, and every leaf jumps to
it.  Integer patterns are tested through @nat_dec_eq and an lp.switch on the
i8 result; constructor patterns switch on lp.getlabel and read fields with
lp.project.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from lz.dialects.lp import SMALL_LIMIT
from lz.frontend.ast import (
    BUILTINS,
    App,
    Ctor,
    CtorPat,
    FnDef,
    IntLit,
    IntPat,
    Let,
    Match,
    MatchRow,
    PApp,
    Var,
    WildPat,
    free_vars,
    row_binders,
)
from lz.ir import (
    I8,
    I64,
    OBJ,
    Block,
    FlagAttr,
    FuncIR,
    IntAttr,
    IntListAttr,
    ModuleIR,
    Op,
    Region,
    SymbolAttr,
    Value,
)


class FrontendError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Decision trees
#
# An occurrence names a sub-value of the scrutinees: (column, field, field, ...).


@dataclass
class Leaf:
    row: int
    bindings: dict  # binder -> occurrence


@dataclass
class IntTest:
    occ: tuple
    value: int
    yes: object
    no: object


@dataclass
class CtorSwitch:
    occ: tuple
    arms: list  # (tag, arity, subtree)
    default: object


@dataclass
class _Row:
    pats: list
    index: int
    bindings: dict = field(default_factory=dict)


def _bind(row: _Row, pat, occ) -> dict:
    b = dict(row.bindings)
    if isinstance(pat, WildPat) and pat.binder:
        b[pat.binder] = occ
    return b


def build_decision_tree(rows, n_scrutinees: int):
    """Decision tree for ``rows`` (MatchRows) over ``n_scrutinees`` columns."""
    if not rows:
        raise FrontendError("match has no rows")
    for r in rows:
        if len(r.patterns) != n_scrutinees:
            raise FrontendError(
                f"arity mismatch: row has {len(r.patterns)} patterns for {n_scrutinees} scrutinees"
            )
        names = row_binders(r)
        if len(set(names)) != len(names):
            raise FrontendError("duplicate binder in match row")
    if not rows[-1].irrefutable:
        raise FrontendError("match must end in wildcard row")
    occs = [(i,) for i in range(n_scrutinees)]
    return _compile([_Row(list(r.patterns), i) for i, r in enumerate(rows)], occs)


def _compile(rows: list[_Row], occs: list):
    first = rows[0]
    if all(isinstance(p, WildPat) for p in first.pats):
        b = dict(first.bindings)
        for p, o in zip(first.pats, occs):
            b = _bind(_Row([], 0, b), p, o)
        return Leaf(first.index, b)
    col = next(i for i in range(len(occs)) if any(not isinstance(r.pats[i], WildPat) for r in rows))
    occ = occs[col]
    rest_occs = occs[:col] + occs[col + 1:]
    kinds = {type(r.pats[col]) for r in rows} - {WildPat}
    if len(kinds) > 1:
        raise FrontendError("column mixes integer and constructor patterns")

    def without(r: _Row, bindings=None) -> _Row:
        return _Row(r.pats[:col] + r.pats[col + 1:], r.index, r.bindings if bindings is None else bindings)

    if kinds == {IntPat}:
        value = next(r.pats[col].value for r in rows if isinstance(r.pats[col], IntPat))
        yes = [
            without(r, _bind(r, r.pats[col], occ))
            for r in rows
            if isinstance(r.pats[col], WildPat) or r.pats[col].value == value
        ]
        no = [r for r in rows if not (isinstance(r.pats[col], IntPat) and r.pats[col].value == value)]
        return IntTest(occ, value, _compile(yes, rest_occs), _compile(no, occs))

    arity: dict[int, int] = {}
    for r in rows:
        p = r.pats[col]
        if isinstance(p, CtorPat):
            if arity.setdefault(p.tag, len(p.args)) != len(p.args):
                raise FrontendError(f"constructor arity mismatch for tag {p.tag}")
    arms = []
    for tag, a in arity.items():
        sub_occs = [occ + (i,) for i in range(a)] + rest_occs
        spec = []
        for r in rows:
            p = r.pats[col]
            if isinstance(p, CtorPat) and p.tag == tag:
                spec.append(_Row(list(p.args) + without(r).pats, r.index, r.bindings))
            elif isinstance(p, WildPat):
                spec.append(_Row([WildPat()] * a + without(r).pats, r.index, _bind(r, p, occ)))
        arms.append((tag, a, _compile(spec, sub_occs)))
    default = [without(r, _bind(r, r.pats[col], occ)) for r in rows if isinstance(r.pats[col], WildPat)]
    return CtorSwitch(occ, arms, _compile(default, rest_occs))


def leaf_counts(tree) -> dict[int, int]:
    """How many leaves of ``tree`` reach each row."""
    counts: dict[int, int] = {}

    def go(t):
        if isinstance(t, Leaf):
            counts[t.row] = counts.get(t.row, 0) + 1
        elif isinstance(t, IntTest):
            go(t.yes)
            go(t.no)
        else:
            for _, _, sub in t.arms:
                go(sub)
            go(t.default)

    go(tree)
    return counts


def _used_occs(tree) -> set:
    out = set()

    def go(t):
        if isinstance(t, Leaf):
            out.update(t.bindings.values())
        elif isinstance(t, IntTest):
            out.add(t.occ)
            go(t.yes)
            go(t.no)
        else:
            out.add(t.occ)
            for _, _, sub in t.arms:
                go(sub)
            go(t.default)

    go(tree)
    return out


# ---------------------------------------------------------------------------
# Emission


class _Emitter:
    """Emission state for one top-level definition (and the helpers it spawns)."""

    def __init__(self, lowering: "_Lowering", owner: str, block: Block):
        self.lowering = lowering
        self.owner = owner
        self.block = block

    def append(self, op: Op) -> Op:
        return self.block.append(op)

    def obj_int(self, value: int, big: bool = False) -> Value:
        if big or value >= SMALL_LIMIT:
            return self.append(Op("lp.bigint", result_types=[OBJ], attrs={"value": IntAttr(value)})).result
        return self.append(Op("lp.int", result_types=[OBJ], attrs={"value": IntAttr(value)})).result

    def int_const(self, value: int, ty) -> Value:
        return self.append(Op("lp.int", result_types=[ty], attrs={"value": IntAttr(value)})).result

    def call(self, fn: str, args, tail: bool = False) -> Value:
        attrs = {"fn": SymbolAttr(fn)}
        if tail:
            attrs["musttail"] = FlagAttr("musttail")
        return self.append(Op("call", list(args), [OBJ], attrs)).result

    def ret(self, v: Value):
        self.append(Op("lp.return", [v]))

    def in_block(self, block: Block) -> "_Emitter":
        return _Emitter(self.lowering, self.owner, block)


def _new_region(param_types=()) -> Region:
    return Region([Block(param_types)])


def compile_match(scrutinees: list[Value], rows, ctx: _Emitter, env: dict | None = None):
    """Emit a match over ``scrutinees`` in tail position at the end of ``ctx.block``.

    Every right-hand side ends the control path with lp.return (or a jump to
    the shared join point holding it).
    """
    env = dict(env or {})
    rows = tuple(rows)
    tree = build_decision_tree(rows, len(scrutinees))
    counts = leaf_counts(tree)
    shared = [i for i in range(len(rows)) if counts.get(i, 0) > 1]
    occ_values = {(i,): v for i, v in enumerate(scrutinees)}

    if not shared:
        _emit_tree(tree, ctx, occ_values, env, rows, None)
        return

    # One join point holds every shared rhs.  With several shared rows the
    # first parameter selects the row, so that all jumps target the same
    # (innermost) join point.
    slots: list[tuple[int, str]] = [(i, b) for i in shared for b in row_binders(rows[i])]
    dispatch = len(shared) > 1
    param_types = ([I64] if dispatch else []) + [OBJ] * len(slots)
    body, scope = _new_region(param_types), _new_region()
    jp = Op("lp.joinpoint", regions=[body, scope])
    ctx.append(jp)
    params = body.entry.params
    slot_values = dict(zip(slots, params[1:] if dispatch else params))

    body_ctx = ctx.in_block(body.entry)
    if dispatch:
        arms = []
        for i in shared:
            arms.append(_new_region())
            arm_env = dict(env)
            arm_env.update({b: slot_values[(i, b)] for b in row_binders(rows[i])})
            _emit_tail(rows[i].rhs, body_ctx.in_block(arms[-1].entry), arm_env)
        sw = Op("lp.switch", [params[0]], attrs={"cases": IntListAttr(tuple(shared[:-1]))}, regions=arms)
        body_ctx.append(sw)
    else:
        (i,) = shared
        arm_env = dict(env)
        arm_env.update({b: slot_values[(i, b)] for b in row_binders(rows[i])})
        _emit_tail(rows[i].rhs, body_ctx, arm_env)

    jump = _JumpInfo(shared, slots, dispatch)
    _emit_tree(tree, ctx.in_block(scope.entry), occ_values, env, rows, jump)


@dataclass
class _JumpInfo:
    shared: list
    slots: list
    dispatch: bool


def _emit_tree(tree, ctx: _Emitter, occ_values: dict, env: dict, rows, jump: _JumpInfo | None):
    if isinstance(tree, Leaf):
        if jump is not None and tree.row in jump.shared:
            args = []
            if jump.dispatch:
                args.append(ctx.int_const(tree.row, I64))
            dummy = None
            for row, b in jump.slots:
                if row == tree.row:
                    args.append(occ_values[tree.bindings[b]])
                else:
                    if dummy is None:
                        dummy = ctx.obj_int(0)
                    args.append(dummy)
            ctx.append(Op("lp.jump", args))
            return
        leaf_env = dict(env)
        leaf_env.update({b: occ_values[o] for b, o in tree.bindings.items()})
        _emit_tail(rows[tree.row].rhs, ctx, leaf_env)
        return

    scrut = occ_values[tree.occ]
    if isinstance(tree, IntTest):
        lit = ctx.obj_int(tree.value)
        eq = ctx.append(Op("call", [scrut, lit], [I8], {"fn": SymbolAttr("nat_dec_eq")})).result
        yes, no = _new_region(), _new_region()
        ctx.append(Op("lp.switch", [eq], attrs={"cases": IntListAttr((1,))}, regions=[yes, no]))
        _emit_tree(tree.yes, ctx.in_block(yes.entry), occ_values, env, rows, jump)
        _emit_tree(tree.no, ctx.in_block(no.entry), occ_values, env, rows, jump)
        return

    label = ctx.append(Op("lp.getlabel", [scrut], [I64])).result
    regions = [_new_region() for _ in range(len(tree.arms) + 1)]
    tags = tuple(tag for tag, _, _ in tree.arms)
    ctx.append(Op("lp.switch", [label], attrs={"cases": IntListAttr(tags)}, regions=regions))
    for (tag, arity, sub), region in zip(tree.arms, regions):
        arm = ctx.in_block(region.entry)
        needed = _used_occs(sub)
        vals = dict(occ_values)
        for i in range(arity):
            occ = tree.occ + (i,)
            if occ in needed:
                vals[occ] = arm.append(Op("lp.project", [scrut], [OBJ], {"index": IntAttr(i)})).result
        _emit_tree(sub, arm, vals, env, rows, jump)
    _emit_tree(tree.default, ctx.in_block(regions[-1].entry), occ_values, env, rows, jump)


def _emit_tail(e, ctx: _Emitter, env: dict):
    if isinstance(e, Match):
        scruts = [_emit_value(s, ctx, env) for s in e.scrutinees]
        compile_match(scruts, e.rows, ctx, env)
        return
    if isinstance(e, Let):
        v = _emit_value(e.rhs, ctx, env)
        _emit_tail(e.body, ctx, {**env, e.name: v})
        return
    ctx.ret(_emit_value(e, ctx, env, tail=True))


def _emit_value(e, ctx: _Emitter, env: dict, tail: bool = False) -> Value:
    low = ctx.lowering
    if isinstance(e, IntLit):
        return ctx.obj_int(e.value, e.big)
    if isinstance(e, Var):
        if e.name in env:
            return env[e.name]
        return low.global_value(e.name, ctx, tail)
    if isinstance(e, Let):
        v = _emit_value(e.rhs, ctx, env)
        return _emit_value(e.body, ctx, {**env, e.name: v}, tail)
    if isinstance(e, Ctor):
        args = [_emit_value(a, ctx, env) for a in e.args]
        return ctx.append(Op("lp.construct", args, [OBJ], {"tag": IntAttr(e.tag)})).result
    if isinstance(e, PApp):
        arity = low.arity(e.fn_name, env)
        if e.fn_name in BUILTINS:
            raise FrontendError(f"cannot partially apply builtin @{e.fn_name}")
        if e.fn_name in env:
            raise FrontendError(f"pap needs a top-level function, '{e.fn_name}' is a local")
        if len(e.args) >= arity:
            raise FrontendError(
                f"saturation misuse: pap of @{e.fn_name} with {len(e.args)} of {arity} arguments"
            )
        args = [_emit_value(a, ctx, env) for a in e.args]
        return ctx.append(Op("lp.pap", args, [OBJ], {"fn": SymbolAttr(e.fn_name)})).result
    if isinstance(e, App):
        args = [_emit_value(a, ctx, env) for a in e.args]
        if e.fn_name in env:
            return ctx.append(Op("lp.papextend", [env[e.fn_name]] + args, [OBJ])).result
        arity = low.arity(e.fn_name, env)
        if len(args) < arity:
            raise FrontendError(
                f"saturation misuse: @{e.fn_name} takes {arity} arguments, got {len(args)}; use pap"
            )
        if e.fn_name in BUILTINS and len(args) != arity:
            raise FrontendError(f"saturation misuse: builtin @{e.fn_name} takes {arity} arguments")
        exact, extra = args[:arity], args[arity:]
        r = ctx.call(e.fn_name, exact, tail=tail and not extra and e.fn_name not in BUILTINS)
        if extra:
            r = ctx.append(Op("lp.papextend", [r] + extra, [OBJ])).result
        return r
    if isinstance(e, Match):
        return ctx.lowering.lift_match(e, ctx, env)
    raise FrontendError(f"not an expression: {e!r}")


class _Lowering:
    def __init__(self, defs):
        self.defs: dict[str, FnDef] = {}
        for d in defs:
            if d.name in self.defs or d.name in BUILTINS:
                raise FrontendError(f"duplicate definition of @{d.name}")
            self.defs[d.name] = d
        self.module = ModuleIR()
        self.helpers: dict[str, int] = {}

    def arity(self, name: str, env: dict) -> int:
        if name in BUILTINS:
            return BUILTINS[name]
        if name in self.defs:
            return len(self.defs[name].params)
        raise FrontendError(f"unresolved symbol '{name}'")

    def global_value(self, name: str, ctx: _Emitter, tail: bool) -> Value:
        if name in BUILTINS:
            raise FrontendError(f"builtin @{name} cannot be used as a value")
        if name not in self.defs:
            raise FrontendError(f"unresolved symbol '{name}'")
        if not self.defs[name].params:
            return ctx.call(name, [], tail=tail)
        slot, init = f"{name}_slot", f"init_{name}"
        if slot not in self.module.globals:
            if init in self.defs:
                raise FrontendError(f"definition @{init} clashes with the closure initializer of @{name}")
            f = FuncIR(init, [], OBJ)
            c = f.body.entry.append(Op("lp.pap", [], [OBJ], {"fn": SymbolAttr(name)}))
            f.body.entry.append(Op("lp.return", [c.result]))
            self.module.globals[slot] = init
            self._pending.append(f)
        return ctx.append(Op("lp.global", [], [OBJ], {"name": SymbolAttr(slot)})).result

    def lift_match(self, e: Match, ctx: _Emitter, env: dict) -> Value:
        """Move a match in non-tail position into a helper function and call it."""
        captured = [n for n in free_vars(e) if n in env]
        k = self.helpers.get(ctx.owner, 0)
        self.helpers[ctx.owner] = k + 1
        name = f"{ctx.owner}_match{k}"
        while name in self.defs or name in self.module.funcs:
            k += 1
            name = f"{ctx.owner}_match{k}"
        f = FuncIR(name, [OBJ] * len(captured), OBJ)
        self.module.funcs[name] = f  # reserve the name before emitting nested helpers
        inner_env = dict(zip(captured, f.params))
        _emit_tail(e, _Emitter(self, ctx.owner, f.body.entry), inner_env)
        return ctx.call(name, [env[n] for n in captured])

    def run(self) -> ModuleIR:
        self._pending: list[FuncIR] = []
        for d in self.defs.values():
            f = FuncIR(d.name, [OBJ] * len(d.params), OBJ)
            self.module.funcs[d.name] = f
            _emit_tail(d.body, _Emitter(self, d.name, f.body.entry), dict(zip(d.params, f.params)))
        for f in self._pending:
            self.module.funcs[f.name] = f
        return self.module


def lower_surface(defs) -> ModuleIR:
    """Lower parsed definitions to a verifier-clean lp module."""
    return _Lowering(list(defs)).run()
