"""Random program generators and an independent surface-level evaluator.

The evaluator interprets surface syntax directly (first matching row wins), so
it shares no code with the match compiler or the IR interpreter and can serve
as a differential oracle for both.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

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
)
from lz.interp import ClosureValue, CtorValue
from lz.ir import I1, I64, OBJ, Block, IntAttr, IntListAttr, Op, Region, SymbolAttr, Value

# Data type used by generated programs: tag -> field types.
DATA_FIELDS = {0: (), 1: ("nat",), 2: ("nat", "T"), 3: ("T",)}
NAT, DATA = ("nat",), ("T",)


def fn_type(k: int) -> tuple:
    return ("fn", k)


# ---------------------------------------------------------------------------
# Oracle


class OracleError(Exception):
    pass


class SurfaceEvaluator:
    """Direct evaluator for surface definitions."""

    def __init__(self, defs, fuel: int = 1_000_000):
        self.defs = {d.name: d for d in defs}
        self.fuel = fuel

    def run(self, entry: str, args=()):
        return self.call(entry, list(args))

    def tick(self):
        self.fuel -= 1
        if self.fuel < 0:
            raise OracleError("out of fuel")

    def call(self, name: str, args: list):
        self.tick()
        if name == "nat_add":
            a, b = self.nats(args)
            return a + b
        if name == "nat_sub":
            a, b = self.nats(args)
            return max(0, a - b)
        d = self.defs[name]
        if len(args) != len(d.params):
            raise OracleError(f"@{name} called with {len(args)} arguments")
        return self.eval(d.body, dict(zip(d.params, args)))

    @staticmethod
    def nats(args):
        if not all(isinstance(a, int) for a in args):
            raise OracleError("arithmetic on a non-integer")
        return args

    def apply(self, clo, args: list):
        if not isinstance(clo, ClosureValue):
            raise OracleError("application of a non-closure")
        held = list(clo.held) + args
        if len(held) < clo.arity:
            return ClosureValue(clo.fn, clo.arity, tuple(held))
        r = self.call(clo.fn, held[: clo.arity])
        rest = held[clo.arity:]
        return self.apply(r, rest) if rest else r

    def arity(self, name):
        return BUILTINS[name] if name in BUILTINS else len(self.defs[name].params)

    def eval(self, e, env: dict):
        self.tick()
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, Var):
            if e.name in env:
                return env[e.name]
            d = self.defs[e.name]
            if not d.params:
                return self.call(e.name, [])
            return ClosureValue(e.name, len(d.params), ())
        if isinstance(e, Let):
            return self.eval(e.body, {**env, e.name: self.eval(e.rhs, env)})
        if isinstance(e, Ctor):
            return CtorValue(e.tag, tuple(self.eval(a, env) for a in e.args))
        if isinstance(e, PApp):
            return ClosureValue(e.fn_name, self.arity(e.fn_name), tuple(self.eval(a, env) for a in e.args))
        if isinstance(e, App):
            args = [self.eval(a, env) for a in e.args]
            if e.fn_name in env:
                return self.apply(env[e.fn_name], args)
            n = self.arity(e.fn_name)
            r = self.call(e.fn_name, args[:n])
            return self.apply(r, args[n:]) if len(args) > n else r
        if isinstance(e, Match):
            vals = [self.eval(s, env) for s in e.scrutinees]
            for row in e.rows:
                binds: dict = {}
                if all(match_pattern(p, v, binds) for p, v in zip(row.patterns, vals)):
                    return self.eval(row.rhs, {**env, **binds})
            raise OracleError("no row matched")
        raise OracleError(f"cannot evaluate {e!r}")


def match_pattern(p, v, binds: dict) -> bool:
    if isinstance(p, WildPat):
        if p.binder:
            binds[p.binder] = v
        return True
    if isinstance(p, IntPat):
        if not isinstance(v, int):
            raise OracleError("integer pattern on a non-integer")
        return v == p.value
    if not isinstance(v, CtorValue):
        raise OracleError("constructor pattern on a non-constructor")
    if v.tag != p.tag:
        return False
    if len(v.fields) != len(p.args):
        raise OracleError("constructor arity mismatch")
    return all(match_pattern(sp, f, binds) for sp, f in zip(p.args, v.fields))


def oracle_eval(defs, entry: str, args=()):
    return SurfaceEvaluator(defs).run(entry, args)


# ---------------------------------------------------------------------------
# Program generator


@dataclass
class GenConfig:
    max_defs: int = 4
    max_depth: int = 3
    max_int: int = 9
    max_cols: int = 3
    max_rows: int = 4
    max_closure_arity: int = 3
    big_prob: float = 0.03


@dataclass
class GeneratedProgram:
    defs: list
    entry: str
    args: list
    result_type: tuple

    @property
    def source(self) -> str:
        from lz.frontend.ast import show

        return "\n".join(show(d) for d in self.defs) + "\n"


class ProgramGenerator:
    """Well-typed, terminating surface programs over naturals, a four-tag data type and closures.

    Definitions only call earlier definitions, so every program terminates.
    """

    def __init__(self, rng: random.Random, cfg: GenConfig | None = None):
        self.rng = rng
        self.cfg = cfg or GenConfig()
        self.sigs: dict[str, tuple] = {}  # name -> (param types, result type)
        self.counter = itertools.count()

    def fresh(self, prefix="v") -> str:
        return f"{prefix}{next(self.counter)}"

    # -- types --------------------------------------------------------------

    def closure_sources(self, k: int) -> list[str]:
        """Definitions that can produce a closure of k naturals to a natural."""
        return [
            n for n, (ps, r) in self.sigs.items()
            if r == NAT and ps and all(p == NAT for p in ps) and len(ps) >= k
        ]

    def random_type(self, allow_fn=True):
        choices = [NAT, NAT, DATA]
        if allow_fn:
            for k in range(1, self.cfg.max_closure_arity + 1):
                if self.closure_sources(k):
                    choices.append(fn_type(k))
        return self.rng.choice(choices)

    # -- expressions --------------------------------------------------------

    def gen(self, ty, env: list, depth: int):
        rng = self.rng
        vars_ = [n for n, t in env if t == ty]
        if ty[0] == "fn":
            return self.gen_fn(ty[1], vars_, env, depth)
        if depth <= 0:
            if vars_ and rng.random() < 0.6:
                return Var(rng.choice(vars_))
            return self.leaf(ty)
        callables = [n for n, (ps, r) in self.sigs.items() if r == ty]
        closures = [(n, t[1]) for n, t in env if t[0] == "fn"] if ty == NAT else []
        options = ["leaf", "var", "match", "let"]
        if callables:
            options += ["call", "call"]
        if closures:
            options += ["apply", "apply"]
        if ty == NAT:
            options += ["arith"]
        else:
            options += ["ctor", "ctor"]
        kind = rng.choice(options)
        if kind == "var" and vars_:
            return Var(rng.choice(vars_))
        if kind == "match":
            return self.gen_match(ty, env, depth)
        if kind == "let":
            name = self.fresh()
            t = self.random_type()
            rhs = self.gen(t, env, depth - 1)
            return Let(name, rhs, self.gen(ty, env + [(name, t)], depth - 1))
        if kind == "call":
            f = rng.choice(callables)
            ps, _ = self.sigs[f]
            if not ps:
                return Var(f)
            return App(f, tuple(self.gen(p, env, depth - 1) for p in ps))
        if kind == "apply":
            f, k = rng.choice(closures)
            return App(f, tuple(self.gen(NAT, env, depth - 1) for _ in range(k)))
        if kind == "arith":
            op = rng.choice(["nat_add", "nat_sub"])
            return App(op, (self.gen(NAT, env, depth - 1), self.gen(NAT, env, depth - 1)))
        if kind == "ctor":
            tag = rng.randrange(4)
            fields = [NAT if t == "nat" else DATA for t in DATA_FIELDS[tag]]
            return Ctor(tag, tuple(self.gen(t, env, depth - 1) for t in fields))
        return self.leaf(ty)

    def leaf(self, ty):
        if ty == NAT:
            if self.rng.random() < self.cfg.big_prob:
                return IntLit(self.rng.randrange(self.cfg.max_int + 1), big=True)
            return IntLit(self.rng.randrange(self.cfg.max_int + 1))
        return Ctor(0, ())

    def gen_fn(self, k: int, vars_, env, depth):
        rng = self.rng
        if vars_ and rng.random() < 0.4:
            return Var(rng.choice(vars_))
        f = rng.choice(self.closure_sources(k))
        n = len(self.sigs[f][0])
        if n == k:
            return Var(f)
        return PApp(f, tuple(self.gen(NAT, env, depth - 1) for _ in range(n - k)))

    # -- matches ------------------------------------------------------------

    def gen_pattern(self, ty, depth: int, binders: list, wild_prob=0.35):
        rng = self.rng
        if rng.random() < wild_prob:
            if rng.random() < 0.5:
                name = self.fresh("b")
                binders.append((name, ty))
                return WildPat(name)
            return WildPat(None)
        if ty == NAT:
            return IntPat(rng.randrange(self.cfg.max_int + 1))
        tag = rng.randrange(4)
        subs = []
        for ft in DATA_FIELDS[tag]:
            fty = NAT if ft == "nat" else DATA
            if depth <= 0:
                subs.append(self.gen_pattern(fty, 0, binders, wild_prob=1.0))
            else:
                subs.append(self.gen_pattern(fty, depth - 1, binders, wild_prob=0.5))
        return CtorPat(tag, tuple(subs))

    def gen_rows(self, col_types, result_ty, env, depth, pat_depth=2):
        rows = []
        for _ in range(self.rng.randint(1, self.cfg.max_rows)):
            binders: list = []
            pats = tuple(self.gen_pattern(t, pat_depth, binders) for t in col_types)
            rows.append(MatchRow(pats, self.gen(result_ty, env + binders, depth - 1)))
        binders = []
        pats = tuple(self.gen_pattern(t, 0, binders, wild_prob=1.0) for t in col_types)
        rows.append(MatchRow(pats, self.gen(result_ty, env + binders, depth - 1)))
        return tuple(rows)

    def gen_match(self, ty, env, depth):
        ncols = self.rng.randint(1, self.cfg.max_cols)
        col_types = [self.rng.choice([NAT, DATA]) for _ in range(ncols)]
        scruts = []
        for t in col_types:
            vars_ = [n for n, vt in env if vt == t]
            if vars_ and self.rng.random() < 0.7:
                scruts.append(Var(self.rng.choice(vars_)))
            else:
                scruts.append(self.gen(t, env, depth - 1))
        return Match(tuple(scruts), self.gen_rows(col_types, ty, env, depth))

    # -- programs -----------------------------------------------------------

    def gen_def(self, name: str, params_types=None, result=None) -> FnDef:
        if params_types is None:
            params_types = [self.random_type() for _ in range(self.rng.randint(0, 3))]
        if result is None:
            result = self.rng.choice([NAT, NAT, DATA])
        params = [self.fresh("p") for _ in params_types]
        body = self.gen(result, list(zip(params, params_types)), self.cfg.max_depth)
        self.sigs[name] = (tuple(params_types), result)
        return FnDef(name, tuple(params), body)

    def program(self) -> GeneratedProgram:
        defs = [self.gen_def(f"f{i}") for i in range(self.rng.randint(1, self.cfg.max_defs))]
        n_args = self.rng.randint(0, 2)
        result = self.rng.choice([NAT, DATA])
        defs.append(self.gen_def("main", [NAT] * n_args, result))
        args = [self.rng.randrange(self.cfg.max_int + 1) for _ in range(n_args)]
        return GeneratedProgram(defs, "main", args, result)


def generate_program(seed: int, cfg: GenConfig | None = None) -> GeneratedProgram:
    return ProgramGenerator(random.Random(seed), cfg).program()


# ---------------------------------------------------------------------------
# Standalone matches with exhaustive domains


@dataclass
class GeneratedMatch:
    fndef: FnDef
    col_types: list

    def domain(self, max_int: int = 4, budget: int = 2000):
        """Every combination of scrutinee values from a small domain.

        Data values go as deep as the budget allows (depth 2 when possible).
        """
        nats = list(range(max_int + 1))
        n_data = sum(1 for t in self.col_types if t == DATA)
        for depth in (2, 1, 0):
            datas = data_values(depth, nats)
            size = len(nats) ** (len(self.col_types) - n_data) * len(datas) ** n_data
            if size <= budget or depth == 0:
                break
        cols = [nats if t == NAT else datas for t in self.col_types]
        return itertools.product(*cols)


def data_values(depth: int, nats) -> list:
    """All values of the four-tag data type with nesting at most ``depth``."""
    if depth < 0:
        return []
    inner = data_values(depth - 1, nats)
    out = [CtorValue(0, ())]
    out += [CtorValue(1, (n,)) for n in nats]
    out += [CtorValue(2, (n, t)) for n in nats for t in inner]
    out += [CtorValue(3, (t,)) for t in inner]
    return out


def generate_match(seed: int, max_int: int = 4, max_cols: int = 3) -> GeneratedMatch:
    """A function `m` whose body is one match over its parameters.

    Right-hand sides are small expressions over the bound variables, so a
    wrong binding or a wrong row is visible in the result.
    """
    rng = random.Random(seed)
    gen = ProgramGenerator(rng, GenConfig(max_int=max_int, max_cols=max_cols, max_depth=1))
    ncols = rng.randint(1, max_cols)
    col_types = [rng.choice([NAT, DATA]) for _ in range(ncols)]
    params = [f"s{i}" for i in range(ncols)]
    env = list(zip(params, col_types))
    rows = []
    for i in range(rng.randint(1, 5)):
        binders: list = []
        pats = tuple(gen.gen_pattern(t, 2, binders, wild_prob=0.3) for t in col_types)
        rows.append(MatchRow(pats, _tagged_rhs(rng, i, env + binders)))
    binders = []
    pats = tuple(gen.gen_pattern(t, 0, binders, wild_prob=1.0) for t in col_types)
    rows.append(MatchRow(pats, _tagged_rhs(rng, len(rows), env + binders)))
    return GeneratedMatch(FnDef("m", tuple(params), Match(tuple(Var(p) for p in params), tuple(rows))), col_types)


def _tagged_rhs(rng, row: int, env):
    """`C1(row)` or `C2(row, v)` for a random variable v in scope."""
    nat_vars = [n for n, t in env if t == NAT]
    data_vars = [n for n, t in env if t == DATA]
    pick = rng.random()
    if nat_vars and pick < 0.4:
        return Ctor(2, (IntLit(row), Ctor(1, (Var(rng.choice(nat_vars)),))))
    if data_vars and pick < 0.8:
        return Ctor(2, (IntLit(row), Var(rng.choice(data_vars))))
    return Ctor(1, (IntLit(row),))


# ---------------------------------------------------------------------------
# Straight-line regions for value-numbering checks


def random_region(rng: random.Random, externals: list[Value], n_params: int = 2, n_ops: int = 6) -> Region:
    """A single-block region of pure ops ending in lp.return.

    Operands come from the region's own parameters, earlier results and
    ``externals`` (values defined outside the region).
    """
    block = Block([OBJ] * n_params)
    region = Region([block])
    objs = list(block.params) + [v for v in externals if v.type == OBJ]
    ints = [v for v in externals if v.type == I64]
    for _ in range(n_ops):
        kind = rng.choice(["int", "add", "ctor", "proj", "label", "cmp"])
        if kind == "int" or not objs:
            op = Op("lp.int", result_types=[OBJ], attrs={"value": IntAttr(rng.randrange(4))})
        elif kind == "add":
            fn = SymbolAttr(rng.choice(["nat_add", "nat_sub"]))
            op = Op("call", [rng.choice(objs), rng.choice(objs)], [OBJ], {"fn": fn})
        elif kind == "ctor":
            k = rng.randrange(3)
            op = Op("lp.construct", [rng.choice(objs) for _ in range(k)], [OBJ], {"tag": IntAttr(rng.randrange(4))})
        elif kind == "proj":
            op = Op("lp.project", [rng.choice(objs)], [OBJ], {"index": IntAttr(rng.randrange(2))})
        elif kind == "label":
            op = Op("lp.getlabel", [rng.choice(objs)], [I64])
        else:
            if len(ints) < 1:
                op = Op("lp.getlabel", [rng.choice(objs)], [I64])
            else:
                op = Op("arith.cmpeq", [rng.choice(ints), rng.choice(ints)], [I1])
        block.append(op)
        for r in op.results:
            if r.type == OBJ:
                objs.append(r)
            elif r.type == I64:
                ints.append(r)
    block.append(Op("lp.return", [rng.choice(objs) if objs else block.params[0]]))
    return region


def mutate_region(rng: random.Random, region: Region, externals: list[Value]) -> Region:
    """A copy of ``region`` with one small structural change."""
    from lz.ir import clone_region

    vmap = {v: v for v in externals}
    copy = clone_region(region, vmap)
    ops = copy.entry.ops
    i = rng.randrange(len(ops))
    op = ops[i]
    if "value" in op.attrs:
        op.attrs["value"] = IntAttr(op.attrs["value"].value + 1)
    elif "tag" in op.attrs:
        op.attrs["tag"] = IntAttr(op.attrs["tag"].value + 1)
    elif "index" in op.attrs:
        op.attrs["index"] = IntAttr(op.attrs["index"].value + 1)
    elif op.name == "call":
        other = "nat_sub" if op.attrs["fn"].name == "nat_add" else "nat_add"
        op.attrs["fn"] = SymbolAttr(other)
    else:
        # Insert an extra constant before the op.
        copy.entry.insert(i, Op("lp.int", result_types=[OBJ], attrs={"value": IntAttr(7)}))
    return copy


def region_choice_module(rng: random.Random, n_regions: int = 6):
    """A module whose ``main(sel, a, b)`` runs one of several sibling regions.

    Regions are a mix of fresh random ones, exact copies and one-op mutations
    of earlier ones, so region CSE has both real and near-miss merge
    candidates. Running every ``sel`` before and after a pass exposes any
    wrong merge.
    """
    from lz.ir import FuncIR, ModuleIR, RgnValType, clone_region

    func = FuncIR("main", [I64, OBJ, OBJ], OBJ)
    entry = func.body.entry
    sel, a, b = entry.params
    externals = [a, b, sel]
    regions: list[Region] = []
    for _ in range(n_regions):
        roll = rng.random()
        if regions and roll < 0.35:
            regions.append(clone_region(rng.choice(regions), {v: v for v in externals}))
        elif regions and roll < 0.7:
            regions.append(mutate_region(rng, rng.choice(regions), externals))
        else:
            regions.append(random_region(rng, externals, n_ops=rng.randint(1, 6)))
    rty = RgnValType((OBJ, OBJ))
    vals = []
    for r in regions:
        op = Op("rgn.val", result_types=[rty], regions=[r])
        entry.append(op)
        vals.append(op.result)
    pick = Op("switch", [sel] + vals, [rty], {"cases": IntListAttr(tuple(range(n_regions - 1)))})
    entry.append(pick)
    entry.append(Op("rgn.run", [pick.result, a, b]))
    return ModuleIR({"main": func})
