"""Reference-counting interpreter for lp, rgn and flat-CFG programs.

The machine keeps an explicit frame stack, so recursion depth is bounded by
memory rather than by the host interpreter, and ``musttail`` calls can reuse
the caller's frame.

Ownership conventions in strict mode (the same ones the hand-written
refcounting tests follow):

* function parameters are owned by the callee; ``lp.return`` hands the
  returned reference to the caller;
* ``lp.construct``, ``lp.pap``, ``lp.papextend`` and ``call`` to a module
  function consume their operands;
* ``lp.project``, ``lp.getlabel`` and ``lp.global`` return borrowed
  references, and runtime calls (``@nat_*``) borrow their arguments;
* jumps, ``rgn.run`` and branches move references without touching counts.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

from lz.dialects.lp import SMALL_LIMIT, enclosing_joinpoint
from lz.ir import ModuleIR, Region


class RcMode(str, Enum):
    STRICT = "strict"
    UNCHECKED = "unchecked"


class Trap(Exception):
    pass


class CtorValue(NamedTuple):
    tag: int
    fields: tuple = ()

    def __str__(self):
        return f"C{self.tag}(" + ", ".join(str(f) for f in self.fields) + ")"


class ClosureValue(NamedTuple):
    fn: str
    arity: int
    held: tuple = ()

    def __str__(self):
        held = ", ".join(str(h) for h in self.held)
        return f"<closure @{self.fn} {len(self.held)}/{self.arity} [{held}]>"


@dataclass(frozen=True)
class HeapReport:
    live_at_exit: int = 0
    rc_underflows: int = 0
    use_after_free: int = 0


@dataclass(frozen=True)
class ProgramResult:
    value: object  # int | CtorValue | ClosureValue | None on trap
    steps: int
    peak_frames: int
    heap: HeapReport = field(default_factory=HeapReport)
    trap: str | None = None

    def observable(self, strict: bool = False):
        """The part of the result that must not change under transformation."""
        return (self.value, self.trap, self.heap if strict else None)

    def metrics(self) -> str:
        return f"steps={self.steps} frames={self.peak_frames} live={self.heap.live_at_exit}"


class Cell:
    __slots__ = ("kind", "tag", "fields", "big", "fn", "arity", "held", "rc", "freed")

    def __init__(self, kind):
        self.kind = kind
        self.rc = 1
        self.freed = False


class _Frame:
    __slots__ = ("func", "env", "ops", "pc", "dest", "pending")

    def __init__(self, func, env, dest, pending=None):
        self.func = func
        self.env = env
        self.ops = func.body.entry.ops
        self.pc = 0
        self.dest = dest
        self.pending = pending


_MISSING = object()


def _box(n: int):
    """Small integers stay unboxed; anything at or beyond 2**62 is a BigInt cell."""
    return n if -SMALL_LIMIT < n < SMALL_LIMIT else None


class Machine:
    def __init__(self, module: ModuleIR, mode: RcMode | str = RcMode.STRICT, fuel: int = 20_000_000):
        self.m = module
        self.strict = RcMode(mode) is RcMode.STRICT
        self.fuel = fuel
        self.cells: list[Cell] = []
        self.slots: dict = {}
        self.steps = 0
        self.peak = 0
        self.underflows = 0
        self.uaf = 0
        self._jump_targets: dict = {}

    # -- heap -------------------------------------------------------------

    def alloc(self, kind, **attrs) -> Cell:
        c = Cell(kind)
        for k, v in attrs.items():
            setattr(c, k, v)
        self.cells.append(c)
        return c

    def number(self, n: int):
        small = _box(n)
        return small if small is not None else self.alloc("big", big=n)

    def check_live(self, v):
        if isinstance(v, Cell) and v.freed:
            self.uaf += 1
            raise Trap("use after free")
        return v

    def inc(self, v):
        if not self.strict or not isinstance(v, Cell):
            return
        self.check_live(v)
        v.rc += 1

    def dec(self, v):
        if not self.strict or not isinstance(v, Cell):
            return
        if v.freed or v.rc <= 0:
            self.underflows += 1
            raise Trap("rc underflow")
        work = [v]
        while work:
            c = work.pop()
            if c.freed or c.rc <= 0:
                self.underflows += 1
                raise Trap("rc underflow")
            c.rc -= 1
            if c.rc == 0:
                c.freed = True
                children = c.fields if c.kind == "ctor" else c.held if c.kind == "closure" else ()
                work.extend(x for x in children if isinstance(x, Cell))

    def from_host(self, v):
        """Allocate a host value (int or CtorValue tree) on the heap."""
        if isinstance(v, CtorValue):
            return self.alloc("ctor", tag=v.tag, fields=[self.from_host(f) for f in v.fields])
        if isinstance(v, bool) or not isinstance(v, int):
            raise TypeError(f"cannot pass {v!r} to a program")
        return self.number(v)

    def render(self, v):
        if isinstance(v, int):
            return v
        if isinstance(v, Cell):
            self.check_live(v)
            if v.kind == "big":
                return v.big
            if v.kind == "ctor":
                return CtorValue(v.tag, tuple(self.render(f) for f in v.fields))
            return ClosureValue(v.fn, v.arity, tuple(self.render(h) for h in v.held))
        raise Trap("cannot render a region value")

    # -- runtime calls ------------------------------------------------------

    def as_number(self, v, what):
        if isinstance(v, int):
            return v
        if isinstance(v, Cell) and v.kind == "big":
            self.check_live(v)
            return v.big
        raise Trap(f"{what} expects integers")

    def runtime_call(self, name, args):
        if name == "nat_dec_eq":
            a, b = (self.as_number(x, "nat_dec_eq") for x in args)
            return 1 if a == b else 0
        if name == "nat_add":
            a, b = (self.as_number(x, "nat_add") for x in args)
            return self.number(a + b)
        if name == "nat_sub":
            a, b = (self.as_number(x, "nat_sub") for x in args)
            return self.number(max(a - b, 0))
        raise Trap(f"unknown symbol @{name}")

    # -- execution ----------------------------------------------------------

    def jump_target(self, op):
        jp = self._jump_targets.get(id(op))
        if jp is None:
            jp = enclosing_joinpoint(op)
            if jp is None:
                raise Trap("jump without enclosing joinpoint")
            self._jump_targets[id(op)] = jp
        return jp

    def execute(self, fname: str, args: list):
        """Run one function to completion and return its (owned) result."""
        func = self.m.funcs.get(fname)
        if func is None:
            raise Trap(f"unknown symbol @{fname}")
        if len(args) != len(func.params):
            raise Trap(f"@{fname} expects {len(func.params)} arguments")
        box = {}
        stack = [_Frame(func, dict(zip(func.params, args)), box)]
        self.peak = max(self.peak, 1)
        while stack:
            self._step(stack)
        return box["result"]

    def _enter(self, fr, region_or_block, args):
        block = region_or_block.entry if isinstance(region_or_block, Region) else region_or_block
        for p, a in zip(block.params, args):
            fr.env[p] = a
        fr.ops = block.ops
        fr.pc = 0

    def _deliver(self, stack, dest, value, pending=None):
        if pending:
            self._papextend(stack, value, pending, dest)
        elif isinstance(dest, dict):
            dest["result"] = value
        else:
            stack[-1].env[dest] = value

    def _return(self, stack, value):
        fr = stack.pop()
        self._deliver(stack, fr.dest, value, fr.pending)

    def _invoke(self, stack, fname, args, dest, pending=None, tail=False):
        func = self.m.funcs.get(fname)
        if func is None:
            value = self.runtime_call(fname, args)
            if tail:
                self._return(stack, value)
            else:
                self._deliver(stack, dest, value, pending)
            return
        if tail:
            old = stack.pop()
            dest, pending = old.dest, old.pending
        stack.append(_Frame(func, dict(zip(func.params, args)), dest, pending))
        if len(stack) > self.peak:
            self.peak = len(stack)

    def _papextend(self, stack, clo, extra, dest):
        if not isinstance(clo, Cell) or clo.kind != "closure":
            raise Trap("papextend on non-Closure")
        self.check_live(clo)
        held = list(clo.held)
        need = clo.arity - len(held)
        for h in held:
            self.inc(h)
        fn, arity = clo.fn, clo.arity
        self.dec(clo)
        if len(extra) < need:
            new = self.alloc("closure", fn=fn, arity=arity, held=held + list(extra))
            self._deliver(stack, dest, new)
        else:
            self._invoke(stack, fn, held + list(extra[:need]), dest, list(extra[need:]) or None)

    def _step(self, stack):
        fr = stack[-1]
        op = fr.ops[fr.pc]
        fr.pc += 1
        self.steps += 1
        if self.steps > self.fuel:
            raise Trap("out of fuel")
        env = fr.env
        try:
            args = [env[v] for v in op.operands]
        except KeyError:
            raise Trap(f"{op.name} reads an undefined value") from None
        name = op.name

        if name == "lp.int":
            env[op.results[0]] = op.attrs["value"].value
        elif name == "lp.bigint":
            env[op.results[0]] = self.alloc("big", big=op.attrs["value"].value)
        elif name == "lp.construct":
            for a in args:
                self.check_live(a)
            env[op.results[0]] = self.alloc("ctor", tag=op.attrs["tag"].value, fields=args)
        elif name == "lp.getlabel":
            (x,) = args
            if not isinstance(x, Cell) or x.kind != "ctor":
                raise Trap("getlabel on non-Ctor")
            self.check_live(x)
            env[op.results[0]] = x.tag
        elif name == "lp.project":
            (x,) = args
            if not isinstance(x, Cell) or x.kind != "ctor":
                raise Trap("project on non-Ctor")
            self.check_live(x)
            idx = op.attrs["index"].value
            if idx >= len(x.fields):
                raise Trap("project index out of bounds")
            env[op.results[0]] = x.fields[idx]
        elif name == "lp.pap":
            fname = op.attrs["fn"].name
            func = self.m.funcs.get(fname)
            if func is None:
                raise Trap(f"unknown symbol @{fname}")
            env[op.results[0]] = self.alloc("closure", fn=fname, arity=len(func.params), held=args)
        elif name == "lp.papextend":
            self._papextend(stack, args[0], args[1:], op.results[0])
        elif name == "lp.inc":
            self.inc(args[0])
        elif name == "lp.dec":
            self.dec(args[0])
        elif name == "lp.global":
            slot = op.attrs["name"].name
            if slot not in self.slots:
                raise Trap(f"unknown symbol @{slot}")
            env[op.results[0]] = self.slots[slot]
        elif name == "call":
            tail = "musttail" in op.attrs
            self._invoke(stack, op.attrs["fn"].name, args, op.results[0], tail=tail)
        elif name in ("lp.return", "ret"):
            self._return(stack, args[0])
        elif name == "lp.switch":
            cases = op.attrs["cases"].values
            k = args[0]
            idx = cases.index(k) if k in cases else len(cases)
            self._enter(fr, op.regions[idx], ())
        elif name == "lp.joinpoint":
            self._enter(fr, op.regions[1], ())
        elif name == "lp.jump":
            self._enter(fr, self.jump_target(op).regions[0], args)
        elif name == "rgn.val":
            env[op.results[0]] = op.regions[0]
        elif name == "rgn.run":
            target = args[0]
            if not isinstance(target, Region):
                raise Trap("rgn.run of a non-region value")
            self._enter(fr, target, args[1:])
        elif name == "select":
            env[op.results[0]] = args[1] if args[0] else args[2]
        elif name == "switch":
            cases = op.attrs["cases"].values
            k = args[0]
            env[op.results[0]] = args[1 + cases.index(k)] if k in cases else args[-1]
        elif name == "arith.cmpeq":
            env[op.results[0]] = 1 if args[0] == args[1] else 0
        elif name == "br":
            s = op.successors[0]
            self._enter(fr, s.block, [env[v] for v in s.args])
        elif name == "cond_br":
            s = op.successors[0] if args[0] else op.successors[1]
            self._enter(fr, s.block, [env[v] for v in s.args])
        elif name == "switch_br":
            cases = op.attrs["cases"].values
            k = args[0]
            s = op.successors[cases.index(k)] if k in cases else op.successors[-1]
            self._enter(fr, s.block, [env[v] for v in s.args])
        else:
            raise Trap(f"cannot execute {name}")

    def run(self, entry: str, args) -> ProgramResult:
        value = None
        trap = None
        try:
            for slot, init in self.m.globals.items():
                self.slots[slot] = self.execute(init, [])
            heap_args = [self.from_host(a) for a in args]
            result = self.execute(entry, heap_args)
            value = self.render(result)
            self.dec(result)
            for v in self.slots.values():
                self.dec(v)
        except Trap as t:
            trap = str(t)
        except RecursionError:
            trap = "host recursion limit"
        live = sum(1 for c in self.cells if not c.freed)
        report = HeapReport(live, self.underflows, self.uaf)
        return ProgramResult(value, self.steps, self.peak, report, trap)


def eval_module(m: ModuleIR, entry: str, args=(), mode: RcMode | str = RcMode.STRICT, fuel=20_000_000) -> ProgramResult:
    """Run ``entry`` with host arguments (ints or CtorValue trees)."""
    return Machine(m, mode, fuel).run(entry, list(args))


def nat_dec_eq(a, b) -> int:
    """Equality of two runtime integers, small or big; traps on other objects."""
    mach = Machine(ModuleIR(), RcMode.UNCHECKED)
    return mach.runtime_call("nat_dec_eq", [mach.from_host(a), mach.from_host(b)])


def apply_papextend(module: ModuleIR, closure: ClosureValue, extra, mode=RcMode.UNCHECKED) -> ProgramResult:
    """Apply a host-level closure description to extra arguments."""
    mach = Machine(module, mode)
    clo = mach.alloc(
        "closure", fn=closure.fn, arity=closure.arity, held=[mach.from_host(h) for h in closure.held]
    )
    box = {}
    stack: list = []
    value = trap = None
    try:
        mach._papextend(stack, clo, [mach.from_host(x) for x in extra], box)
        while stack:
            mach._step(stack)
        value = mach.render(box["result"])
    except Trap as t:
        trap = str(t)
    return ProgramResult(value, mach.steps, mach.peak, HeapReport(), trap)
