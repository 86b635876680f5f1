"""Surface syntax tree for `.lzf` programs."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from lz.textual import SourceSpan


@dataclass(frozen=True)
class IntLit:
    value: int
    big: bool = False
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Let:
    name: str
    rhs: "Expr"
    body: "Expr"
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Ctor:
    tag: int
    args: tuple = ()
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class App:
    """Application of a named function or of a closure held in a local."""

    fn_name: str
    args: tuple
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class PApp:
    fn_name: str
    args: tuple
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class IntPat:
    value: int


@dataclass(frozen=True)
class CtorPat:
    tag: int
    args: tuple = ()  # sub-patterns


@dataclass(frozen=True)
class WildPat:
    binder: str | None = None


Pattern = Union[IntPat, CtorPat, WildPat]


@dataclass(frozen=True)
class MatchRow:
    patterns: tuple
    rhs: "Expr"

    @property
    def irrefutable(self) -> bool:
        return all(isinstance(p, WildPat) for p in self.patterns)


@dataclass(frozen=True)
class Match:
    scrutinees: tuple
    rows: tuple
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class FnDef:
    name: str
    params: tuple
    body: "Expr"
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


Expr = Union[IntLit, Var, Let, Ctor, App, PApp, Match]

BUILTINS = {"nat_add": 2, "nat_sub": 2}


def pattern_binders(p: Pattern) -> list[str]:
    if isinstance(p, WildPat):
        return [p.binder] if p.binder else []
    if isinstance(p, CtorPat):
        return [b for sub in p.args for b in pattern_binders(sub)]
    return []


def row_binders(row: MatchRow) -> list[str]:
    return [b for p in row.patterns for b in pattern_binders(p)]


def free_vars(e: Expr) -> list[str]:
    """Free variable names of ``e`` in order of first occurrence."""
    out: list[str] = []

    def add(n):
        if n not in out:
            out.append(n)

    def go(e, bound: frozenset):
        if isinstance(e, Var):
            if e.name not in bound:
                add(e.name)
        elif isinstance(e, Let):
            go(e.rhs, bound)
            go(e.body, bound | {e.name})
        elif isinstance(e, Ctor):
            for a in e.args:
                go(a, bound)
        elif isinstance(e, (App, PApp)):
            if e.fn_name not in bound:
                add(e.fn_name)
            for a in e.args:
                go(a, bound)
        elif isinstance(e, Match):
            for s in e.scrutinees:
                go(s, bound)
            for row in e.rows:
                go(row.rhs, bound | set(row_binders(row)))

    go(e, frozenset())
    return out


def show_pattern(p: Pattern) -> str:
    if isinstance(p, IntPat):
        return str(p.value)
    if isinstance(p, WildPat):
        return p.binder or "_"
    return f"C{p.tag}(" + ", ".join(show_pattern(a) for a in p.args) + ")"


def show(e) -> str:
    """Render an expression or definition back to surface syntax."""
    if isinstance(e, FnDef):
        head = " ".join(("def", e.name) + tuple(e.params))
        return f"{head} := {show(e.body)}"
    if isinstance(e, IntLit):
        return f"big {e.value}" if e.big else str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Let):
        return f"(let {e.name} := {show(e.rhs)} in {show(e.body)})"
    if isinstance(e, Ctor):
        return f"C{e.tag}(" + ", ".join(show(a) for a in e.args) + ")"
    if isinstance(e, App):
        return "(" + " ".join([e.fn_name] + [_atom(a) for a in e.args]) + ")"
    if isinstance(e, PApp):
        return "(" + " ".join(["pap", e.fn_name] + [_atom(a) for a in e.args]) + ")"
    if isinstance(e, Match):
        rows = " ".join(
            "| " + ", ".join(show_pattern(p) for p in r.patterns) + " => " + show(r.rhs) for r in e.rows
        )
        return "(match " + ", ".join(show(s) for s in e.scrutinees) + " with " + rows + ")"
    raise TypeError(f"not a surface node: {e!r}")


def _atom(e) -> str:
    s = show(e)
    if isinstance(e, IntLit) and e.big:
        return f"({s})"
    return s
