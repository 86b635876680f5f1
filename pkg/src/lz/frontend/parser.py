"""Parser for the `.lzf` surface language.

    def name p1 p2 := expr
    expr := let x := expr in expr
          | match e1, e2 with | pat, pat => expr | ...
          | pap f a b | big 123 | f a b | atom
    atom := 123 | x | C<tag>(e, ...) | Ctor<tag>(e, ...) | ( expr )
    pat  := 123 | _ | x | C<tag>(pat, ...)

A match extends as far to the right as possible; parenthesize nested matches
that are followed by more rows of an outer one.
"""
from __future__ import annotations

import re

from lz.frontend.ast import (
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
from lz.textual import ParseError, ParseFailure, _span_of

KEYWORDS = {"def", "let", "in", "match", "with", "pap", "big"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<ctor>(?:Ctor|C)[0-9]+(?=\())
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<punct>:=|=>|[|,()])
    """,
    re.VERBOSE,
)


class _Tok:
    __slots__ = ("kind", "text", "start", "end")

    def __init__(self, kind, text, start, end):
        self.kind, self.text, self.start, self.end = kind, text, start, end


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseFailure([ParseError(f"unexpected character {text[pos]!r}", _span_of(text, pos, pos + 1))])
        kind = m.lastgroup
        if kind == "ident" and m.group() in KEYWORDS:
            kind = "kw"
        if kind == "ident" and m.group() == "_":
            kind = "wild"
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), pos, m.end()))
        pos = m.end()
    toks.append(_Tok("eof", "", pos, pos))
    return toks


class _SurfaceParser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, message, tok=None, expected=()):
        tok = tok or self.tok
        raise ParseFailure([ParseError(message, _span_of(self.text, tok.start, tok.end), list(expected))])

    def at(self, text) -> bool:
        return self.tok.text == text and self.tok.kind in ("kw", "punct")

    def expect(self, text) -> _Tok:
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error(f"expected '{text}', found '{found}'", expected=[text])
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        if self.tok.kind != "ident":
            self.error(f"expected identifier, found '{self.tok.text or 'end of input'}'", expected=["identifier"])
        t = self.tok
        self.i += 1
        return t.text

    def span(self, start_tok):
        end = self.toks[self.i - 1].end if self.i > 0 else start_tok.end
        return _span_of(self.text, start_tok.start, max(end, start_tok.end))

    # -- definitions --------------------------------------------------------

    def program(self) -> list[FnDef]:
        defs = []
        while self.tok.kind != "eof":
            defs.append(self.fndef())
        return defs

    def fndef(self) -> FnDef:
        start = self.expect("def")
        name = self.ident()
        params = []
        while self.tok.kind == "ident":
            params.append(self.ident())
        if len(set(params)) != len(params):
            self.error(f"duplicate parameter in '{name}'", start)
        self.expect(":=")
        body = self.expr()
        return FnDef(name, tuple(params), body, self.span(start))

    # -- expressions --------------------------------------------------------

    def expr(self):
        start = self.tok
        if self.at("let"):
            self.i += 1
            name = self.ident()
            self.expect(":=")
            rhs = self.expr()
            self.expect("in")
            body = self.expr()
            return Let(name, rhs, body, self.span(start))
        if self.at("match"):
            return self.match()
        if self.at("pap"):
            self.i += 1
            fn = self.ident()
            args = self.atoms()
            return PApp(fn, tuple(args), self.span(start))
        if self.tok.kind == "ident":
            name = self.ident()
            args = self.atoms()
            if args:
                return App(name, tuple(args), self.span(start))
            return Var(name, self.span(start))
        return self.atom()

    def atoms(self) -> list:
        out = []
        while self.tok.kind in ("int", "ident", "ctor") or self.at("(") or self.at("big"):
            out.append(self.atom())
        return out

    def atom(self):
        start = self.tok
        if self.tok.kind == "int":
            self.i += 1
            return IntLit(int(start.text), False, self.span(start))
        if self.at("big"):
            self.i += 1
            if self.tok.kind != "int":
                self.error("expected integer literal after 'big'", expected=["integer"])
            value = int(self.tok.text)
            self.i += 1
            return IntLit(value, True, self.span(start))
        if self.tok.kind == "ident":
            return Var(self.ident(), self.span(start))
        if self.tok.kind == "ctor":
            tag = int(self.tok.text.lstrip("Ctor"))
            self.i += 1
            self.expect("(")
            args = []
            if not self.at(")"):
                args.append(self.expr())
                while self.at(","):
                    self.i += 1
                    args.append(self.expr())
            self.expect(")")
            return Ctor(tag, tuple(args), self.span(start))
        if self.at("("):
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        self.error(f"expected expression, found '{self.tok.text or 'end of input'}'", expected=["expression"])

    def match(self) -> Match:
        start = self.expect("match")
        scrutinees = [self.expr()]
        while self.at(","):
            self.i += 1
            scrutinees.append(self.expr())
        self.expect("with")
        rows = []
        while self.at("|"):
            row_tok = self.tok
            self.i += 1
            pats = [self.pattern()]
            while self.at(","):
                self.i += 1
                pats.append(self.pattern())
            if len(pats) != len(scrutinees):
                self.error(
                    f"row has {len(pats)} patterns but the match has {len(scrutinees)} scrutinees", row_tok
                )
            self.expect("=>")
            rows.append(MatchRow(tuple(pats), self.expr()))
        if not rows:
            self.error("match needs at least one row", expected=["|"])
        if not rows[-1].irrefutable:
            self.error("match must end in wildcard row", start)
        return Match(tuple(scrutinees), tuple(rows), self.span(start))

    def pattern(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return IntPat(int(t.text))
        if t.kind == "wild":
            self.i += 1
            return WildPat(None)
        if t.kind == "ident":
            self.i += 1
            return WildPat(t.text)
        if t.kind == "ctor":
            self.i += 1
            tag = int(t.text.lstrip("Ctor"))
            self.expect("(")
            subs = []
            if not self.at(")"):
                subs.append(self.pattern())
                while self.at(","):
                    self.i += 1
                    subs.append(self.pattern())
            self.expect(")")
            return CtorPat(tag, tuple(subs))
        self.error(f"expected pattern, found '{t.text or 'end of input'}'", expected=["pattern"])


def parse_surface(text: str) -> list[FnDef]:
    """Parse a surface program into its definitions.

    Raises ParseFailure carrying the ParseErrors found.
    """
    return _SurfaceParser(text).program()
