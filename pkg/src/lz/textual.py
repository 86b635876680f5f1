"""Parser and printer for the `.lz.mlir` textual form.

Grammar sketch::

    module   := 'module' '{' (global | func)* '}'
    global   := 'global' @slot '=' @initfn
    func     := 'func' @name '(' (%v ':' type),* ')' '->' type '{' body '}'
    body     := op*  |  ('^bbN' ('(' params ')')? ':' op*)+
    op       := (%r '=')? NAME operand,* attr-dict? ('@default'? region)* (':' type)?
    region   := '{' '^' '(' params ')' ':' op* '}'

with custom forms for ``lp.int``/``lp.bigint`` (``lp.int 42 : i64``),
``rgn.run %r(%a, ...)`` and the CFG terminators ``br``, ``cond_br``,
``switch_br`` and ``ret``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from lz.ir import (
    OBJ,
    Block,
    FlagAttr,
    FuncIR,
    IntAttr,
    IntListAttr,
    IntType,
    ModuleIR,
    Op,
    Region,
    RgnValType,
    Successor,
    SymbolAttr,
    Value,
)


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    end_line: int
    end_column: int
    start: int
    end: int


@dataclass
class ParseError(Exception):
    message: str
    span: SourceSpan
    expected: list = field(default_factory=list)

    def __str__(self):
        return f"{self.span.line}:{self.span.column}: {self.message}"


class ParseFailure(Exception):
    """Raised by the parsers; carries one or more ParseErrors."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


# ---------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<value>%[A-Za-z0-9_.$]+)
  | (?P<symbol>@[A-Za-z_][A-Za-z0-9_]*)
  | (?P<label>\^[A-Za-z0-9_]*)
  | (?P<bang>![A-Za-z_][A-Za-z0-9_.]*)
  | (?P<int>-?[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<arrow>->)
  | (?P<punct>[{}()\[\],:=<>])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int
    start: int

    @property
    def end(self) -> int:
        return self.start + len(self.text)


def _span_of(text: str, start: int, end: int) -> SourceSpan:
    line = text.count("\n", 0, start) + 1
    col = start - (text.rfind("\n", 0, start) + 1) + 1
    end_line = text.count("\n", 0, end) + 1
    end_col = end - (text.rfind("\n", 0, end) + 1) + 1
    return SourceSpan(line, col, end_line, end_col, start, end)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseFailure([ParseError(f"unexpected character {text[pos]!r}", _span_of(text, pos, pos + 1))])
        kind = m.lastgroup
        tok_text = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, tok_text, line, pos - line_start + 1, pos))
        nl = tok_text.count("\n")
        if nl:
            line += nl
            line_start = pos + tok_text.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1, pos))
    return tokens


# ---------------------------------------------------------------------------
# Parser

CFG_TERMINATORS = ("br", "cond_br", "switch_br", "ret")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.spans: dict[int, SourceSpan] = {}  # id(op) -> span

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, message, expected=(), tok=None):
        tok = tok or self.tok
        end = max(tok.end, tok.start + 1) if tok.kind != "eof" else tok.start
        start = min(tok.start, len(self.text))
        end = min(max(end, start), len(self.text))
        return ParseFailure([ParseError(message, _span_of(self.text, start, end), list(expected))])

    def at(self, kind, text=None) -> bool:
        return self.tok.kind == kind and (text is None or self.tok.text == text)

    def accept(self, kind, text=None) -> Token | None:
        if self.at(kind, text):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, kind, text=None, what=None) -> Token:
        t = self.accept(kind, text)
        if t is None:
            what = what or (repr(text) if text else kind)
            raise self.error(f"expected {what}, found {self.tok.text or 'end of input'!r}", [what])
        return t

    # grammar
    def module(self) -> ModuleIR:
        m = ModuleIR()
        self.expect("ident", "module")
        self.expect("punct", "{")
        while not self.at("punct", "}"):
            if self.accept("ident", "global"):
                slot = self.expect("symbol", what="global symbol").text[1:]
                self.expect("punct", "=")
                init = self.expect("symbol", what="initializer symbol").text[1:]
                m.globals[slot] = init
            elif self.at("ident", "func"):
                f = self.func()
                if f.name in m.funcs:
                    raise self.error(f"redefinition of function @{f.name}")
                m.add(f)
            else:
                raise self.error(f"expected 'func' or 'global', found {self.tok.text!r}", ["func", "global"])
        self.expect("punct", "}")
        self.expect("eof", what="end of input")
        return m

    def type(self):
        t = self.tok
        if self.accept("bang", "!lp.t"):
            return OBJ
        if self.accept("bang", "!rgn.val"):
            self.expect("punct", "<")
            params = []
            if not self.at("punct", ">"):
                params.append(self.type())
                while self.accept("punct", ","):
                    params.append(self.type())
            self.expect("punct", ">")
            try:
                return RgnValType(tuple(params))
            except ValueError as e:
                raise self.error(str(e), tok=t)
        if t.kind == "ident" and re.fullmatch(r"i[0-9]+", t.text):
            width = int(t.text[1:])
            if width not in (1, 8, 32, 64):
                raise self.error(f"unsupported integer width {width}")
            self.i += 1
            return IntType(width)
        raise self.error(f"expected type, found {t.text!r}", ["type"])

    def func(self) -> FuncIR:
        self.expect("ident", "func")
        name = self.expect("symbol", what="function symbol").text[1:]
        self.values: dict[str, Value] = {}
        self.blocks: dict[str, Block] = {}
        self.defined_blocks: set = set()
        self.expect("punct", "(")
        entry = Block()
        self.param_list(entry, closing=")")
        self.expect("arrow", what="'->'")
        result = self.type()
        body = Region()
        body.add_block(entry)
        self.expect("punct", "{")
        if self.at("label"):
            first = True
            while self.at("label"):
                label = self.tok
                self.i += 1
                if first:
                    blk = entry
                    self.blocks[label.text] = entry
                    first = False
                else:
                    blk = self.blocks.get(label.text)
                    if blk is None:
                        blk = self.blocks[label.text] = Block()
                    body.add_block(blk)
                if label.text in self.defined_blocks:
                    raise self.error(f"redefinition of block {label.text}", tok=label)
                self.defined_blocks.add(label.text)
                if self.accept("punct", "("):
                    self.param_list(blk, closing=")")
                self.expect("punct", ":")
                self.ops_until(blk, stop=lambda: self.at("label") or self.at("punct", "}"))
        else:
            self.ops_until(entry, stop=lambda: self.at("punct", "}"))
        self.expect("punct", "}")
        missing = set(self.blocks) - self.defined_blocks
        if missing:
            raise self.error(f"reference to undefined block {sorted(missing)[0]}")
        return FuncIR(name, None, result, body)

    def param_list(self, block: Block, closing: str):
        if self.accept("punct", closing):
            return
        while True:
            tok = self.expect("value", what="parameter name")
            self.expect("punct", ":")
            v = block.add_param(self.type())
            self.define(tok, v)
            if self.accept("punct", closing):
                return
            self.expect("punct", ",", what=f"',' or '{closing}'")

    def define(self, tok: Token, v: Value):
        if tok.text in self.values:
            raise self.error(f"redefinition of value {tok.text}", tok=tok)
        self.values[tok.text] = v

    def use(self) -> Value:
        tok = self.expect("value", what="value")
        v = self.values.get(tok.text)
        if v is None:
            raise self.error(f"use of undefined value {tok.text}", tok=tok)
        return v

    def ops_until(self, block: Block, stop):
        while not stop():
            if self.at("eof"):
                raise self.error("unexpected end of input", ["}"])
            block.append(self.op())

    def region(self) -> Region:
        self.expect("punct", "{")
        blk = Block()
        self.expect("label", "^", what="region header '^('")
        self.expect("punct", "(")
        self.param_list(blk, closing=")")
        self.expect("punct", ":")
        self.ops_until(blk, stop=lambda: self.at("punct", "}"))
        self.expect("punct", "}")
        return Region([blk])

    def successor(self) -> Successor:
        tok = self.expect("label", what="block label")
        if tok.text == "^":
            raise self.error("expected block label", tok=tok)
        blk = self.blocks.get(tok.text)
        if blk is None:
            blk = self.blocks[tok.text] = Block()
        args = []
        if self.accept("punct", "("):
            if not self.accept("punct", ")"):
                args.append(self.use())
                while self.accept("punct", ","):
                    args.append(self.use())
                self.expect("punct", ")")
        return Successor(blk, args)

    def attr_dict(self) -> dict:
        attrs = {}
        self.expect("punct", "{")
        while True:
            name = self.expect("ident", what="attribute name")
            if self.accept("punct", "="):
                if self.at("int"):
                    attrs[name.text] = IntAttr(int(self.tok.text))
                    self.i += 1
                elif self.at("symbol"):
                    attrs[name.text] = SymbolAttr(self.tok.text[1:])
                    self.i += 1
                elif self.accept("punct", "["):
                    vals = []
                    if not self.accept("punct", "]"):
                        vals.append(int(self.expect("int", what="integer").text))
                        while self.accept("punct", ","):
                            vals.append(int(self.expect("int", what="integer").text))
                        self.expect("punct", "]")
                    attrs[name.text] = IntListAttr(tuple(vals))
                else:
                    raise self.error("expected attribute value", ["integer", "symbol", "list"])
            else:
                attrs[name.text] = FlagAttr(name.text)
            if self.accept("punct", "}"):
                return attrs
            self.expect("punct", ",", what="',' or '}'")

    def op(self) -> Op:
        start = self.tok
        result_tok = None
        if self.at("value"):
            result_tok = self.tok
            self.i += 1
            self.expect("punct", "=")
        name_tok = self.expect("ident", what="operation name")
        name = name_tok.text
        from lz.dialects import lookup

        if lookup(name) is None:
            raise self.error(f"unknown operation '{name}'", tok=name_tok)
        operands, attrs, regions, successors = [], {}, [], []
        if name in ("lp.int", "lp.bigint"):
            if not self.at("int"):
                raise self.error("expected integer literal", ["integer"])
            attrs["value"] = IntAttr(int(self.tok.text))
            self.i += 1
        elif name == "rgn.run":
            operands.append(self.use())
            self.expect("punct", "(")
            if not self.accept("punct", ")"):
                operands.append(self.use())
                while self.accept("punct", ","):
                    operands.append(self.use())
                self.expect("punct", ")")
        elif name == "br":
            successors.append(self.successor())
        elif name == "cond_br":
            operands.append(self.use())
            self.expect("punct", ",")
            successors.append(self.successor())
            self.expect("punct", ",")
            successors.append(self.successor())
        elif name == "switch_br":
            operands.append(self.use())
            self.expect("punct", "[")
            cases = []
            if not self.accept("punct", "]"):
                while True:
                    cases.append(int(self.expect("int", what="case value").text))
                    self.expect("punct", ":")
                    successors.append(self.successor())
                    if self.accept("punct", "]"):
                        break
                    self.expect("punct", ",")
            self.expect("punct", ",")
            self.expect("ident", "default")
            self.expect("punct", ":")
            successors.append(self.successor())
            attrs["cases"] = IntListAttr(tuple(cases))
        else:
            if self.at("value"):
                operands.append(self.use())
                while self.accept("punct", ","):
                    operands.append(self.use())
            if self.at("punct", "{") and self.peek().kind != "label":
                attrs = self.attr_dict()
            while self.at("punct", "{") or self.at("symbol", "@default"):
                self.accept("symbol", "@default")
                regions.append(self.region())
        result_types = []
        if self.accept("punct", ":"):
            result_types.append(self.type())
        if result_tok is not None and not result_types:
            raise self.error(f"expected ':' and result type for {name}", [":"])
        if result_tok is None and result_types:
            raise self.error(f"{name} result type given but no result name", tok=start)
        op = Op(name, operands, result_types, attrs, regions, successors)
        if result_tok is not None:
            self.define(result_tok, op.results[0])
        prev = self.toks[self.i - 1]
        self.spans[id(op)] = _span_of(self.text, start.start, prev.end)
        return op


def op_at(func: FuncIR, path: tuple) -> Op | None:
    region = func.body
    op = None
    rest = list(path)
    try:
        while rest:
            block = region.blocks[rest.pop(0)]
            if not rest:
                return op
            op = block.ops[rest.pop(0)]
            if not rest:
                return op
            region = op.regions[rest.pop(0)]
    except IndexError:
        return op
    return op


def parse_module(text: str, verify: bool = True) -> ModuleIR:
    """Parse IR text; raises ParseFailure with located errors on failure."""
    p = _Parser(text)
    m = p.module()
    if verify:
        from lz.verify import verify_module

        diags = verify_module(m)
        if diags:
            errors = []
            whole = _span_of(text, 0, 0)
            for d in diags:
                f = m.funcs.get(d.func)
                op = op_at(f, d.path) if f is not None else None
                span = p.spans.get(id(op), whole) if op is not None else whole
                errors.append(ParseError(d.message, span))
            raise ParseFailure(errors)
    return m


# ---------------------------------------------------------------------------
# Printer


class _Printer:
    def __init__(self):
        self.lines: list[str] = []

    def func(self, f: FuncIR):
        self.names: dict[Value, str] = {}
        self.bnames: dict[Block, str] = {}
        self.counter = 0
        for i, b in enumerate(f.body.blocks):
            self.bnames[b] = f"^bb{i}"
        params = ", ".join(f"{self.name(p)}: {p.type}" for p in f.params)
        self.lines.append(f"  func @{f.name}({params}) -> {f.result_type} {{")
        if len(f.body.blocks) == 1:
            self.ops(f.body.entry, 4)
        else:
            for i, b in enumerate(f.body.blocks):
                label = self.bnames[b]
                if i and b.params:
                    label += "(" + ", ".join(f"{self.name(p)}: {p.type}" for p in b.params) + ")"
                self.lines.append(f"  {label}:")
                self.ops(b, 4)
        self.lines.append("  }")

    def name(self, v: Value) -> str:
        n = self.names.get(v)
        if n is None:
            n = self.names[v] = f"%{self.counter}"
            self.counter += 1
        return n

    def ref(self, v: Value) -> str:
        # Values used before being named come from outside the printed body.
        return self.names.get(v) or self.name(v)

    def succ(self, s: Successor) -> str:
        out = self.bnames.get(s.block, "^bb?")
        if s.args:
            out += "(" + ", ".join(self.ref(v) for v in s.args) + ")"
        return out

    def ops(self, block: Block, indent: int):
        for op in block.ops:
            self.op(op, indent)

    def op(self, op: Op, indent: int):
        pad = " " * indent
        head = ", ".join(self.name(r) for r in op.results)
        text = f"{head} = {op.name}" if head else op.name
        if op.name in ("lp.int", "lp.bigint"):
            text += f" {op.attrs['value'].value}"
        elif op.name == "rgn.run":
            text += f" {self.ref(op.operands[0])}(" + ", ".join(self.ref(v) for v in op.operands[1:]) + ")"
        elif op.name == "br":
            text += " " + self.succ(op.successors[0])
        elif op.name == "cond_br":
            text += f" {self.ref(op.operands[0])}, {self.succ(op.successors[0])}, {self.succ(op.successors[1])}"
        elif op.name == "switch_br":
            cases = op.attrs["cases"].values
            arms = ", ".join(f"{c}: {self.succ(s)}" for c, s in zip(cases, op.successors))
            text += f" {self.ref(op.operands[0])} [{arms}], default: {self.succ(op.successors[-1])}"
        else:
            if op.operands:
                text += " " + ", ".join(self.ref(v) for v in op.operands)
            if op.attrs:
                parts = []
                for k in sorted(op.attrs):
                    a = op.attrs[k]
                    parts.append(k if isinstance(a, FlagAttr) else f"{k} = {a}")
                text += " {" + ", ".join(parts) + "}"
        if op.regions:
            self.lines.append(pad + text + " {")
            for i, r in enumerate(op.regions):
                blk = r.entry
                params = ", ".join(f"{self.name(p)}: {p.type}" for p in blk.params)
                self.lines.append(f"{pad}  ^({params}):")
                self.ops(blk, indent + 2)
                last = i == len(op.regions) - 1
                if last:
                    closer = "}"
                elif op.name == "lp.switch" and i == len(op.regions) - 2:
                    closer = "} @default {"
                else:
                    closer = "} {"
                if last and op.results:
                    closer += " : " + ", ".join(str(r.type) for r in op.results)
                self.lines.append(pad + closer)
            return
        if op.results:
            text += " : " + ", ".join(str(r.type) for r in op.results)
        self.lines.append(pad + text)


def print_module(m: ModuleIR) -> str:
    p = _Printer()
    p.lines.append("module {")
    for slot, init in m.globals.items():
        p.lines.append(f"  global @{slot} = @{init}")
    for f in m.funcs.values():
        p.func(f)
    p.lines.append("}")
    return "\n".join(p.lines) + "\n"


def print_func(f: FuncIR) -> str:
    p = _Printer()
    p.func(f)
    return "\n".join(p.lines) + "\n"
