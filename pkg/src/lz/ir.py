"""In-memory SSA IR with nested regions.

Values are plain objects compared by identity.  Every op, block and region
keeps a pointer to its parent so passes can walk upwards when checking
dominance; the mutation helpers below keep those pointers consistent.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Union


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class ObjType:
    """A boxed heap value (``!lp.t``)."""

    def __str__(self):
        return "!lp.t"


@dataclass(frozen=True)
class IntType:
    width: int

    def __post_init__(self):
        if self.width not in (1, 8, 32, 64):
            raise ValueError(f"unsupported integer width {self.width}")

    def __str__(self):
        return f"i{self.width}"


@dataclass(frozen=True)
class RgnValType:
    params: tuple = ()

    def __post_init__(self):
        if any(isinstance(p, RgnValType) for p in self.params):
            raise ValueError("region value parameters cannot be region values")

    def __str__(self):
        return "!rgn.val<" + ", ".join(str(p) for p in self.params) + ">"


TypeIR = Union[ObjType, IntType, RgnValType]

OBJ = ObjType()
I1 = IntType(1)
I8 = IntType(8)
I32 = IntType(32)
I64 = IntType(64)


def int_fits(value: int, ty: IntType) -> bool:
    """Accept both the signed and the unsigned spelling of a ``width``-bit literal."""
    if ty.width == 1:
        return value in (0, 1)
    return -(1 << (ty.width - 1)) <= value < (1 << ty.width)


# ---------------------------------------------------------------------------
# Attributes


@dataclass(frozen=True)
class IntAttr:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class SymbolAttr:
    name: str  # without the leading '@'

    def __str__(self):
        return "@" + self.name


@dataclass(frozen=True)
class IntListAttr:
    values: tuple

    def __str__(self):
        return "[" + ", ".join(str(v) for v in self.values) + "]"


@dataclass(frozen=True)
class FlagAttr:
    name: str

    def __str__(self):
        return self.name


AttrIR = Union[IntAttr, SymbolAttr, IntListAttr, FlagAttr]


# ---------------------------------------------------------------------------
# Values, ops, blocks, regions

_value_ids = itertools.count()


class Value:
    """An SSA value: either an op result or a block parameter."""

    __slots__ = ("type", "owner", "index", "uid")

    def __init__(self, type: TypeIR, owner, index: int):
        self.type = type
        self.owner = owner
        self.index = index
        self.uid = next(_value_ids)

    @property
    def is_param(self) -> bool:
        return isinstance(self.owner, Block)

    def __repr__(self):
        kind = "param" if self.is_param else "result"
        return f"<Value #{self.uid} {kind} : {self.type}>"


@dataclass
class Successor:
    block: "Block"
    args: list = field(default_factory=list)


class Op:
    def __init__(
        self,
        name: str,
        operands=(),
        result_types=(),
        attrs: dict | None = None,
        regions=(),
        successors=(),
    ):
        self.name = name
        self.operands: list[Value] = list(operands)
        self.results: list[Value] = [Value(t, self, i) for i, t in enumerate(result_types)]
        self.attrs: dict = dict(attrs or {})
        self.regions: list[Region] = []
        self.successors: list[Successor] = list(successors)
        self.parent: Block | None = None
        for r in regions:
            self.add_region(r)

    @property
    def result(self) -> Value:
        (r,) = self.results
        return r

    @property
    def is_terminator(self) -> bool:
        from lz.dialects import lookup

        sig = lookup(self.name)
        return sig is not None and sig.is_terminator

    def add_region(self, region: "Region") -> "Region":
        region.parent = self
        self.regions.append(region)
        return region

    def all_operands(self) -> list[Value]:
        """Operands plus successor arguments."""
        out = list(self.operands)
        for s in self.successors:
            out.extend(s.args)
        return out

    def walk(self) -> Iterator["Op"]:
        """Pre-order walk over this op and everything nested in it."""
        yield self
        for r in self.regions:
            yield from r.walk()

    def parent_op(self) -> "Op | None":
        if self.parent is None or self.parent.parent is None:
            return None
        owner = self.parent.parent.parent
        return owner if isinstance(owner, Op) else None

    def __repr__(self):
        return f"<Op {self.name}>"


class Block:
    def __init__(self, param_types=()):
        self.params: list[Value] = []
        self.ops: list[Op] = []
        self.parent: Region | None = None
        for t in param_types:
            self.add_param(t)

    def add_param(self, ty: TypeIR) -> Value:
        v = Value(ty, self, len(self.params))
        self.params.append(v)
        return v

    def append(self, op: Op) -> Op:
        op.parent = self
        self.ops.append(op)
        return op

    def insert(self, index: int, op: Op) -> Op:
        op.parent = self
        self.ops.insert(index, op)
        return op

    @property
    def terminator(self) -> Op | None:
        return self.ops[-1] if self.ops else None

    def walk(self) -> Iterator[Op]:
        for op in self.ops:
            yield from op.walk()


class Region:
    def __init__(self, blocks=()):
        self.blocks: list[Block] = []
        self.parent = None  # Op or FuncIR
        for b in blocks:
            self.add_block(b)

    def add_block(self, block: Block) -> Block:
        block.parent = self
        self.blocks.append(block)
        return block

    @property
    def entry(self) -> Block:
        return self.blocks[0]

    def walk(self) -> Iterator[Op]:
        for b in self.blocks:
            yield from b.walk()


class FuncIR:
    def __init__(self, name: str, param_types, result_type: TypeIR, body: Region | None = None):
        self.name = name
        self.result_type = result_type
        if body is None:
            body = Region([Block(param_types)])
        self.body = body
        body.parent = self

    @property
    def param_types(self) -> list[TypeIR]:
        return [p.type for p in self.body.entry.params]

    @property
    def params(self) -> list[Value]:
        return self.body.entry.params

    def walk(self) -> Iterator[Op]:
        return self.body.walk()

    def __repr__(self):
        return f"<FuncIR @{self.name}>"


@dataclass
class ModuleIR:
    funcs: dict = field(default_factory=dict)  # name -> FuncIR
    globals: dict = field(default_factory=dict)  # slot name -> initializer func name

    def add(self, func: FuncIR) -> FuncIR:
        self.funcs[func.name] = func
        return func

    def walk(self) -> Iterator[Op]:
        for f in self.funcs.values():
            yield from f.walk()


# ---------------------------------------------------------------------------
# Queries


class IRError(Exception):
    pass


class TypeMismatchError(IRError):
    pass


class DominanceError(IRError):
    pass


class HasUsesError(IRError):
    pass


def enclosing_func(obj) -> FuncIR:
    while not isinstance(obj, FuncIR):
        if obj is None:
            raise IRError("object is detached from any function")
        obj = obj.parent
    return obj


def uses(func: FuncIR) -> dict[Value, list[Op]]:
    """Map each used value to the ops using it (with multiplicity)."""
    out: dict[Value, list[Op]] = {}
    for op in func.walk():
        for v in op.all_operands():
            out.setdefault(v, []).append(op)
    return out


def use_count(func: FuncIR, value: Value) -> int:
    return sum(op.all_operands().count(value) for op in func.walk())


def defining_op(v: Value) -> Op | None:
    return None if v.is_param else v.owner


def _ancestor_in_block(op: Op, block: Block) -> Op | None:
    """The ancestor of ``op`` (possibly ``op`` itself) that sits directly in ``block``."""
    cur = op
    while cur is not None:
        if cur.parent is block:
            return cur
        cur = cur.parent_op()
    return None


def dominates(value: Value, user: Op) -> bool:
    """Does ``value`` dominate ``user``?

    Within a block dominance is positional; values of enclosing regions are
    visible inside nested regions.  Across blocks of a multi-block region the
    classic dominator relation is used.
    """
    if value.is_param:
        def_block = value.owner
        def_index = -1
    else:
        def_block = value.owner.parent
        if def_block is None:
            return False
        def_index = def_block.ops.index(value.owner)
    anc = _ancestor_in_block(user, def_block)
    if anc is not None:
        return def_block.ops.index(anc) > def_index
    # Maybe the user lives in a sibling block of the same region.
    region = def_block.parent
    cur = user
    while cur is not None:
        blk = cur.parent
        if blk is not None and blk.parent is region:
            from lz.verify import block_dominators

            return def_block in block_dominators(region)[blk]
        cur = cur.parent_op()
    return False


# ---------------------------------------------------------------------------
# Mutation helpers


def replace_all_uses(func: FuncIR, old: Value, new: Value, check: bool = True) -> FuncIR:
    """Rewrite every use of ``old`` in ``func`` to ``new`` (in place).

    ``check=False`` skips the dominance test; passes use it when the
    rewrite is dominance-preserving by construction.
    """
    if old is new:
        return func
    if old.type != new.type:
        raise TypeMismatchError(f"cannot replace {old.type} value with {new.type} value")
    users = [op for op in func.walk() if old in op.all_operands()]
    for op in users:
        if check and not dominates(new, op):
            raise DominanceError(f"replacement value does not dominate use in {op.name}")
    for op in users:
        op.operands = [new if v is old else v for v in op.operands]
        for s in op.successors:
            s.args = [new if v is old else v for v in s.args]
    return func


def erase_op(func: FuncIR, op: Op) -> FuncIR:
    """Remove ``op`` from its block; it must have no remaining uses."""
    used = uses(func)
    inner = set()
    for nested in op.walk():
        inner.add(nested)
    for r in op.results:
        if any(u not in inner for u in used.get(r, ())):
            raise HasUsesError(f"cannot erase {op.name}: result still has uses")
    op.parent.ops.remove(op)
    op.parent = None
    return func


# ---------------------------------------------------------------------------
# Cloning and structural comparison


def clone_region(region: Region, vmap: dict, bmap: dict | None = None) -> Region:
    bmap = {} if bmap is None else bmap
    new = Region()
    for b in region.blocks:
        nb = Block([p.type for p in b.params])
        for p, q in zip(b.params, nb.params):
            vmap[p] = q
        bmap[b] = nb
        new.add_block(nb)
    for b in region.blocks:
        nb = bmap[b]
        for op in b.ops:
            nb.append(clone_op(op, vmap, bmap))
    return new


def clone_op(op: Op, vmap: dict, bmap: dict) -> Op:
    new = Op(
        op.name,
        [vmap.get(v, v) for v in op.operands],
        [r.type for r in op.results],
        op.attrs,
    )
    for r, q in zip(op.results, new.results):
        vmap[r] = q
    for reg in op.regions:
        new.add_region(clone_region(reg, vmap, bmap))
    # Successor blocks may come later in the region; resolve them lazily.
    new.successors = [Successor(s.block, list(s.args)) for s in op.successors]
    new._pending_successors = True
    return new


def _fix_successors(region: Region, vmap: dict, bmap: dict):
    for op in region.walk():
        if getattr(op, "_pending_successors", False):
            op.successors = [
                Successor(bmap.get(s.block, s.block), [vmap.get(v, v) for v in s.args])
                for s in op.successors
            ]
            del op._pending_successors


def clone_func(func: FuncIR) -> FuncIR:
    vmap: dict = {}
    bmap: dict = {}
    body = clone_region(func.body, vmap, bmap)
    _fix_successors(body, vmap, bmap)
    return FuncIR(func.name, None, func.result_type, body)


def clone_module(m: ModuleIR) -> ModuleIR:
    return ModuleIR({k: clone_func(f) for k, f in m.funcs.items()}, dict(m.globals))


class _Mismatch(Exception):
    pass


class _AlphaMatcher:
    """Walks two IR trees in lock step, building a value bijection."""

    def __init__(self, externals_identical=False):
        self.fwd: dict = {}
        self.bwd: dict = {}
        self.blocks: dict = {}
        self.externals_identical = externals_identical

    def bind(self, a: Value, b: Value):
        if a.type != b.type:
            raise _Mismatch("value types differ")
        if self.fwd.get(a, b) is not b or self.bwd.get(b, a) is not a:
            raise _Mismatch("inconsistent value mapping")
        self.fwd[a] = b
        self.bwd[b] = a

    def use(self, a: Value, b: Value):
        if a in self.fwd or b in self.bwd:
            if self.fwd.get(a) is not b:
                raise _Mismatch("operands differ")
            return
        if self.externals_identical and a is b:
            return
        raise _Mismatch("operands differ")

    def region(self, ra: Region, rb: Region):
        if len(ra.blocks) != len(rb.blocks):
            raise _Mismatch("block counts differ")
        for ba, bb in zip(ra.blocks, rb.blocks):
            self.blocks[ba] = bb
            if len(ba.params) != len(bb.params):
                raise _Mismatch("block parameter counts differ")
            for pa, pb in zip(ba.params, bb.params):
                self.bind(pa, pb)
        for ba, bb in zip(ra.blocks, rb.blocks):
            if len(ba.ops) != len(bb.ops):
                raise _Mismatch("op counts differ")
            for oa, ob in zip(ba.ops, bb.ops):
                self.op(oa, ob)

    def op(self, a: Op, b: Op):
        if a.name != b.name or a.attrs != b.attrs:
            raise _Mismatch(f"ops differ: {a.name} vs {b.name}")
        if len(a.operands) != len(b.operands) or len(a.results) != len(b.results):
            raise _Mismatch("arity differs")
        if len(a.regions) != len(b.regions) or len(a.successors) != len(b.successors):
            raise _Mismatch("shape differs")
        for va, vb in zip(a.operands, b.operands):
            self.use(va, vb)
        for ra, rb in zip(a.regions, b.regions):
            self.region(ra, rb)
        for ra, rb in zip(a.results, b.results):
            self.bind(ra, rb)
        for sa, sb in zip(a.successors, b.successors):
            # Block order is fixed by the region walk, so targets are known.
            if self.blocks.get(sa.block) is not sb.block:
                raise _Mismatch("successor blocks differ")
            if len(sa.args) != len(sb.args):
                raise _Mismatch("successor arity differs")
            for va, vb in zip(sa.args, sb.args):
                self.use(va, vb)


def _try(fn) -> bool:
    try:
        fn()
    except _Mismatch:
        return False
    return True


def funcs_equal(a: FuncIR, b: FuncIR) -> bool:
    """Structural equality of two functions up to value renaming."""
    if a.name != b.name or a.result_type != b.result_type:
        return False
    return _try(lambda: _AlphaMatcher().region(a.body, b.body))


def modules_equal(a: ModuleIR, b: ModuleIR) -> bool:
    if list(a.funcs) != list(b.funcs) or a.globals != b.globals:
        return False
    return all(funcs_equal(a.funcs[k], b.funcs[k]) for k in a.funcs)


def regions_alpha_equal(a: Region, b: Region) -> bool:
    """Equality of two regions up to renaming of their internal values.

    Parameters match positionally and values defined outside both regions
    must be the very same value.
    """
    return _try(lambda: _AlphaMatcher(externals_identical=True).region(a, b))


def op_count(obj) -> int:
    return sum(1 for _ in obj.walk())
