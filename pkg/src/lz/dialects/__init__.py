"""Op signature registry shared by the lp, rgn and std dialects."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from lz.ir import IntAttr, IntListAttr, IntType, ObjType, RgnValType, SymbolAttr, FlagAttr

# Operand/result constraints are short strings:
#   "obj"  boxed value        "int"  any integer width   "i1"/"i8"/"i64" exact width
#   "rgn"  any region value   "val"  anything but a region value   "any" anything
CONSTRAINTS = ("obj", "int", "i1", "i8", "i32", "i64", "rgn", "val", "any")


def satisfies(ty, constraint: str) -> bool:
    if constraint == "any":
        return True
    if constraint == "obj":
        return isinstance(ty, ObjType)
    if constraint == "int":
        return isinstance(ty, IntType)
    if constraint == "rgn":
        return isinstance(ty, RgnValType)
    if constraint == "val":
        return not isinstance(ty, RgnValType)
    return isinstance(ty, IntType) and constraint == f"i{ty.width}"


ATTR_KINDS = {"int": IntAttr, "sym": SymbolAttr, "ints": IntListAttr, "flag": FlagAttr}


@dataclass(frozen=True)
class OpSignature:
    name: str
    operands: tuple = ()
    variadic: str | None = None  # constraint of the variadic tail, if any
    results: tuple = ()
    attrs: tuple = ()  # (name, kind) pairs that must be present
    optional_attrs: tuple = ()
    regions: int | None = 0  # None: count depends on attributes (see `check`)
    region_params: bool = False  # may regions take parameters?
    is_terminator: bool = False
    successors: bool = False
    # Extra op-specific rule; receives the op and an `error(msg)` callback.
    check: Callable | None = field(default=None, compare=False, repr=False)

    @property
    def min_operands(self) -> int:
        return len(self.operands)


_REGISTRY: dict[str, OpSignature] = {}


def register(sigs):
    for s in sigs:
        _REGISTRY[s.name] = s


def lookup(name: str) -> OpSignature | None:
    if not _REGISTRY:
        _load()
    return _REGISTRY.get(name)


def all_signatures() -> list[OpSignature]:
    if not _REGISTRY:
        _load()
    return list(_REGISTRY.values())


def _load():
    from lz.dialects import lp, rgn, std

    register(lp.lp_op_table())
    register(rgn.rgn_op_table())
    register(std.std_op_table())


# Runtime calls available to `call` without a func definition: name -> (arity, result constraint).
RUNTIME_CALLS = {
    "nat_dec_eq": (2, "i8"),
    "nat_add": (2, "obj"),
    "nat_sub": (2, "obj"),
}
