from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from conftest import ops_named
from lz.dialects.lp import verify_lp
from lz.frontend import (
    Ctor,
    CtorPat,
    FrontendError,
    IntLit,
    IntPat,
    Match,
    MatchRow,
    Var,
    WildPat,
    build_decision_tree,
    compile_surface,
    leaf_counts,
    parse_surface,
)
from lz.frontend.ast import free_vars, show
from lz.frontend.compile import Leaf
from lz.fuzz import generate_match, generate_program
from lz.interp import CtorValue, eval_module
from lz.textual import ParseFailure
from lz.verify import verify_module

SHARED_DEFAULT = "def g x y := match x, y with | 0, 2 => 10 | 0, 3 => 20 | _, _ => 60\n"


def int_consts(m, value):
    return [op for op in ops_named(m, "lp.int") if op.attrs["value"].value == value]


def test_parse_int_match():
    (d,) = parse_surface("def f x := match x with | 42 => 43 | _ => 99999999")
    assert d.name == "f" and d.params == ("x",)
    assert isinstance(d.body, Match)
    assert d.body.rows[0].patterns == (IntPat(42),)
    assert d.body.rows[1].patterns == (WildPat(None),)


def test_parse_nested_constructors():
    (d,) = parse_surface("def one := Ctor1(Ctor0())")
    assert d.body == Ctor(1, (Ctor(0, ()),))
    assert parse_surface("def one := C1(C0())")[0].body == d.body


def test_missing_default_row():
    with pytest.raises(ParseFailure) as info:
        parse_surface("def bad x := match x with | 1 => 2")
    (err,) = info.value.errors
    assert err.message == "match must end in wildcard row"
    assert (err.span.line, err.span.column) == (1, 14)


def test_row_width_must_match_scrutinees():
    with pytest.raises(ParseFailure, match="row has 1 patterns but the match has 2 scrutinees"):
        parse_surface("def f x y := match x, y with | 1 => 2 | _, _ => 3")


def test_parse_nested_patterns_and_big_literals():
    (d,) = parse_surface("def f x := match x with | C2(n, C1(m)) => big 7 | _ => 0")
    assert d.body.rows[0].patterns == (CtorPat(2, (WildPat("n"), CtorPat(1, (WildPat("m"),)))),)
    assert d.body.rows[0].rhs == IntLit(7, True)


def test_shared_default_is_emitted_once():
    m = compile_surface(SHARED_DEFAULT)
    assert len(int_consts(m, 60)) == 1
    (jp,) = ops_named(m, "lp.joinpoint")
    assert int_consts(jp.regions[0], 60)
    assert len(ops_named(m, "lp.jump")) == 2
    assert verify_lp(m) == []


@pytest.mark.parametrize("x, y, expected", [(0, 2, 10), (0, 3, 20), (0, 4, 60), (1, 2, 60), (5, 5, 60)])
def test_shared_default_semantics(x, y, expected):
    assert eval_module(compile_surface(SHARED_DEFAULT), "g", [x, y], mode="unchecked").value == expected


def test_irrefutable_match_emits_no_switch():
    m = compile_surface("def f x := match x with | y => C1(y)")
    assert not ops_named(m, "lp.switch") and not ops_named(m, "lp.joinpoint")
    assert eval_module(m, "f", [4], mode="unchecked").value.fields == (4,)


def test_integer_pattern_goes_through_equality_call():
    m = compile_surface("def f x := match x with | 42 => 43 | _ => 99999999")
    (call,) = ops_named(m, "call")
    assert call.attrs["fn"].name == "nat_dec_eq"
    (sw,) = ops_named(m, "lp.switch")
    assert sw.attrs["cases"].values == (1,)
    assert eval_module(m, "f", [42], mode="unchecked").value == 43


def test_constructor_patterns_use_label_and_projection():
    m = compile_surface("def hd xs := match xs with | C2(h, t) => h | _ => 0")
    assert len(ops_named(m, "lp.getlabel")) == 1
    assert len(ops_named(m, "lp.project")) == 2
    wild = compile_surface("def hd xs := match xs with | C2(h, _) => h | _ => 0")
    assert len(ops_named(wild, "lp.project")) == 1
    assert eval_module(m, "hd", [CtorValue(2, (7, CtorValue(0)))], mode="unchecked").value == 7


def test_partial_application_and_closure_call():
    m = compile_surface("def k x y := nat_add x y\ndef k10 := pap k 10\ndef ap42 f := f 42\ndef main := ap42 k10\n")
    (pap,) = ops_named(m.funcs["k10"], "lp.pap")
    assert pap.attrs["fn"].name == "k"
    assert pap.operands[0].owner.attrs["value"].value == 10
    assert len(ops_named(m.funcs["ap42"], "lp.papextend")) == 1
    assert eval_module(m, "main", mode="unchecked").value == 52


def test_identity_function():
    m = compile_surface("def id x := x")
    body = m.funcs["id"].body.entry.ops
    assert [op.name for op in body] == ["lp.return"]
    assert body[0].operands[0] is m.funcs["id"].params[0]


def test_function_value_reads_global_slot():
    m = compile_surface("def k x y := nat_add x y\ndef ap f := f 1 2\ndef main := ap k\n")
    assert m.globals == {"k_slot": "init_k"}
    assert ops_named(m.funcs["main"], "lp.global")
    assert eval_module(m, "main", mode="unchecked").value == 3


def test_tail_calls_are_marked():
    m = compile_surface("def count n := match n with | 0 => 0 | _ => count (nat_sub n 1)")
    calls = [op for op in ops_named(m, "call") if op.attrs["fn"].name == "count"]
    assert [("musttail" in c.attrs) for c in calls] == [True]
    assert eval_module(m, "count", [50_000], mode="unchecked").peak_frames <= 2


def test_non_tail_match_is_lifted():
    m = compile_surface("def f x := C1(match x with | 0 => 1 | _ => 2)")
    assert "f_match0" in m.funcs
    assert eval_module(m, "f", [0], mode="unchecked").value.fields == (1,)


@pytest.mark.parametrize(
    "src, message",
    [
        ("def f x := g x", "unresolved symbol 'g'"),
        ("def k x y := x\ndef f := k 1", "saturation misuse"),
        ("def f x := pap nat_add x", "cannot partially apply builtin"),
        ("def f x := match x with | C1(a) => a | C1(a, b) => b | _ => 0",
         "constructor arity mismatch"),
        ("def f x := match x with | C1(a) => a | 3 => 1 | _ => 0", "column mixes integer and constructor patterns"),
        ("def f x y := match x, y with | a, a => a | _, _ => 0", "duplicate binder in match row"),
    ],
)
def test_frontend_errors(src, message):
    with pytest.raises(FrontendError, match=message):
        compile_surface(src)


def test_decision_tree_counts_shared_rows():
    rows = [
        MatchRow((IntPat(0), IntPat(2)), IntLit(10)),
        MatchRow((IntPat(0), IntPat(3)), IntLit(20)),
        MatchRow((WildPat(), WildPat()), IntLit(60)),
    ]
    tree = build_decision_tree(rows, 2)
    assert leaf_counts(tree) == {0: 1, 1: 1, 2: 2}
    single = build_decision_tree([MatchRow((WildPat("v"),), Var("v"))], 1)
    assert isinstance(single, Leaf)
    with pytest.raises(FrontendError, match="arity mismatch"):
        build_decision_tree(rows, 3)


def test_show_round_trips_through_parser():
    for seed in range(30):
        p = generate_program(seed)
        assert parse_surface(p.source) == p.defs


def test_free_vars_in_order():
    (d,) = parse_surface("def f a := let x := g a b in match x with | C1(y) => h y z | _ => x")
    assert free_vars(d.body) == ["g", "a", "b", "h", "z"]
    assert show(d.body).startswith("(let x := (g a b) in (match x with")


def _row_constant_counts(m) -> Counter:
    counts: Counter = Counter()
    for op in ops_named(m, "lp.construct"):
        if op.attrs["tag"].value in (1, 2) and op.operands:
            first = op.operands[0].owner
            if getattr(first, "name", None) == "lp.int":
                counts[first.attrs["value"].value] += 1
    return counts


@settings(max_examples=150, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_compiled_matches_never_duplicate_rows(seed):
    g = generate_match(seed)
    m = compile_surface(show(g.fndef))
    assert verify_module(m) == []
    counts = _row_constant_counts(m)
    assert all(n <= 1 for n in counts.values()), counts
