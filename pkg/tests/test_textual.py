import pytest
from hypothesis import given, settings, strategies as st

from conftest import INT_MATCH, LISTS, ops_named, stage
from lz.ir import I64, IntAttr, modules_equal
from lz.textual import ParseFailure, parse_module, print_module


def test_parses_machine_integer():
    m = parse_module("module {\n  func @f() -> i64 {\n    %c = lp.int 42 : i64\n    lp.return %c\n  }\n}\n")
    (op,) = ops_named(m, "lp.int")
    assert op.attrs["value"] == IntAttr(42)
    assert op.result.type == I64


def test_empty_module():
    m = parse_module("module {}")
    assert m.funcs == {}
    assert print_module(m) == "module {\n}\n"


def test_missing_literal_is_reported_with_span():
    text = "module {\n  func @f() -> i64 {\n    %c = lp.int : i64\n    lp.return %c\n  }\n}\n"
    with pytest.raises(ParseFailure) as info:
        parse_module(text)
    (err,) = info.value.errors
    assert err.message == "expected integer literal"
    assert (err.span.line, err.span.column) == (3, 17)
    assert 0 <= err.span.start <= err.span.end <= len(text)


@pytest.mark.parametrize(
    "body, message",
    [
        ("%c = lp.nope : i64", "unknown operation 'lp.nope'"),
        ("%c = lp.int 300 : i8\n lp.return %c", "integer literal 300 does not fit i8"),
        ("%c = lp.int 1 : i64\n %c = lp.int 2 : i64\n lp.return %c", "redefin"),
    ],
)
def test_rejects_bad_ops(body, message):
    with pytest.raises(ParseFailure) as info:
        parse_module("module { func @f() -> i64 { " + body + " } }")
    assert message in str(info.value)


def test_printer_shows_constructor_with_operands():
    text = print_module(parse_module(LISTS))
    lines = [ln for ln in text.splitlines() if "lp.construct" in ln and "tag = 1" in ln]
    assert lines == ["    %2 = lp.construct %0, %1 {tag = 1} : !lp.t"]


def test_printer_names_values_in_order_and_indents_regions():
    text = print_module(parse_module(INT_MATCH))
    assert text.splitlines()[:4] == [
        "module {",
        "  func @main(%0: !lp.t) -> !lp.t {",
        "    %1 = lp.int 42 : !lp.t",
        "    %2 = call %0, %1 {fn = @nat_dec_eq} : i8",
    ]
    assert "    } @default {" in text
    assert "      %4 = lp.int 99999999 : !lp.t" in text


def test_bigint_literals_survive_round_trip():
    text = "module {\n  func @f() -> !lp.t {\n    %b = lp.bigint 1208925819614629174706176 : !lp.t\n    lp.return %b\n  }\n}\n"
    m = parse_module(text)
    assert "lp.bigint 1208925819614629174706176" in print_module(m)


@pytest.mark.parametrize(
    "name",
    ["dead_region_A", "dead_region_B", "dead_region_D", "region_numbering_B", "region_numbering_C"],
)
def test_stage_programs_round_trip(name):
    m = stage(name)
    again = parse_module(print_module(m))
    assert modules_equal(m, again)
    assert print_module(again) == print_module(m)


def test_globals_round_trip():
    text = """
module {
  global @k_slot = @init_k
  func @k(%x: !lp.t, %y: !lp.t) -> !lp.t {
    lp.return %x
  }
  func @init_k() -> !lp.t {
    %c = lp.pap {fn = @k} : !lp.t
    lp.return %c
  }
  func @main() -> !lp.t {
    %g = lp.global {name = @k_slot} : !lp.t
    lp.return %g
  }
}
"""
    m = parse_module(text)
    assert m.globals == {"k_slot": "init_k"}
    assert modules_equal(parse_module(print_module(m)), m)


def test_distinct_modules_print_differently():
    a = parse_module(INT_MATCH)
    b = parse_module(INT_MATCH.replace("lp.int 43", "lp.int 44"))
    assert not modules_equal(a, b)
    assert print_module(a) != print_module(b)


@settings(max_examples=60, deadline=None)
@given(st.text(alphabet="module{}func@%=:()!lp.tint0123456789 \n^,<>", max_size=80))
def test_parse_errors_point_inside_input(text):
    try:
        parse_module(text)
    except ParseFailure as failure:
        assert failure.errors
        for err in failure.errors:
            assert 0 <= err.span.start <= err.span.end <= len(text)
