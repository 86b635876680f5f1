from pathlib import Path

import pytest

from lz.textual import parse_module

TESTS = Path(__file__).parent
STAGES = TESTS / "data" / "stages"


def stage(name: str):
    """Parse one of the checked-in worked-example programs."""
    return parse_module((STAGES / f"{name}.lz.mlir").read_text())


def ops_named(obj, name: str) -> list:
    return [op for op in obj.walk() if op.name == name]


# Matching an argument against 42: equal -> 43, otherwise 99999999.
INT_MATCH = """
module {
  func @main(%arg: !lp.t) -> !lp.t {
    %c42 = lp.int 42 : !lp.t
    %eq = call %arg, %c42 {fn = @nat_dec_eq} : i8
    lp.switch %eq {cases = [1]} {
      ^():
      %r = lp.int 43 : !lp.t
      lp.return %r
    } @default {
      ^():
      %d = lp.int 99999999 : !lp.t
      lp.return %d
    }
  }
}
"""

# Singleton list and its length, with explicit reference counting.
LISTS = """
module {
  func @singleton(%x: !lp.t) -> !lp.t {
    %nil = lp.construct {tag = 0} : !lp.t
    %c = lp.construct %x, %nil {tag = 1} : !lp.t
    lp.return %c
  }
  func @length(%xs: !lp.t) -> !lp.t {
    %tag = lp.getlabel %xs : i64
    lp.switch %tag {cases = [0]} {
      ^():
      lp.dec %xs
      %z = lp.int 0 : !lp.t
      lp.return %z
    } @default {
      ^():
      %t = lp.project %xs {index = 1} : !lp.t
      lp.inc %t
      lp.dec %xs
      %n = call %t {fn = @length} : !lp.t
      %one = lp.int 1 : !lp.t
      %r = call %n, %one {fn = @nat_add} : !lp.t
      lp.return %r
    }
  }
  func @main(%x: !lp.t) -> !lp.t {
    %l = call %x {fn = @singleton} : !lp.t
    %n = call %l {fn = @length} : !lp.t
    lp.return %n
  }
}
"""

COUNTDOWN = """
module {
  func @count(%n: !lp.t) -> !lp.t {
    %z = lp.int 0 : !lp.t
    %e = call %n, %z {fn = @nat_dec_eq} : i8
    lp.switch %e {cases = [1]} {
      ^():
      lp.return %z
    } @default {
      ^():
      %one = lp.int 1 : !lp.t
      %m = call %n, %one {fn = @nat_sub} : !lp.t
      %r = call %m {fn = @count%TAIL%} : !lp.t
      lp.return %r
    }
  }
}
"""


def countdown(musttail: bool = True):
    return parse_module(COUNTDOWN.replace("%TAIL%", ", musttail" if musttail else ""))


@pytest.fixture
def int_match():
    return parse_module(INT_MATCH)


@pytest.fixture
def lists():
    return parse_module(LISTS)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[n])
