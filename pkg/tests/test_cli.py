import io

import pytest

from conftest import INT_MATCH
from lz.cli import (
    BenchError,
    DriverConfig,
    RunSpec,
    bench,
    bench_program,
    check_output,
    drive,
    geomean,
    golden_summary,
    main,
    parse_args_list,
    run_golden,
    run_golden_file,
)
from lz.interp import CtorValue, RcMode


@pytest.fixture
def int_match_file(tmp_path):
    p = tmp_path / "int_match_file.lz.mlir"
    p.write_text(INT_MATCH)
    return p


def run_drive(cfg: DriverConfig):
    out, err = io.StringIO(), io.StringIO()
    code = drive(cfg, out, err)
    return code, out.getvalue(), err.getvalue()


def test_emit_rgn_prints_select_form(int_match_file):
    code, out, _ = run_drive(DriverConfig(str(int_match_file), "rgn"))
    assert code == 0
    assert "select" in out and "rgn.run" in out and "lp.switch" not in out


def test_run_prints_result(int_match_file):
    code, out, _ = run_drive(DriverConfig(str(int_match_file), run=RunSpec("@main", [42])))
    assert (code, out) == (0, "43\n")


def test_stats_line(int_match_file):
    code, out, _ = run_drive(DriverConfig(str(int_match_file), "cfg", run=RunSpec("@main", [7]), stats=True))
    assert out.splitlines() == ["99999999", "steps=7 frames=1 live=0"]


def test_unknown_pass_is_a_diagnostic(int_match_file):
    code, _, err = run_drive(DriverConfig(str(int_match_file), "rgn", ["nope"]))
    assert code == 1 and "unknown pass" in err


def test_region_passes_need_region_level(int_match_file):
    code, _, err = run_drive(DriverConfig(str(int_match_file), "lp", ["fold"]))
    assert code == 1 and "needs --emit=rgn" in err


def test_traps_exit_two(tmp_path):
    p = tmp_path / "trap.lz.mlir"
    p.write_text("module {\n  func @main(%a: !lp.t) -> !lp.t {\n    %l = lp.getlabel %a : i64\n    lp.return %a\n  }\n}\n")
    code, _, err = run_drive(DriverConfig(str(p), run=RunSpec("main", [1])))
    assert (code, err) == (2, "trap: getlabel on non-Ctor\n")


def test_parse_errors_carry_positions(tmp_path, monkeypatch):
    p = tmp_path / "bad.lzf"
    p.write_text("def f x :=\n  match x with | 1 => 2\n")
    code, _, err = run_drive(DriverConfig(str(p)))
    assert code == 1
    assert err == f"{p}:2:3: error: match must end in wildcard row\n"
    monkeypatch.setenv("LZ_COLOR", "1")
    _, _, colored = run_drive(DriverConfig(str(p)))
    assert "\x1b[31merror\x1b[0m" in colored


def test_missing_file(tmp_path):
    code, _, err = run_drive(DriverConfig(str(tmp_path / "absent.lz.mlir")))
    assert code == 1 and "error" in err


def test_bad_emit_level():
    with pytest.raises(ValueError):
        DriverConfig("x.lz.mlir", "llvm")


def test_output_is_deterministic(int_match_file):
    cfg = DriverConfig(str(int_match_file), "cfg", ["region-cse", "fold", "run-known", "dce"])
    assert run_drive(cfg) == run_drive(cfg)


def test_argument_parsing():
    assert parse_args_list("") == []
    assert parse_args_list("1, 2") == [1, 2]
    assert parse_args_list("C1(2, C0()),7") == [CtorValue(1, (2, CtorValue(0))), 7]


def test_check_output_semantics():
    out = "a\nb\nc\n"
    assert check_output(out, [(1, "CHECK", "a"), (2, "CHECK", "c")]) is None
    assert check_output(out, [(1, "CHECK", "b"), (2, "CHECK", "a")]) == (2, "a")
    assert check_output(out, [(1, "CHECK", "a"), (2, "CHECK-NOT", "b"), (3, "CHECK", "c")]) == (2, "b")
    assert check_output(out, [(1, "CHECK", "b"), (2, "CHECK-NOT", "a")]) is None
    # Two checks never match the same line.
    assert check_output("ab\n", [(1, "CHECK", "a"), (2, "CHECK", "b")]) == (2, "b")


def test_golden_failure_reports_first_missing_check(tmp_path):
    p = tmp_path / "t.lz.mlir"
    p.write_text("// RUN: --run=@main --args=42\n// CHECK: 43\n// CHECK: 44\n" + INT_MATCH)
    outcome = run_golden_file(p)
    assert outcome.status == "fail"
    assert outcome.first_failed_check == (3, "44")


def test_golden_empty_dir(tmp_path):
    assert golden_summary(run_golden(tmp_path)) == "0/0 passed"


def test_golden_order_is_lexicographic(tmp_path):
    for name in ("b.lz.mlir", "a.lzf", "c/d.lz.mlir"):
        (tmp_path / name).parent.mkdir(exist_ok=True)
        (tmp_path / name).write_text("// RUN: --emit=lp\n// CHECK: module\ndef f := 1\n" if name.endswith(".lzf")
                                     else "// RUN:\n// CHECK: module\nmodule {}\n")
    outcomes = run_golden(tmp_path)
    assert [o.path for o in outcomes] == sorted(o.path for o in outcomes)
    assert golden_summary(outcomes) == "3/3 passed"


def test_bench_constant_program_has_ratio_one(tmp_path):
    p = tmp_path / "k.lz.mlir"
    p.write_text("// BENCH: --run=@main\nmodule {\n  func @main() -> !lp.t {\n    %c = lp.int 3 : !lp.t\n    lp.return %c\n  }\n}\n")
    assert bench_program(p).ratio == 1.0


def test_bench_report_format(tmp_path):
    p = tmp_path / "k.lz.mlir"
    p.write_text("// BENCH: --run=@main --args=42\n" + INT_MATCH)
    out = io.StringIO()
    rows = bench(tmp_path, 2, out)
    assert len(rows) == 1
    assert out.getvalue().splitlines()[-1] == "geomean ratio=1.00 over 1 programs"


def test_bench_names_trapping_program(tmp_path):
    p = tmp_path / "bad.lz.mlir"
    p.write_text("// BENCH: --run=@main --args=3\nmodule {\n  func @main(%a: !lp.t) -> !lp.t {\n"
                 "    %l = lp.project %a {index = 0} : !lp.t\n    lp.return %l\n  }\n}\n")
    with pytest.raises(BenchError, match="bad.lz.mlir: trap"):
        bench_program(p)
    with pytest.raises(ValueError):
        bench(tmp_path, 0)


def test_geomean():
    assert geomean([]) == 1.0
    assert geomean([2.0, 8.0]) == pytest.approx(4.0)


def test_main_entry_points(int_match_file, capsys, tmp_path):
    assert main([str(int_match_file), "--run=@main", "--args=42"]) == 0
    assert capsys.readouterr().out == "43\n"
    # A file without RUN lines counts as a failure.
    assert main(["--check", str(tmp_path)]) == 1
    assert capsys.readouterr().out.splitlines()[-1] == "0/1 passed"
    assert main([str(int_match_file), "--run=@main", "--args=C1("]) == 1
