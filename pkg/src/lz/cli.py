"""Command-line driver: compile, optimize, print or run programs; golden tests; step benchmarks.

    lz FILE [--emit=lp|rgn|cfg] [--passes=p1,p2] [--run=@sym --args=1,2 --rc=strict|unchecked]
    lz --check DIR
    lz --bench DIR [--nruns N]
"""
from __future__ import annotations

import argparse
import io
import math
import os
import shlex
import sys
from dataclasses import dataclass, field
from pathlib import Path

from lz.frontend import FrontendError, lower_surface, parse_surface
from lz.frontend.ast import Ctor, IntLit
from lz.interp import CtorValue, RcMode, eval_module
from lz.ir import ModuleIR
from lz.lowering import LoweringError, lower_lp_to_rgn, lower_rgn_to_cfg
from lz.passes import FULL_RGN_PIPELINE, UnknownPassError, run_pipeline
from lz.textual import ParseFailure, parse_module, print_module
from lz.verify import verify_module

LEVELS = ("lp", "rgn", "cfg")
# Passes that only make sense once lp control flow has become region values.
RGN_ONLY_PASSES = {"fold", "run-known", "region-cse"}

EXIT_OK, EXIT_DIAG, EXIT_TRAP = 0, 1, 2
SOURCE_SUFFIXES = (".lzf", ".lz.mlir")


@dataclass
class RunSpec:
    entry: str
    args: list = field(default_factory=list)
    rc_mode: RcMode = RcMode.STRICT


@dataclass
class DriverConfig:
    input_path: str
    emit_level: str = "lp"
    pass_names: list = field(default_factory=list)
    run: RunSpec | None = None
    stats: bool = False

    def __post_init__(self):
        if self.emit_level not in LEVELS:
            raise ValueError(f"unknown emit level '{self.emit_level}'")


class DriverError(Exception):
    """A user-facing error; the message is reported as a diagnostic."""


def _color() -> bool:
    return os.environ.get("LZ_COLOR", "0") == "1"


def _error(err, where: str, message: str):
    label = "\x1b[31merror\x1b[0m" if _color() else "error"
    print(f"{where}: {label}: {message}", file=err)


def load_module(path: str, text: str | None = None) -> ModuleIR:
    """Parse a surface (.lzf) or IR (.lz.mlir) file into a verified module."""
    if text is None:
        text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".lzf"):
        return lower_surface(parse_surface(text))
    return parse_module(text)


def parse_args_list(text: str) -> list:
    """Host arguments: comma separated naturals or constructor literals like C1(2, C0())."""
    if not text.strip():
        return []
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    parts.append(cur)
    out = []
    for p in parts:
        defs = parse_surface(f"def arg := {p.strip()}")
        out.append(_host_value(defs[0].body))
    return out


def _host_value(e):
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, Ctor):
        return CtorValue(e.tag, tuple(_host_value(a) for a in e.args))
    raise DriverError("arguments must be naturals or constructor literals")


def _lower(m: ModuleIR, cfg: DriverConfig) -> ModuleIR:
    level = LEVELS.index(cfg.emit_level)
    bad = [p for p in cfg.pass_names if p in RGN_ONLY_PASSES]
    if level == 0 and bad:
        raise DriverError(f"pass '{bad[0]}' needs --emit=rgn or --emit=cfg")
    if level >= 1:
        m = lower_lp_to_rgn(m)
    m = run_pipeline(m, cfg.pass_names)
    if level >= 2:
        m = lower_rgn_to_cfg(m)
    return m


def drive(cfg: DriverConfig, out=None, err=None) -> int:
    """Run the pipeline parse, verify, lower, optimize, verify, then print or evaluate."""
    out = out or sys.stdout
    err = err or sys.stderr
    path = cfg.input_path
    try:
        m = load_module(path)
        m = _lower(m, cfg)
    except ParseFailure as e:
        for pe in e.errors:
            _error(err, f"{path}:{pe.span.line}:{pe.span.column}", pe.message)
        return EXIT_DIAG
    except (FrontendError, DriverError, UnknownPassError, LoweringError) as e:
        _error(err, path, str(e))
        return EXIT_DIAG
    except OSError as e:
        _error(err, path, e.strerror or str(e))
        return EXIT_DIAG
    diags = verify_module(m)
    if diags:
        for d in diags:
            _error(err, path, f"after lowering: {d}")
        return EXIT_DIAG
    if cfg.run is None:
        out.write(print_module(m))
        return EXIT_OK
    entry = cfg.run.entry.lstrip("@")
    if entry not in m.funcs:
        _error(err, path, f"unknown entry @{entry}")
        return EXIT_DIAG
    result = eval_module(m, entry, cfg.run.args, cfg.run.rc_mode)
    if result.trap is not None:
        print(f"trap: {result.trap}", file=err)
        if cfg.stats:
            print(result.metrics(), file=out)
        return EXIT_TRAP
    print(result.value, file=out)
    if cfg.stats:
        print(result.metrics(), file=out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Golden tests


@dataclass
class TestOutcome:
    path: str
    status: str  # "pass" | "fail"
    first_failed_check: tuple | None = None  # (line number, pattern)

    def __post_init__(self):
        if self.status == "fail" and self.first_failed_check is None:
            raise ValueError("a failed outcome needs the failing check")


def _directives(text: str, key: str) -> list[tuple[int, str]]:
    marker = f"// {key}:"
    out = []
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith(marker):
            out.append((no, s[len(marker):].strip()))
    return out


def source_files(directory) -> list[Path]:
    d = Path(directory)
    return sorted(
        (p for p in d.rglob("*") if p.is_file() and p.name.endswith(SOURCE_SUFFIXES)),
        key=lambda p: str(p),
    )


def check_output(output: str, checks: list[tuple[int, str, str]]):
    """Ordered substring matching.  Returns None or the first failed (line, pattern).

    ``checks`` holds (line, kind, pattern) with kind "CHECK" or "CHECK-NOT".
    A CHECK-NOT pattern must not occur between the previous CHECK match and
    the next one (or the end of output).
    """
    lines = output.splitlines()
    pos = 0
    pending_not: list = []
    for no, kind, pat in checks:
        if kind == "CHECK-NOT":
            pending_not.append((no, pat))
            continue
        idx = next((i for i in range(pos, len(lines)) if pat in lines[i]), None)
        if idx is None:
            return (no, pat)
        for nno, npat in pending_not:
            if any(npat in ln for ln in lines[pos:idx]):
                return (nno, npat)
        pending_not = []
        pos = idx + 1
    for nno, npat in pending_not:
        if any(npat in ln for ln in lines[pos:]):
            return (nno, npat)
    return None


def run_golden_file(path: Path) -> TestOutcome:
    text = path.read_text(encoding="utf-8")
    runs = _directives(text, "RUN")
    checks = [(no, "CHECK", p) for no, p in _directives(text, "CHECK")]
    checks += [(no, "CHECK-NOT", p) for no, p in _directives(text, "CHECK-NOT")]
    checks.sort()
    if not runs:
        return TestOutcome(str(path), "fail", (0, "missing // RUN: line"))
    chunks = []
    for no, flags in runs:
        out, err = io.StringIO(), io.StringIO()
        try:
            argv = shlex.split(flags) + [str(path)]
            ns = _parser().parse_args(argv)
            code = drive(_config_from(ns), out, err)
        except (SystemExit, ValueError, DriverError, ParseFailure) as e:
            return TestOutcome(str(path), "fail", (no, f"bad RUN line: {e}"))
        chunks.append(out.getvalue() + err.getvalue() + f"exit: {code}\n")
    failed = check_output("".join(chunks), checks)
    if failed is not None:
        return TestOutcome(str(path), "fail", failed)
    return TestOutcome(str(path), "pass")


def run_golden(directory) -> list[TestOutcome]:
    """Run every golden file under ``directory`` in lexicographic path order."""
    return [run_golden_file(p) for p in source_files(directory)]


def golden_summary(outcomes) -> str:
    passed = sum(o.status == "pass" for o in outcomes)
    return f"{passed}/{len(outcomes)} passed"


# ---------------------------------------------------------------------------
# Benchmarks


@dataclass
class BenchRow:
    name: str
    base_steps: int
    opt_steps: int

    @property
    def ratio(self) -> float:
        return self.base_steps / self.opt_steps


class BenchError(Exception):
    pass


def bench_program(path: Path, nruns: int = 1) -> BenchRow:
    """CFG-level step counts without and with the full rgn pipeline."""
    text = path.read_text(encoding="utf-8")
    decl = _directives(text, "BENCH")
    if not decl:
        raise BenchError(f"{path.name}: missing // BENCH: line")
    ns = _parser().parse_args(shlex.split(decl[0][1]) + [str(path)])
    cfg = _config_from(ns)
    if cfg.run is None:
        raise BenchError(f"{path.name}: BENCH line needs --run")
    m = load_module(str(path), text)
    rgn = lower_lp_to_rgn(m)
    base = lower_rgn_to_cfg(rgn)
    opt = lower_rgn_to_cfg(run_pipeline(rgn, FULL_RGN_PIPELINE))
    entry = cfg.run.entry.lstrip("@")
    row = None
    for _ in range(nruns):
        a = eval_module(base, entry, cfg.run.args, cfg.run.rc_mode)
        b = eval_module(opt, entry, cfg.run.args, cfg.run.rc_mode)
        for r in (a, b):
            if r.trap is not None:
                raise BenchError(f"{path.name}: trap: {r.trap}")
        if a.observable(cfg.run.rc_mode == RcMode.STRICT) != b.observable(cfg.run.rc_mode == RcMode.STRICT):
            raise BenchError(f"{path.name}: optimized program disagrees ({a.value} vs {b.value})")
        row = BenchRow(path.name, a.steps, b.steps)
    return row


def geomean(xs) -> float:
    xs = list(xs)
    if not xs:
        return 1.0
    return math.exp(sum(math.log(x) for x in xs) / len(xs))


def bench(directory, nruns: int = 1, out=None) -> list[BenchRow]:
    if nruns < 1:
        raise ValueError("nruns must be at least 1")
    out = out or sys.stdout
    rows = [bench_program(p, nruns) for p in source_files(directory)]
    for r in rows:
        print(f"{r.name}: base={r.base_steps} opt={r.opt_steps} ratio={r.ratio:.2f}", file=out)
    print(f"geomean ratio={geomean(r.ratio for r in rows):.2f} over {len(rows)} programs", file=out)
    return rows


# ---------------------------------------------------------------------------
# Entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lz", description="lp/rgn compiler driver")
    ap.add_argument("input", nargs="?", help="a .lzf surface file or a .lz.mlir IR file")
    ap.add_argument("--emit", choices=LEVELS, default="lp")
    ap.add_argument("--passes", default="", help="comma separated pass names")
    ap.add_argument("--run", metavar="@SYM", help="evaluate this function instead of printing")
    ap.add_argument("--args", default="", help="comma separated arguments for --run")
    ap.add_argument("--rc", choices=[m.value for m in RcMode], default=RcMode.STRICT.value)
    ap.add_argument("--stats", action="store_true", help="print steps, peak frames and live cells after --run")
    ap.add_argument("--check", metavar="DIR", help="run the golden tests in DIR")
    ap.add_argument("--bench", metavar="DIR", help="compare step counts over the programs in DIR")
    ap.add_argument("--nruns", type=int, default=1)
    return ap


def _config_from(ns) -> DriverConfig:
    run = None
    if ns.run:
        run = RunSpec(ns.run, parse_args_list(ns.args), RcMode(ns.rc))
    passes = [p for p in ns.passes.split(",") if p]
    return DriverConfig(ns.input, ns.emit, passes, run, ns.stats)


def main(argv=None) -> int:
    ap = _parser()
    ns = ap.parse_args(argv)
    if ns.check:
        outcomes = run_golden(ns.check)
        for o in outcomes:
            if o.status == "pass":
                print(f"PASS {o.path}")
            else:
                line, pat = o.first_failed_check
                print(f"FAIL {o.path}:{line}: {pat}")
        print(golden_summary(outcomes))
        return EXIT_OK if all(o.status == "pass" for o in outcomes) else EXIT_DIAG
    if ns.bench:
        try:
            bench(ns.bench, ns.nruns)
        except (BenchError, ValueError, ParseFailure, FrontendError) as e:
            _error(sys.stderr, ns.bench, f"bench failed: {e}")
            return EXIT_TRAP
        return EXIT_OK
    if not ns.input:
        ap.error("an input file is required")
    try:
        cfg = _config_from(ns)
    except (ParseFailure, DriverError) as e:
        _error(sys.stderr, ns.input, f"bad --args: {e}")
        return EXIT_DIAG
    return drive(cfg)


if __name__ == "__main__":
    sys.exit(main())
