import random

import pytest

from lz.frontend import parse_surface
from lz.frontend.ast import CtorPat, IntPat, WildPat
from lz.fuzz import (
    OracleError,
    SurfaceEvaluator,
    data_values,
    generate_match,
    generate_program,
    match_pattern,
    mutate_region,
    oracle_eval,
    random_region,
    region_choice_module,
)
from lz.interp import ClosureValue, CtorValue
from lz.ir import OBJ, FuncIR, regions_alpha_equal
from lz.verify import verify_module


def test_pattern_matching_binds_nested_fields():
    binds = {}
    pat = CtorPat(2, (WildPat("n"), CtorPat(1, (IntPat(3),))))
    assert match_pattern(pat, CtorValue(2, (5, CtorValue(1, (3,)))), binds)
    assert binds == {"n": 5}
    assert not match_pattern(pat, CtorValue(2, (5, CtorValue(1, (4,)))), {})
    with pytest.raises(OracleError):
        match_pattern(IntPat(0), CtorValue(0), {})


def test_oracle_first_matching_row_wins():
    defs = parse_surface("def g x y := match x, y with | 0, 2 => 10 | 0, _ => 20 | _, _ => 60")
    assert [oracle_eval(defs, "g", a) for a in ([0, 2], [0, 9], [1, 2])] == [10, 20, 60]


def test_oracle_closures():
    defs = parse_surface(
        "def k x y := nat_add x y\ndef k10 := pap k 10\ndef ap42 f := f 42\n"
        "def main := ap42 k10\ndef part := pap k 1\n"
    )
    assert oracle_eval(defs, "main") == 52
    assert oracle_eval(defs, "part") == ClosureValue("k", 2, (1,))


def test_oracle_rejects_runaway_programs():
    defs = parse_surface("def loop x := loop x")
    with pytest.raises(OracleError):
        SurfaceEvaluator(defs, fuel=1_000).run("loop", [1])


def test_generated_programs_are_deterministic_and_well_formed():
    a, b = generate_program(11), generate_program(11)
    assert a.source == b.source
    assert parse_surface(a.source) == a.defs
    assert a.entry == "main"


def test_data_domain_sizes():
    nats = [0, 1]
    assert len(data_values(0, nats)) == 3
    assert len(data_values(1, nats)) == 1 + 2 + 2 * 3 + 3


def test_generated_match_domain_is_exhaustive():
    g = generate_match(5)
    combos = list(g.domain())
    assert len(combos) == len(set(combos)) > 0
    assert all(len(c) == len(g.col_types) for c in combos)


def test_region_mutation_changes_structure():
    f = FuncIR("main", [OBJ, OBJ], OBJ)
    rng = random.Random(0)
    for _ in range(50):
        r = random_region(rng, f.params)
        assert not regions_alpha_equal(r, mutate_region(rng, r, f.params))


def test_region_choice_modules_verify():
    for seed in range(20):
        assert verify_module(region_choice_module(random.Random(seed))) == []
