import random

from hypothesis import given, settings, strategies as st

from lz.frontend import lower_surface
from lz.fuzz import generate_program, mutate_region, random_region
from lz.interp import eval_module, nat_dec_eq
from lz.ir import OBJ, I64, FuncIR, clone_region, erase_op, modules_equal, op_count, regions_alpha_equal, uses
from lz.lowering import lower_lp_to_rgn, lower_rgn_to_cfg
from lz.passes import PASSES, NumberingCtx, dce, is_pure, region_value_number, run_pipeline
from lz.textual import parse_module, print_module
from lz.verify import verify_module

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def compiled(seed):
    p = generate_program(seed)
    return p, lower_surface(p.defs)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_levels_agree(seed):
    p, lp = compiled(seed)
    rgn = lower_lp_to_rgn(lp)
    cfg = lower_rgn_to_cfg(rgn)
    results = [eval_module(m, "main", p.args, mode="unchecked").observable() for m in (lp, rgn, cfg)]
    assert results[1:] == results[:1] * 2


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from(sorted(PASSES)))
def test_each_pass_preserves_results_and_is_idempotent(seed, name):
    p, lp = compiled(seed)
    rgn = lower_lp_to_rgn(lp)
    once = run_pipeline(rgn, [name])
    assert verify_module(once) == []
    base = eval_module(rgn, "main", p.args, mode="unchecked").observable()
    assert eval_module(once, "main", p.args, mode="unchecked").observable() == base
    assert modules_equal(run_pipeline(once, [name]), once)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_print_parse_round_trip(seed):
    _, lp = compiled(seed)
    for m in (lp, lower_lp_to_rgn(lp), lower_rgn_to_cfg(lower_lp_to_rgn(lp))):
        assert modules_equal(parse_module(print_module(m)), m)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_verify_is_idempotent(seed):
    _, lp = compiled(seed)
    assert verify_module(lp) == verify_module(lp) == []


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_dce_never_grows(seed):
    _, lp = compiled(seed)
    rgn = lower_lp_to_rgn(lp)
    for f in rgn.funcs.values():
        assert op_count(dce(f)) <= op_count(f)


def _externals():
    f = FuncIR("host", [OBJ, OBJ, I64], OBJ)
    return f.params


@settings(max_examples=200, deadline=None)
@given(seeds, st.booleans())
def test_region_numbers_agree_with_alpha_equivalence(seed, mutate):
    rng = random.Random(seed)
    ext = _externals()
    a = random_region(rng, ext, n_ops=rng.randint(1, 8))
    b = mutate_region(rng, a, ext) if mutate else clone_region(a, {v: v for v in ext})
    ctx = NumberingCtx()
    na, nb = region_value_number(a, ctx), region_value_number(b, ctx)
    if regions_alpha_equal(a, b):
        assert na == nb
    if na != nb:
        assert not regions_alpha_equal(a, b)
    assert region_value_number(a, NumberingCtx()) == region_value_number(a, NumberingCtx())


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_erasing_dead_ops_keeps_modules_clean(seed):
    _, lp = compiled(seed)
    rgn = lower_lp_to_rgn(lp)
    for f in rgn.funcs.values():
        while True:
            used = uses(f)
            dead = [op for op in f.body.entry.ops
                    if is_pure(op) and op.results and all(not used.get(r) for r in op.results)]
            if not dead:
                break
            erase_op(f, dead[0])
            assert verify_module(rgn) == []


@given(st.integers(min_value=0, max_value=2**100), st.integers(min_value=0, max_value=2**100))
def test_nat_dec_eq_matches_integer_equality(a, b):
    assert nat_dec_eq(a, b) == int(a == b)
    assert nat_dec_eq(a, a) == 1
