from conftest import LISTS, ops_named, stage
from lz.frontend import compile_surface
from lz.interp import eval_module
from lz.ir import modules_equal, op_count
from lz.lowering import lower_lp_to_rgn, lower_rgn_to_cfg, lower_to_cfg
from lz.textual import parse_module
from lz.verify import predecessors, reachable_blocks, verify_module

SHARED_DEFAULT = "def g x y := match x, y with | 0, 2 => 10 | 0, 3 => 20 | _, _ => 60\n"

THREE_ARMS = """
module {
  func @main(%x: !lp.t) -> !lp.t {
    %l = lp.getlabel %x : i64
    lp.switch %l {cases = [0, 2]} {
      ^():
      %a = lp.int 7 : !lp.t
      lp.return %a
    } {
      ^():
      %h = lp.project %x {index = 0} : !lp.t
      lp.return %h
    } @default {
      ^():
      %d = lp.int 9 : !lp.t
      lp.return %d
    }
  }
}
"""


def test_two_arm_switch_becomes_select(int_match):
    rgn = lower_lp_to_rgn(int_match)
    names = [op.name for op in rgn.funcs["main"].body.entry.ops]
    assert names[-2:] == ["select", "rgn.run"]
    assert names.count("rgn.val") == 2
    assert "arith.cmpeq" in names
    assert not ops_named(rgn, "lp.switch")
    assert verify_module(rgn) == []


def test_i1_scrutinee_selects_directly():
    rgn = lower_lp_to_rgn(stage("dead_region_A"))
    assert modules_equal(rgn, stage("dead_region_B"))
    assert not ops_named(rgn, "arith.cmpeq")


def test_three_arms_become_value_switch():
    rgn = lower_lp_to_rgn(parse_module(THREE_ARMS))
    (sw,) = ops_named(rgn, "switch")
    assert sw.attrs["cases"].values == (0, 2)
    assert len(sw.operands) == 4
    assert rgn.funcs["main"].body.entry.ops[-1].name == "rgn.run"


def test_joinpoint_becomes_one_region_with_two_runs():
    lp = compile_surface(SHARED_DEFAULT)
    assert len(ops_named(lp, "lp.joinpoint")) == 1
    rgn = lower_lp_to_rgn(lp)
    joins = [op for op in ops_named(rgn, "rgn.val") if any(
        o.name == "lp.int" and o.attrs["value"].value == 60 for o in op.walk())]
    (join,) = joins
    runs = [op for op in ops_named(rgn, "rgn.run") if op.operands[0] is join.result]
    assert len(runs) == 2
    assert not ops_named(rgn, "lp.jump")


def test_lowering_preserves_arm_op_counts(lists):
    rgn = lower_lp_to_rgn(lists)
    before = sum(op_count(r) for op in ops_named(lists, "lp.switch") for r in op.regions)
    after = sum(op_count(op.regions[0]) for op in ops_named(rgn, "rgn.val"))
    assert before == after


def test_select_form_becomes_three_blocks(int_match):
    cfg = lower_to_cfg(int_match)
    blocks = cfg.funcs["main"].body.blocks
    assert len(blocks) == 3
    assert blocks[0].terminator.name == "cond_br"
    assert [b.terminator.name for b in blocks[1:]] == ["ret", "ret"]
    assert verify_module(cfg) == []


def test_known_run_becomes_branch():
    cfg = lower_rgn_to_cfg(parse_module(
        """
module {
  func @main(%a: !lp.t) -> !lp.t {
    %x = rgn.val {
      ^():
      lp.return %a
    } : !rgn.val<>
    rgn.run %x()
  }
}
"""
    ))
    blocks = cfg.funcs["main"].body.blocks
    assert len(blocks) == 2
    assert blocks[0].terminator.name == "br"
    assert blocks[1].terminator.name == "ret"


def test_value_switch_becomes_switch_br():
    cfg = lower_to_cfg(parse_module(THREE_ARMS))
    entry = cfg.funcs["main"].body.entry
    assert entry.terminator.name == "switch_br"
    assert len(cfg.funcs["main"].body.blocks) == 4


def test_shared_default_block_has_two_predecessors():
    cfg = lower_to_cfg(compile_surface(SHARED_DEFAULT))
    body = cfg.funcs["g"].body
    (default,) = [b for b in body.blocks if any(
        op.name == "lp.int" and op.attrs["value"].value == 60 for op in b.ops)]
    assert len(predecessors(body)[default]) == 2


def test_cfg_has_no_region_ops_and_all_blocks_reachable(lists):
    cfg = lower_to_cfg(lists)
    for f in cfg.funcs.values():
        assert all(not op.regions for op in f.walk())
        assert not [op for op in f.walk() if op.name.startswith("rgn.") or op.name.startswith("lp.switch")]
        assert len(reachable_blocks(f.body)) == len(f.body.blocks)
    assert verify_module(cfg) == []


def test_levels_agree_on_lists():
    lp = parse_module(LISTS)
    rgn = lower_lp_to_rgn(lp)
    cfg = lower_rgn_to_cfg(rgn)
    results = [eval_module(m, "main", [4]) for m in (lp, rgn, cfg)]
    assert results[0].value == 1
    assert all(r.observable(strict=True) == results[0].observable(strict=True) for r in results)


def test_cfg_lowering_is_idempotent(int_match):
    cfg = lower_to_cfg(int_match)
    assert modules_equal(lower_rgn_to_cfg(cfg), cfg)
