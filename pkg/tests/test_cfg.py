from fractions import Fraction as F
from pathlib import Path

from dsmv.cfg import build_cfg, emit_dot, iter_loops, loop_forest, loop_subcfg
from dsmv.frontend import parse_program

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load(name):
    prog = parse_program((FIXTURES / "programs" / name).read_text())
    return prog, build_cfg(prog)


def test_single_loop_shape():
    prog, cfg = load("ber.pp")
    # while(1) -> assign(2) -> back to 1; exit to terminal 3.
    assert cfg.labels == {1: "branch", 2: "assign"}
    assert cfg.l_in == 1 and cfg.l_out == 3
    targets = {t.target for t in cfg.out(1)}
    assert targets == {2, 3}
    (t,) = cfg.out(2)
    assert t.kind == "update" and t.target == 1
    assert t.update.target == "x"


def test_out_degrees_by_kind():
    _, cfg = load("mini_roulette.pp")
    for label, kind in cfg.labels.items():
        degree = len(cfg.out(label))
        if kind == "assign":
            assert degree == 1
        else:
            assert degree == 2, (label, kind)
    # prob edges always sum to one wherever they occur
    for label, kind in cfg.labels.items():
        if kind == "prob":
            assert sum(t.prob for t in cfg.out(label)) == F(1)


def test_skip_lowers_to_identity_update():
    prog = parse_program("while x >= 1 do skip od")
    cfg = build_cfg(prog)
    (t,) = cfg.out(2)
    assert t.kind == "update" and t.update.is_identity()


def test_loop_forest_nesting_depth():
    prog, cfg = load("program3.pp")
    forest = loop_forest(cfg, prog)
    assert len(forest) == 1
    outer = forest[0]
    assert len(outer.children) == 1
    middle = outer.children[0]
    assert len(middle.children) == 1
    inner = middle.children[0]
    assert inner.children == ()
    # scopes are nested strictly
    assert inner.body_labels < middle.body_labels < outer.body_labels | {middle.label}
    labels = [node.label for node in iter_loops(forest)]
    assert labels == [outer.label, middle.label, inner.label]


def test_loop_subcfg_restricts_scope():
    prog, cfg = load("counterexample.pp")
    forest = loop_forest(cfg, prog)
    outer = forest[0]
    inner = outer.children[0]
    sub = loop_subcfg(cfg, inner)
    assert sub.l_in == inner.label
    assert set(sub.labels) == {inner.label} | set(inner.body_labels)
    assert sub.l_out == inner.exit_label
    # inner loop of the doubling walk: while(3), if(4), x:=x+r(5), skip(6), z:=z-1(7)
    assert sub.l_out not in sub.labels


def test_dot_output_mentions_every_label():
    _, cfg = load("program1.pp")
    dot = emit_dot(cfg)
    assert dot.startswith("digraph")
    for lab in cfg.all_labels():
        assert f"  {lab} [" in dot
