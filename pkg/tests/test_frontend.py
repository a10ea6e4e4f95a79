from fractions import Fraction as F
from pathlib import Path

import pytest

from dsmv.errors import NonlinearError, ProgramSyntaxError, SemanticError
from dsmv.frontend import (
    eval_pred,
    parse_linear_predicate,
    parse_predicate,
    parse_program,
    pred_not,
    render_program,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def test_labels_follow_source_order():
    prog = parse_program((FIXTURES / "programs" / "counterexample.pp").read_text())
    # while(1); z:=y(2); while(3); if(4); x:=x+r(5); skip(6); z:=z-1(7);
    # y:=4y(8); x:=x-1(9); terminal 10.
    assert sorted(prog.labels) == list(range(1, 10))
    assert prog.terminal_label == 10
    assert prog.pvars == ("x", "z", "y")
    assert prog.rvars == ("r",)


def test_mini_roulette_label_shape():
    prog = parse_program((FIXTURES / "programs" / "mini_roulette.pp").read_text())
    assert sorted(prog.labels) == list(range(1, 12))
    assert prog.terminal_label == 12
    dist = prog.dists["r"]
    assert dist.expectation() == F(5)
    assert len(dist.support) == 9


def test_round_trip_through_renderer():
    for path in sorted((FIXTURES / "programs").glob("*.pp")):
        prog = parse_program(path.read_text())
        again = parse_program(render_program(prog))
        assert sorted(again.labels) == sorted(prog.labels)
        assert again.pvars == prog.pvars
        assert render_program(again) == render_program(prog)


def test_syntax_error_carries_position():
    with pytest.raises(ProgramSyntaxError) as exc:
        parse_program("while x >= 1 do\n    x := ;\nod")
    assert exc.value.line == 2


def test_nonlinear_product_rejected():
    with pytest.raises(NonlinearError):
        parse_program("while x >= 1 do x := x * y od")


def test_sampling_variable_cannot_be_assigned():
    with pytest.raises(SemanticError):
        parse_program("dist r = {0: 1/2, 1: 1/2};\nwhile x >= 1 do r := 2 od")


def test_sampling_variable_banned_from_guards():
    with pytest.raises(SemanticError):
        parse_program("dist r = {0: 1/2, 1: 1/2};\nwhile r >= 1 do x := 2 od")


def test_bad_distribution_mass():
    with pytest.raises(SemanticError):
        parse_program("dist r = {0: 1/2, 1: 1/3};\nwhile x >= 1 do x := x + r od")


def test_probability_outside_unit_interval():
    with pytest.raises(SemanticError):
        parse_program("while x >= 1 do if prob(7/3) then skip else skip fi od")


def test_predicate_evaluation_and_negation():
    p = parse_predicate("x >= 1 and (y < 2 or z = 3)")
    assert eval_pred(p, {"x": 1, "y": 0, "z": 9})
    assert not eval_pred(p, {"x": 0, "y": 0, "z": 3})
    assert eval_pred(pred_not(p), {"x": 0, "y": 0, "z": 3})


def test_parse_linear_predicate_tightens_strict_atoms():
    # [DERIVED] not(z <= 0.25*y) over integers is 4z - y >= 1, i.e. y - 4z <= -1.
    (poly,) = parse_linear_predicate("not (z <= 0.25*y)", ("y", "z"))
    assert poly.rows == ((F(1), F(-4)),)
    assert poly.rhs == (F(-1),)


def test_parse_linear_predicate_false_is_empty_union():
    assert parse_linear_predicate("false", ("x",)) == ()
