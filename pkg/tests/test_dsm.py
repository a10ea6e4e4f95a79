from fractions import Fraction as F
from pathlib import Path

import pytest

from dsmv.cfg import build_cfg, loop_forest, loop_subcfg
from dsmv.dsm import (
    DSMMap,
    check_dsm,
    check_partial_dsm,
    expected_post,
    extreme_post_diffs,
    parse_dsm,
    render_dsm,
)
from dsmv.errors import CoverageError
from dsmv.frontend import parse_program
from dsmv.invariants import guard_default_invariant, load_invariant
from dsmv.linexpr import LinearExpr

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load_case(name):
    prog = parse_program((FIXTURES / "programs" / f"{name}.pp").read_text())
    cfg = build_cfg(prog)
    invpath = FIXTURES / "invariants" / f"{name}.inv"
    if invpath.exists():
        inv = load_invariant(invpath.read_text(), cfg)
    else:
        inv = guard_default_invariant(cfg)
    outer = loop_forest(cfg, prog)[0]
    return loop_subcfg(cfg, outer), inv, cfg.dists


def cert(name):
    return parse_dsm((FIXTURES / "certs" / f"{name}.dsm").read_text())


def test_parameter_validation():
    with pytest.raises(ValueError):
        DSMMap({}, F(0), F(-1), F(1), F(0))
    with pytest.raises(ValueError):
        DSMMap({}, F(1), F(2), F(1), F(0))


def test_parse_render_round_trip_over_cert_fixtures():
    for path in sorted((FIXTURES / "certs").glob("*.dsm")):
        dsm = parse_dsm(path.read_text())
        again = parse_dsm(render_dsm(dsm))
        assert again == dsm


def test_expected_post_mixes_the_distribution():
    # [DERIVED] eta' = 6x composed with x := x + r, E[r] = 1/2  ->  6x + 3.
    loop, _, dists = load_case("ber")
    (t,) = loop.out(2)
    post = expected_post(LinearExpr.var("x") * 6, t.update, dists)
    assert post == LinearExpr({"x": F(6)}, F(3))


def test_extreme_post_diffs_constant_case():
    # [DERIVED] diffs of 6x under x := x + r with r in {0, 1} are {0, 6}.
    loop, _, dists = load_case("ber")
    (t,) = loop.out(2)
    eta = LinearExpr.var("x") * 6
    assert extreme_post_diffs(eta, eta, t.update, dists) == (F(0), F(6))


def test_extreme_post_diffs_region_dependent():
    # [DERIVED] eta' = x, eta = 2x, update x := x + r over 0 <= x <= 3:
    # diff = r - x ranges over [-3, 1].
    loop, _, dists = load_case("ber")
    (t,) = loop.out(2)
    inv = load_invariant("inv 2: x >= 0 and x <= 3", loop)
    lo, hi = extreme_post_diffs(
        LinearExpr.var("x") * 2, LinearExpr.var("x"), t.update, dists,
        region=inv.at(2),
    )
    assert (lo, hi) == (F(-3), F(1))


def test_coverage_error_for_missing_label():
    loop, inv, dists = load_case("ber")
    dsm = DSMMap({1: LinearExpr.var("x")}, F(1), F(-1), F(1), F(0))
    with pytest.raises(CoverageError):
        check_dsm(dsm, loop, inv, dists)


def test_fixture_certificates_check_clean():
    for name in ("program1", "program2", "mini_roulette_synth", "mini_roulette_hand"):
        prog_name = name.split("_synth")[0].split("_hand")[0]
        loop, inv, dists = load_case(prog_name)
        report = check_dsm(cert(name), loop, inv, dists)
        assert report.verdict, (name, [v.detail for v in report.violations])


def test_known_bad_certificate_fails_at_the_documented_edge():
    loop, inv, dists = load_case("program3")
    report = check_dsm(cert("program3"), loop, inv, dists)
    assert not report.verdict
    v = report.violations[0]
    assert (v.condition, v.label, v.transition) == ("D2", 6, "6->9")


def test_violations_carry_exact_witnesses():
    loop, inv, dists = load_case("ber")
    # constant map cannot decrease: expected-decrease violations everywhere
    dsm = DSMMap(
        {lab: LinearExpr.const_expr(F(5)) for lab in loop.all_labels()},
        F(1), F(-1), F(1), F(0),
    )
    report = check_dsm(dsm, loop, inv, dists)
    assert not report.verdict
    decreases = [v for v in report.violations if "decrease" in v.detail]
    assert decreases


def test_partial_check_skips_the_head_lower_bound():
    loop, inv, dists = load_case("program1")
    dsm = cert("program1")
    shifted = DSMMap(
        {lab: e - F(10**6) for lab, e in dsm.eta.items()},
        dsm.epsilon, dsm.a, dsm.b, dsm.c,
    )
    assert not check_dsm(shifted, loop, inv, dists).verdict  # D5 now fails
    assert check_partial_dsm(shifted, loop, inv, dists).verdict


def test_scaling_preserves_the_certificate():
    loop, inv, dists = load_case("program2")
    for lam in (F(1, 3), F(2), F(299)):
        assert check_dsm(cert("program2").scaled(lam), loop, inv, dists).verdict
