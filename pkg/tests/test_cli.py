import json
from pathlib import Path

from click.testing import CliRunner

from dsmv.cli import cli, main

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def prog(name):
    return str(FIXTURES / "programs" / name)


def inv(name):
    return str(FIXTURES / "invariants" / name)


def cert(name):
    return str(FIXTURES / "certs" / name)


def run(*args):
    return CliRunner().invoke(cli, [str(a) for a in args])


def test_parse_reports_structure_and_emits_dot(tmp_path):
    dot = tmp_path / "cfg.dot"
    res = run("parse", prog("ber.pp"), "--emit-cfg", dot, "--json")
    assert res.exit_code == 0
    data = json.loads(res.output)
    assert data["labels"] == [1, 2]
    assert data["terminal"] == 3
    assert data["loops"] == [1]
    assert dot.read_text().startswith("digraph")


def test_check_passes_a_good_certificate():
    res = run("check", prog("program1.pp"), "--cert", cert("program1.dsm"),
              "--inv", inv("program1.inv"), "--json")
    assert res.exit_code == 0
    assert json.loads(res.output)["verdict"] == "pass"


def test_check_fails_a_bad_certificate_with_exit_1():
    res = run("check", prog("program3.pp"), "--cert", cert("program3.dsm"),
              "--inv", inv("program3.inv"), "--json")
    assert res.exit_code == 1
    data = json.loads(res.output)
    assert data["verdict"] == "fail"
    assert data["violations"]


def test_synth_emits_a_reusable_certificate(tmp_path):
    out = tmp_path / "ber.dsm"
    res = run("synth", prog("ber.pp"), "--emit-cert", out, "--json")
    assert res.exit_code == 0
    assert json.loads(res.output)["result"] == "success"
    res2 = run("check", prog("ber.pp"), "--cert", out)
    assert res2.exit_code == 0


def test_synth_dump_lp_is_byte_stable(tmp_path):
    a, b = tmp_path / "a.lp", tmp_path / "b.lp"
    for path in (a, b):
        res = run("synth", prog("program1.pp"), "--inv", inv("program1.inv"),
                  "--loop", "1", "--dump-lp", path)
        assert res.exit_code == 0
    assert a.read_bytes() == b.read_bytes()


def test_synth_fail_exits_1():
    res = run("synth", prog("counterexample.pp"),
              "--inv", inv("counterexample.inv"), "--loop", "1", "--json")
    assert res.exit_code == 1
    assert json.loads(res.output)["reason"] == "LP-infeasible"


def test_prove_whole_program(tmp_path):
    out = tmp_path / "all.dsm"
    res = run("prove", prog("program1.pp"), "--inv", inv("program1.inv"),
              "--emit-cert", out, "--json")
    assert res.exit_code == 0
    data = json.loads(res.output)
    assert data["result"] == "proved"
    assert [l["label"] for l in data["loops"]] == [1, 3]
    assert "# loop 1" in out.read_text()


def test_prove_not_proved_exits_1():
    res = run("prove", prog("counterexample.pp"),
              "--inv", inv("counterexample.inv"), "--json")
    assert res.exit_code == 1
    assert json.loads(res.output)["result"] == "not-proved"


def test_check_derivation_valid():
    res = run("check-derivation", str(FIXTURES / "derivations" / "nested_walk.drv"),
              "--json")
    assert res.exit_code == 0
    data = json.loads(res.output)
    assert data["verdict"] == "valid"
    assert data["steps"] == 26


def test_sim_reports_frequencies():
    res = run("sim", prog("ber.pp"), "--init", "x=0,n=3", "--runs", "50",
              "--budget", "1000", "--seed", "1", "--json")
    assert res.exit_code == 0
    data = json.loads(res.output)
    assert data["terminated"] == 50


def test_usage_error_exit_code_2():
    assert main(["synth", prog("program1.pp"), "--inv", inv("program1.inv"),
                 "--loop", "99"]) == 2
    assert main(["parse", "/nonexistent.pp"]) == 2


def test_malformed_program_exit_code_2(tmp_path):
    bad = tmp_path / "bad.pp"
    bad.write_text("while x >= do od")
    assert main(["parse", str(bad)]) == 2
