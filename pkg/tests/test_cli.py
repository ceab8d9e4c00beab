import json

import click
import pytest
from click.testing import CliRunner

from lepage.cli import loads_problem, main, parse_form
from lepage.multisympl import build_lambda_n
from lepage.symcore import var


@pytest.fixture
def run():
    runner = CliRunner()

    def go(*args):
        return runner.invoke(main, list(args), catch_exceptions=False)
    return go


def test_examples_lists_library(run):
    r = run("examples")
    assert r.exit_code == 0
    for name in ("point_mech", "trivial2x2", "cscalar", "maxwell4d"):
        assert name in r.output


def test_legendre_prints_hamiltonian(run):
    r = run("legendre", "--example", "point_mech")
    assert r.exit_code == 0
    assert "H: e + p**2/2 + q**2/2" in r.output


def test_legendre_degenerate_is_clean_error(run):
    r = run("legendre", "--example", "maxwell2d", "--target", "maxwell")
    assert r.exit_code != 0 and "Traceback" not in r.output


def test_problem_file_with_lagrangian(tmp_path, run):
    p = tmp_path / "osc.yaml"
    p.write_text('version: 1\nn: 1\nk: 1\nlagrangian: "v**2/2 - y1**2/2"\n')
    r = run("legendre", "--problem", str(p))
    assert r.exit_code == 0 and "H: e + p**2/2 + y1**2/2" in r.output


def test_problem_errors_carry_line_and_column(tmp_path, run):
    p = tmp_path / "bad.yaml"
    p.write_text("version: 1\nexample: point_mech\nbogus: 3\n")
    r = run("legendre", "--problem", str(p))
    assert r.exit_code != 0 and "bad.yaml:3:1" in r.output
    p.write_text('version: 1\nn: 1\nk: 1\nlagrangian: "v**2/2 - (y1"\n')
    r = run("legendre", "--problem", str(p))
    assert r.exit_code != 0 and "bad.yaml:4:" in r.output


def test_problem_requires_version():
    with pytest.raises(Exception):
        loads_problem("example: point_mech\n")


def test_parse_form():
    S = build_lambda_n(2, 1)
    F = parse_form(S.chart, "dy1: x1; dx2: y1**2")
    assert F == S.chart.form({("y1",): var("x1"), ("x2",): var("y1") ** 2})
    assert parse_form(S.chart, "x1*y1") == S.chart.scalar(var("x1") * var("y1"))
    with pytest.raises(click.BadParameter):
        parse_form(S.chart, "dy1: x1; dx1^dx2: y1")
    with pytest.raises(click.BadParameter):
        parse_form(S.chart, "dz: 1")


def test_observables_and_brackets(run):
    r = run("observables", "--example", "scalar", "--form", "dx2: x1")
    assert r.exit_code == 0 and '"algebraic"' in r.output
    r = run("brackets", "--example", "scalar", "--with-h", "dx2: x1")
    assert r.exit_code == 0 and "}: 1" in r.output


def test_evolve_then_verify_curve(tmp_path, run):
    out = tmp_path / "o"
    r = run("evolve", "--example", "point_mech", "--grid", "2000", "--tmax", "6.283", "--out", str(out))
    assert r.exit_code == 0
    curve = out / "point_mech.curve"
    assert curve.exists()
    r = run("verify", "--curve", str(curve), "--tolerance", "1e-6", "--format", "json")
    assert r.exit_code == 0
    report = json.loads(r.output[r.output.index("{"):])
    assert report["passed"] and all(c["passed"] for c in report["checks"])


def test_verify_criterion_is_deterministic(tmp_path, run):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("verify", "--criterion", "9", "--out", str(a)).exit_code == 0
    assert run("verify", "--criterion", "9", "--out", str(b)).exit_code == 0
    ja, jb = (d / "criterion-9.json" for d in (a, b))
    assert ja.read_bytes() == jb.read_bytes()
    assert "runtime" not in ja.read_text()
    r = run("report", str(ja), "--golden", str(jb))
    assert r.exit_code == 0


def test_report_golden_mismatch(tmp_path, run):
    a = tmp_path / "a"
    run("verify", "--criterion", "9", "--out", str(a))
    rep = json.loads((a / "criterion-9.json").read_text())
    rep["checks"][0]["passed"] = False
    rep["passed"] = False
    g = tmp_path / "golden.json"
    g.write_text(json.dumps(rep))
    r = run("report", str(a / "criterion-9.json"), "--golden", str(g))
    assert r.exit_code != 0
