from __future__ import annotations

import csv
import io
import subprocess
import sys

import pytest

from relgeo.cli import VERIFY_HEADER, run_cli


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_cli(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_classify_helicoid():
    code, out, _ = run(["classify", "--surface", "helicoid"])
    assert code == 0
    assert out.startswith("helicoid: Ruled")


def test_verify_ellipsoid_passes():
    code, out, _ = run(["verify", "--surface", "ellipsoid:1,1,2", "--normalization", "equiaffine",
                        "--identity", "EQ7,EQ19", "--grid", "17", "--tol", "1e-7"])
    assert code == 0
    assert "EQ7" in out and "EQ19" in out and "FAIL" not in out


def test_verify_monkey_saddle_pick_equivalence_fails():
    code, out, _ = run(["verify", "--surface", "monkey-saddle", "--identity", "EQ21A"])
    assert code == 2
    assert "FAIL" in out


def test_csv_deterministic_and_round_trips():
    argv = ["verify", "--surface", "ellipsoid:1,1,2", "--normalization", "seeded",
            "--grid", "9", "--format", "csv"]
    code1, a, _ = run(argv)
    code2, b, _ = run(argv)
    assert code1 == code2 == 0
    assert a == b
    rows = list(csv.reader(io.StringIO(a)))
    assert tuple(rows[0]) == VERIFY_HEADER
    for row in rows[1:]:
        for field in (row[4], row[5], row[6], row[7]):
            x = float(field)
            assert float("%.17g" % x) == x and "%.17g" % x == field
        assert row[8] == "true"


def test_threads_do_not_change_output(monkeypatch):
    argv = ["verify", "--surface", "monkey-saddle", "--normalization", "equiaffine*2",
            "--grid", "13", "--format", "csv"]
    _, serial, _ = run(argv)
    monkeypatch.setenv("RELGEO_THREADS", "3")
    _, threaded, _ = run(argv)
    assert serial == threaded
    monkeypatch.setenv("RELGEO_THREADS", "many")
    assert run(argv)[0] == 1


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["verify"],
    ["verify", "--surface", "sphere", "--file", "x.surf"],
    ["verify", "--surface", "torus"],
    ["verify", "--surface", "sphere", "--identity", "EQ99"],
    ["verify", "--surface", "sphere", "--grid", "two"],
    ["verify", "--surface", "sphere", "--tol", "-1"],
    ["verify", "--surface", "sphere", "--normalization", "blaschke"],
    ["verify", "--surface", "monkey-saddle", "--identity", "EQ22"],
    ["verify", "--surface", "sphere3", "--identity", "EQ24"],
    ["verify", "--file", "/nonexistent/surface.txt"],
    ["classify", "--surface", "sphere", "--threshold", "0"],
    ["integrate", "euler", "--surface", "helicoid"],
    ["invariants", "--surface", "sphere", "--point", "1,2,3"],
    ["invariants", "--surface", "sphere", "--point", "0,1"],
])
def test_usage_and_input_errors_exit_1(argv):
    code, _, err = run(argv)
    assert code == 1
    assert err.startswith("relgeo: error:")


def test_help_exits_zero():
    assert run(["--help"])[0] == 0


def test_normalization_diagnostic_has_location():
    code, _, err = run(["verify", "--surface", "sphere", "--normalization", "q:1 + * u"])
    assert code == 1
    lines = err.splitlines()
    assert "offset 4" in lines[0] and "'*'" in lines[0]
    assert lines[1].strip() == "q:1 + * u"
    assert lines[2].index("^") == lines[1].index("*")


def test_file_diagnostic_has_line_and_column(tmp_path):
    path = tmp_path / "bad.surf"
    path.write_text("[surface]\nn = 2\nx1 = u\nx2 = v\nx3 = u +* v\ndomain.1 = 0,1\ndomain.2 = 0,1\n")
    code, _, err = run(["verify", "--file", str(path)])
    assert code == 1
    assert "line 5, column 9" in err


def test_file_surface_with_its_normalization(tmp_path):
    path = tmp_path / "paraboloid.surf"
    path.write_text("[surface]\nn = 2\nx1 = u\nx2 = v\nx3 = u^2 + v^2\n"
                    "domain.1 = -1,1\ndomain.2 = -1,1\n[normalization]\nq = 1 + 0.2*u^2\n")
    code, out, _ = run(["verify", "--file", str(path), "--format", "csv", "--grid", "9"])
    assert code == 0
    assert "q:1 + 0.2*u^2" in out


def test_classify_csv_and_expect():
    code, out, _ = run(["classify", "--surface", "monkey-saddle", "--format", "csv"])
    assert code == 0
    row = list(csv.DictReader(io.StringIO(out)))[0]
    assert row["verdict"] == "Neither" and float(row["sup_abs_J_aff"]) > 1e-5
    assert run(["classify", "--surface", "sphere", "--expect", "Hyperquadric"])[0] == 0
    assert run(["classify", "--surface", "sphere", "--expect", "Ruled"])[0] == 2


@pytest.mark.parametrize("formula, norm", [
    ("euler", "seeded"),
    ("gaussbonnet", "euclidean"),
    ("meandefect", "equiaffine*2"),
    ("meandefect", "seeded:1"),
    ("signscan", "seeded"),
])
def test_integrate_formulas_pass(formula, norm):
    code, out, _ = run(["integrate", formula, "--surface", "ellipsoid:1,1,2",
                        "--normalization", norm, "--nodes", "32,64"])
    assert code == 0, out


def test_integrate_reports_failure_with_exit_2():
    code, out, _ = run(["integrate", "euler", "--surface", "sphere", "--nodes", "3,3",
                        "--normalization", "seeded", "--tol", "1e-12", "--format", "csv"])
    assert code == 2
    assert out.splitlines()[0] == "surface,normalization,quantity,nodes,value,target,deviation,tol,pass"


def test_invariants_at_points():
    code, out, _ = run(["invariants", "--surface", "sphere", "--point", "1,1", "--point", "2,3",
                        "--format", "csv"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 2
    assert float(rows[0]["K"]) == pytest.approx(1.0)
    assert float(rows[1]["S_II"]) == pytest.approx(1.0)
    code, out, _ = run(["invariants", "--surface", "helicoid", "--grid", "3"])
    assert code == 0 and out.count("point") == 9


def test_catalog_lists_surfaces():
    code, out, _ = run(["catalog", "--format", "csv"])
    assert code == 0
    names = [r["name"] for r in csv.DictReader(io.StringIO(out))]
    for name in ("sphere", "ellipsoid:1,1,2", "elliptic-paraboloid", "hyperbolic-paraboloid",
                 "helicoid", "monkey-saddle", "convex-nonquadric"):
        assert name in names


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "relgeo", "classify", "--surface", "helicoid"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "Ruled" in proc.stdout
