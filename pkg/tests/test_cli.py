import csv
import io
import json
import math
import re
import subprocess
import sys

import pytest

from curvatura.cli import CSV_COLUMNS, run


def _run(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_compute_disk(capsys):
    code, out, _ = _run(capsys, "compute", "-f", "x^2+y^2-1", "--box", "-2,2x-2,2", "-a", "0",
                        "-k", "0,1,2", "--method", "both", "--res", "1024", "--json")
    assert code == 0
    rep = json.loads(out)
    vals = {(r["k"], r["method"]): r["value"] for r in rep["results"]}
    assert vals[(0, "indicator")] == pytest.approx(math.pi, rel=1e-2)
    assert vals[(1, "volume")] == pytest.approx(math.pi, rel=1e-2)
    assert vals[(1, "boundary")] == pytest.approx(math.pi, rel=1e-2)
    assert vals[(2, "volume")] == pytest.approx(1.0, abs=0.02)
    assert rep["domain"]["kind"] == "box"


def test_nodal_sine(capsys):
    code, out, _ = _run(capsys, "nodal", "-f", "sin(2*pi*x)", "--torus", "1,1", "--variant", "all", "--res", "512")
    assert code == 0
    vals = [r["value"] for r in json.loads(out)["results"]]
    assert len(vals) == 4
    for v in vals:
        assert v == pytest.approx(2.0, rel=1e-2)


def test_sweep_csv(capsys):
    code, out, _ = _run(capsys, "sweep", "-f", "cos(2*pi*x)+cos(2*pi*y)", "--torus", "1,1",
                        "--levels", "-1:1:3", "-k", "0,2", "--res", "64")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == CSV_COLUMNS
    skipped = [r for r in rows[1:] if r[0] == "0.0"]
    assert len(skipped) == 1 and skipped[0][5].startswith("skipped")
    assert len(rows) == 1 + 2 + 1 + 2


def test_compute_csv_and_mc(capsys, tmp_path):
    path = tmp_path / "out.csv"
    code, out, _ = _run(capsys, "compute", "-f", "x^2+y^2-1", "--box", "-2,2x-2,2", "-a", "0",
                        "-k", "0", "--res", "128", "--csv", "--mc", "65536", "-o", str(path))
    assert code == 0 and out == ""
    rows = list(csv.reader(path.open()))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [r[3] for r in rows[1:]] == ["indicator", "monte-carlo"]
    assert float(rows[2][2]) == pytest.approx(math.pi, rel=2e-2)


def test_byte_identical_json(capsys):
    argv = ["compute", "-f", "cos(2*pi*x)+cos(2*pi*y)", "--torus", "1,1", "-a", "0.5", "--res", "128", "--json"]
    _, first, _ = _run(capsys, *argv, "--threads", "1")
    _, second, _ = _run(capsys, *argv, "--threads", "3")
    _, third, _ = _run(capsys, *argv, "--threads", "1")
    assert first == second == third


@pytest.mark.parametrize("argv", [
    ["compute", "-f", "x^2+", "--torus", "1,1", "-a", "0"],
    ["compute", "-f", "x3", "--torus", "1,1", "-a", "0"],
    ["compute", "-f", "x", "--torus", "1,0", "-a", "0"],
    ["compute", "-f", "x", "--box", "0,1x2", "-a", "0"],
    ["compute", "-f", "x^2+y^2-1", "--box", "-2,2x-2,2", "-a", "0", "-k", "5"],
    ["compute", "-f", "x^2+y^2-1", "--box", "-1,1x-1,1", "-a", "3"],
    ["compute", "-f", "x", "--torus", "1", "-a", "0", "--threads", "0"],
    ["nodal", "-f", "x^2+y^2-1", "--box", "-2,2x-2,2"],
    ["sweep", "-f", "x", "--torus", "1", "--levels", "0:1"],
    ["compute", "-f", "x", "--torus", "1,1", "-a", "0", "-o", "/nonexistent/dir/out.json"],
])
def test_input_errors(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == 2
    assert err.startswith("curvatura: error:")


@pytest.mark.parametrize("argv", [
    ["compute", "-f", "cos(2*pi*x)+cos(2*pi*y)", "--torus", "1,1", "-a", "0", "--res", "64"],
    ["compute", "-f", "5+0*x", "--torus", "1", "-a", "0"],
    ["nodal", "-f", "cos(2*pi*x)+cos(2*pi*y)", "--torus", "1,1", "--res", "64"],
])
def test_regularity_errors(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == 3
    assert "regularity" in err


def test_argparse_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        run(["compute", "--torus", "1"])
    assert info.value.code == 2


def test_verify_subset(capsys):
    code, out, err = _run(capsys, "verify", "--only", "7")
    assert code == 0
    assert re.match(r"\[PASS\] +7 ", out)
    assert "1/1 criteria passed" in err
    code, out, _ = _run(capsys, "verify", "--only", "7", "--json")
    assert json.loads(out)[0]["passed"] is True
    assert _run(capsys, "verify", "--only", "42")[0] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "curvatura", "nodal", "-f", "sin(2*pi*x)", "--torus", "1",
                           "--variant", "algebraic", "--res", "256", "--csv"],
                          capture_output=True, text=True, check=True)
    lines = proc.stdout.splitlines()
    assert lines[0] == "variant,value,resolution"
    assert float(lines[1].split(",")[1]) == pytest.approx(2.0, rel=1e-3)
