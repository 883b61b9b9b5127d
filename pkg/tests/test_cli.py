import json
import subprocess
import sys

import pytest

from hmeasure import cli

LINE = """
task = "measure"
n = 1
expected = 2.0
[surface]
components = ["u1", "0", "2*u1"]
domain = [[0, 1]]
"""

PARABOLOID_METRIC = """
task = "measure"
seed = 11
[surface]
components = ["u1", "u2", "(u1^2+u2^2)/2"]
domain = [[0, 1], [0, 1]]
[metric]
lambda = 2.0
a = [0.3, -0.2]
[integration]
mc_samples = 200000
"""


def write(tmp_path, text, name="job.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(tmp_path, text, *extra):
    out = tmp_path / "report.json"
    code = cli.main(["--config", write(tmp_path, text), "--out", str(out), *extra])
    report = json.loads(out.read_text()) if out.exists() else None
    return code, report


def test_line_measure(tmp_path):
    code, rep = run(tmp_path, LINE)
    assert code == 0
    assert rep["value"] == pytest.approx(2.0, rel=1e-12)
    assert list(rep) == ["task", "inputs", "value", "error_estimate", "checks", "runtime_ms", "seed"]
    assert list(rep["checks"][0]) == ["name", "expected", "got", "tol", "pass"]


def test_wrong_expected_exits_3(tmp_path):
    code, rep = run(tmp_path, LINE.replace("expected = 2.0", "expected = 2.5"))
    assert code == 3 and rep["checks"][0]["pass"] is False


def test_malformed_expression_exit_2(tmp_path, capsys):
    code, rep = run(tmp_path, LINE.replace('"2*u1"', '"u1*("'))
    assert code == 2 and rep is None
    err = capsys.readouterr().err
    assert "offset 4" in err
    lines = err.splitlines()
    assert lines[-2] == "u1*(" and lines[-1].startswith("    ^")


@pytest.mark.parametrize("text", [
    "task = [",                                             # TOML syntax
    "task = \"measure\"",                                   # missing surface
    "task = \"nope\"",                                      # unknown task
    LINE.replace('domain = [[0, 1]]', 'domain = [[1, 0]]'),  # empty box
    LINE.replace('"0", ', ''),                              # wrong component count
    LINE + "[integration]\norder = 0\n",                    # invalid integration config
    LINE + "[distance]\nkind = \"cc\"\n",                   # unsupported distance
    LINE.replace('"2*u1"', '"2*w1"'),                       # unknown identifier
])
def test_config_errors_exit_2(tmp_path, text):
    code, _ = run(tmp_path, text)
    assert code == 2


def test_missing_config_file_exit_2(tmp_path):
    assert cli.main(["--config", str(tmp_path / "nope.toml")]) == 2


def test_invariant_violations_exit_4(tmp_path):
    coarea_bad = """
task = "coarea"
[coarea]
map = "x3"
chart = ["u1", "u2", "t + 0.1"]
domain = [[0, 1], [0, 1]]
levels = [[0, 1]]
box = [[0, 1], [0, 1], [0, 1]]
"""
    assert run(tmp_path, coarea_bad)[0] == 4
    embed_bad = LINE.replace('["u1", "0", "2*u1"]', '["u1^2", "0", "0"]').replace("[[0, 1]]", "[[-1, 1]]")
    assert run(tmp_path, embed_bad)[0] == 4
    radial_bad = LINE + '[distance]\nkind = "radial"\nprofile = "u1 + u2^2"\n'
    assert run(tmp_path, radial_bad)[0] == 4


def test_ball_touching_boundary_exit_3(tmp_path):
    blow = """
task = "blowup"
[surface]
components = ["u1", "u2", "(u1^2+u2^2)/2"]
domain = [[0, 1], [0, 1]]
[blowup]
u0 = [0.5, 0.5]
r = 1.0
"""
    assert run(tmp_path, blow)[0] == 3


def test_coarea_task(tmp_path):
    text = """
task = "coarea"
[coarea]
map = "x3"
chart = ["u1", "u2", "t"]
domain = [[0, 1], [0, 1]]
levels = [[0, 1]]
box = [[0, 1], [0, 1], [0, 1]]
weight = "1 + x1"
"""
    code, rep = run(tmp_path, text)
    assert code == 0 and rep["checks"][-1]["name"] == "coarea lhs vs rhs"
    code, rep = run(tmp_path, text.replace('weight = "1 + x1"', "riemannian = true"))
    assert code == 0


def test_metric_factor_and_volume_tasks(tmp_path):
    mf = """
task = "metric-factor"
expected = 4.0
[distance]
kind = "maxdist"
[metric_factor]
vectors = [[1, 0, 0], [0, 0, 1]]
[integration]
mc_samples = 200000
"""
    code, rep = run(tmp_path, mf)
    assert code == 0 and abs(rep["value"] - 4.0) < 3 * rep["error_estimate"]
    vol = LINE.replace('"measure"', '"volume"').replace("expected = 2.0", "expected = 2.23606797749979")
    code, rep = run(tmp_path, vol, "--tolerance", "1e-9")
    assert code == 0


def test_rescaled_check_in_measure_task(tmp_path):
    code, rep = run(tmp_path, PARABOLOID_METRIC)
    assert code == 0
    assert rep["checks"][0]["name"] == "rescaled normalised measure vs standard"


def test_bracket_check_task(tmp_path, capsys):
    assert cli.main(["--task", "bracket-check"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert [c["name"] for c in rep["checks"]] == [f"frame brackets n={n}" for n in (1, 2, 3, 4)]


def strip_runtime(text):
    rep = json.loads(text)
    rep.pop("runtime_ms")
    return json.dumps(rep, indent=2)


def test_reports_are_deterministic(tmp_path):
    path = write(tmp_path, PARABOLOID_METRIC)
    outs = []
    for i, threads in enumerate(["1", "1", "3"]):
        out = tmp_path / f"r{i}.json"
        assert cli.main(["--config", path, "--out", str(out), "--threads", threads]) == 0
        outs.append(strip_runtime(out.read_text()))
    assert outs[0] == outs[1] == outs[2]
    out = tmp_path / "seed.json"
    cli.main(["--config", path, "--out", str(out), "--seed", "12"])
    assert strip_runtime(out.read_text()) != outs[0]


def test_console_entry_point(tmp_path):
    path = write(tmp_path, LINE)
    proc = subprocess.run([sys.executable, "-m", "hmeasure.cli", "--config", path],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] == pytest.approx(2.0)
