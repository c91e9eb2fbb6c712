import json
import math
import os
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

SPECS = Path(__file__).resolve().parent.parent / "specs"


def run(*args, env=None, check_code=None):
    full_env = dict(os.environ)
    full_env.update(env or {})
    proc = subprocess.run(
        [sys.executable, "-m", "finsler_nullity", *map(str, args)], capture_output=True, text=True, env=full_env
    )
    if check_code is not None:
        assert proc.returncode == check_code, proc.stderr + proc.stdout[-2000:]
    return proc


def report(spec, point, vector, k):
    proc = run("report", SPECS / spec, "--point", point, "--vector", vector, "--k", k, check_code=0)
    return json.loads(proc.stdout)


def test_report_euclidean():
    doc = report("euclidean2.json", "0,0", "1,0", 0)
    assert doc["schema"] == "finsler-nullity/1"
    assert doc["nullity"]["mu_k"] == 2
    assert all(v == 0.0 for v in doc["curvature_norms"].values())
    assert doc["metadata"]["tool_version"]
    assert all("residual" in c and "tolerance" in c for c in doc["identities"])


def test_report_sphere_space_form():
    doc = report("sphere_r2.json", "0.3,-0.2", "1,0.4", 0.25)
    assert doc["curvature_norms"]["omega_bar_hh"] < 1e-7
    assert doc["nullity"]["mu_k"] == 2
    for s in doc["flag_curvature_samples"]:
        assert s["K_R"] == pytest.approx(0.25, abs=1e-6)


def test_report_randers_identity():
    doc = report("randers3.json", "0.1,0.2,-0.1", "1,-0.4,0.3", 0)
    (eq,) = [c for c in doc["identities"] if c["name"] == "H_vs_R_on_v"]
    assert eq["residual"] < 1e-6 and eq["status"] == "pass"
    assert doc["curvature_norms"]["P"] > 1e-4


def test_report_json_file(tmp_path):
    out = tmp_path / "r.json"
    run("report", SPECS / "euclidean2.json", "--point", "0,0", "--vector", "1,0", "--json", out, check_code=0)
    assert json.loads(out.read_text())["command"] == "report"


def test_report_inf_serialised_as_string():
    doc = report("euclidean2.json", "0,0", "1,0", 0)
    assert doc["nullity"]["gap_ratio"] == "inf"


@pytest.mark.parametrize(
    "args",
    [
        ("report", SPECS / "randers_bad_b.json", "--point", "0,0", "--vector", "1,0"),
        ("report", SPECS / "funk_disk2.json", "--point", "2,0", "--vector", "1,0"),
        ("report", SPECS / "euclidean2.json", "--point", "0,0", "--vector", "1,0", "--k", "-1"),
        ("suite", SPECS / "randers_bad_b.json"),
        ("trace", SPECS / "euclidean2.json", "--start", "0,0,1", "--t-end", "1"),
        ("report", SPECS / "missing.json", "--point", "0,0", "--vector", "1,0"),
    ],
)
def test_error_exit_code_and_object(args):
    proc = run(*args, check_code=2)
    err = json.loads(proc.stdout)["error"]
    assert err["type"] and err["message"]


def test_corrupted_spec_names_field():
    err = json.loads(run("suite", SPECS / "randers_bad_b.json", check_code=2).stdout)["error"]
    assert err["type"] == "MetricSpecError"
    assert "b" in json.dumps(err)


def test_suite_euclidean_all_pass():
    proc = run("suite", SPECS / "euclidean2.json", "--threads", 2, check_code=0)
    doc = json.loads(proc.stdout)
    assert doc["summary"]["fail"] == 0
    assert all(c["status"] != "fail" for c in doc["checks"])
    judged = [c for c in doc["checks"] if c["status"] in ("pass", "fail")]
    assert judged and all(c["residual"] is not None and c["tolerance"] is not None for c in judged)


def test_suite_product_k0():
    proc = run("suite", SPECS / "s2xr.json", "--k", "0", "--grid", "5:0.1", check_code=0)
    doc = json.loads(proc.stdout)
    names = {c["name"]: c for c in doc["checks"] if c.get("k", 0.0) == 0.0}
    assert names["involutivity"]["status"] == "pass"
    (idx,) = [c for c in doc["checks"] if c["name"] == "nullity_index"]
    assert idx["mu_k"] == 1


def test_suite_deterministic_across_threads(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("suite", SPECS / "s2xr.json", "--k", "0", "--seed", 7, "--threads", 1, "--json", a, check_code=0)
    run("suite", SPECS / "s2xr.json", "--k", "0", "--seed", 7, "--json", b, env={"FINSLER_THREADS": "3"}, check_code=0)
    assert a.read_bytes() == b.read_bytes()


def test_bad_grid_is_usage_error():
    assert run("suite", SPECS / "euclidean2.json", "--grid", "1:0").returncode == 2


def test_trace_euclidean_rows_exact(tmp_path):
    out = tmp_path / "t.csv"
    run("trace", SPECS / "euclidean2.json", "--start", "0,0,1,0.5", "--t-end", 3, "--csv", out, check_code=0)
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x1,x2,v1,v2,F"
    for line in lines[1:]:
        t, x1, x2, v1, v2, F = map(float, line.split(","))
        assert abs(x1 - t) < 1e-12 and abs(x2 - 0.5 * t) < 1e-12
        assert F == pytest.approx(math.hypot(1, 0.5), abs=1e-12)


def test_trace_funk_marker():
    proc = run("trace", SPECS / "funk_disk2.json", "--start", "0.1,0,1,0.2", "--t-end", 60, check_code=0)
    assert proc.stdout.rstrip().splitlines()[-1].startswith("# domain_exit t=")


def test_trace_great_circle_closes():
    from finsler_nullity import load_metric
    from finsler_nullity.jets import SupportElement

    F = load_metric(SPECS / "sphere_r2.json")(SupportElement.of([0.3, 0.1], [1.0, 0.4]))
    period = 2 * math.pi * 2 / F  # circumference over speed
    proc = run("trace", SPECS / "sphere_r2.json", "--start", "0.3,0.1,1,0.4", "--t-end", repr(period), "--rel-tol", "1e-10", check_code=0)
    rows = np.array([[float(a) for a in ln.split(",")] for ln in proc.stdout.splitlines()[1:]])
    assert rows[-1, 0] == period
    assert np.max(np.abs(rows[-1, 1:-1] - rows[0, 1:-1])) < 1e-5


def test_trace_through_antipode_leaves_chart():
    # from the chart origin a great circle hits the antipode, at infinity, after half a turn
    proc = run("trace", SPECS / "sphere_r2.json", "--start", "0,0,0.5,0", "--t-end", 4 * math.pi, check_code=0)
    last = proc.stdout.rstrip().splitlines()[-1]
    assert last.startswith("# domain_exit t=")
    assert float(last.split("=")[1]) == pytest.approx(2 * math.pi, abs=1e-6)


def test_trace_byte_identical():
    args = ("trace", SPECS / "randers3.json", "--start", "0.1,0,0.1,1,0.2,0.1", "--t-end", 0.5)
    assert run(*args, check_code=0).stdout == run(*args, check_code=0).stdout


@pytest.mark.skipif(shutil.which("finsler-nullity") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["finsler-nullity", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "finsler-nullity" in proc.stdout
