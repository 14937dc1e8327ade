import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from crystalcoh import cli
from crystalcoh.compare import ComparisonReport

ROOT = Path(__file__).resolve().parents[1]
JOBS = sorted((ROOT / "jobs").glob("*.json"))
GOLDEN = ROOT / "tests" / "golden"
EXPECTED_EXIT = {"bo_base_change.json": 1}


def run(argv, **kw):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(argv, stdout=out, stderr=err, **kw)
    return code, out.getvalue(), err.getvalue()


def write_job(tmp_path, **doc):
    path = tmp_path / "job.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


@pytest.mark.parametrize("job", JOBS, ids=[j.stem for j in JOBS])
def test_golden_file_regenerates_exactly(job):
    code, out, _ = run(["--job", str(job), "--quiet"])
    assert code == EXPECTED_EXIT.get(job.name, 0)
    assert out == (GOLDEN / job.name).read_text(encoding="utf-8")


def test_output_is_independent_of_thread_count(tmp_path):
    job = str(ROOT / "jobs" / "bo_torsion_p2.json")
    a = run(["--job", job, "--threads", "1", "--quiet"])[1]
    b = run(["--job", job, "--threads", "4", "--quiet"])[1]
    assert a == b


def test_compare_on_the_line_passes():
    code, out, err = run(["compare", "--job", str(ROOT / "jobs" / "a1_flat_compare.json")])
    assert code == 0
    assert json.loads(out)["status"] == "pass"
    assert "PASS" in err


def test_torsion_on_bo_reports_tau():
    code, out, _ = run(["--job", str(ROOT / "jobs" / "bo_torsion_p2.json"), "--quiet"])
    assert code == 0
    tau = json.loads(out)["reports"][0]["extra"]["tau"]["d=8"]
    assert tau == [{"tau": "g(y1,2)*g(y3,2) + 2*g(y2,4)", "weight": 8}]


def test_malformed_generator_reports_position(tmp_path):
    job = write_job(tmp_path, command="envelope", prime=2, variables=["x"], generators=["x^"])
    code, out, err = run(["--job", job])
    assert code == 2 and out == ""
    assert "position 2" in err


@pytest.mark.parametrize(
    "doc,needle",
    [
        ({"prime": 2, "variables": ["x"], "generators": [], "colour": "red"}, "unknown key"),
        ({"prime": 6, "variables": ["x"], "generators": []}, "not a prime"),
        ({"prime": 2, "variables": ["x"]}, "missing required key"),
        ({"prime": 2, "variables": ["x"], "generators": [], "precision": 1, "nilpotency": 2}, "nilpotency"),
        ({"prime": 2, "variables": ["x", "x"], "generators": []}, "distinct"),
        ({"prime": 2, "variables": ["x"], "generators": [], "truncation": "8"}, "integer"),
        ({"prime": 2, "variables": ["x"], "generators": [], "crystal": {"rank": 2, "connection": {"x": [["1"]]}}}, "2x2"),
        ({"prime": 2, "variables": ["x"], "generators": [], "checks": ["nope"]}, "checks"),
    ],
)
def test_schema_violations_exit_2(tmp_path, doc, needle):
    code, _, err = run(["derham", "--job", write_job(tmp_path, **doc)])
    assert code == 2
    assert needle in err


def test_invalid_json_exit_2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"prime": 2,', encoding="utf-8")
    code, _, err = run(["derham", "--job", str(path)])
    assert code == 2 and "line" in err


def test_command_conflict_and_missing_job(tmp_path):
    job = write_job(tmp_path, command="envelope", prime=2, variables=["x"], generators=[])
    assert run(["derham", "--job", job])[0] == 2
    assert run(["derham"])[0] == 2
    assert run(["--job", write_job(tmp_path, prime=2, variables=["x"], generators=[])])[0] == 2


def test_overrides_and_output_locations(tmp_path, monkeypatch):
    job = write_job(tmp_path, command="derham", prime=3, variables=["x"], generators=[], truncation=4)
    out_file = tmp_path / "report.json"
    code, stdout, _ = run(["--job", job, "--degree", "6", "--out", str(out_file), "--quiet"])
    assert code == 0 and stdout == ""
    assert json.loads(out_file.read_text())["job"]["truncation"] == 6
    monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path / "outdir"))
    code, stdout, _ = run(["--job", job, "--quiet"])
    assert code == 0 and stdout == ""
    assert (tmp_path / "outdir" / "derham.json").exists()


def test_inconclusive_maps_to_exit_3(tmp_path, monkeypatch):
    def fake(spec):
        rep = ComparisonReport("compare_derham_ca", spec.describe())
        rep.add("stable between d and d+margin", None)
        return rep

    monkeypatch.setattr(cli, "compare_derham_ca", fake)
    job = write_job(tmp_path, command="compare", prime=2, variables=["x"], generators=[])
    assert run(["--job", job, "--quiet"])[0] == 3


def test_stability_margin_flag(tmp_path):
    job = write_job(tmp_path, command="compare", prime=2, variables=["x"], generators=[], truncation=4)
    code, out, _ = run(["--job", job, "--stability-margin", "4", "--quiet"])
    assert code == 0
    assert json.loads(out)["reports"][0]["stable_range"]["truncations"] == [4, 8]
    assert run(["--job", job, "--stability-margin", "0", "--quiet"])[0] == 2


def test_cech_and_envelope_commands(tmp_path):
    job = write_job(tmp_path, prime=2, variables=["x", "y"], generators=["x^2", "x*y", "y^2"], precision=2, truncation=4)
    code, out, _ = run(["envelope", "--job", job, "--quiet"])
    assert code == 0
    doc = json.loads(out)
    assert doc["kind"] == "MonomialIdeal" and doc["basis"][0] == {"label": "1", "order": 2, "weight": 0}
    code, out, _ = run(["cech", "--job", job, "--level", "2", "--quiet"])
    assert code == 0
    assert json.loads(out)["degrees_reported"] == [0, 1]


def test_non_integrable_connection_is_a_failure(tmp_path):
    job = write_job(tmp_path, command="derham", prime=2, variables=["x", "y"], generators=[], precision=2,
                    truncation=3, crystal={"rank": 1, "connection": {"x": [["2*y"]]}})
    assert run(["--job", job, "--quiet"])[0] == 1


def test_selftest_passes():
    code, out, _ = run(["selftest", "--quiet"])
    assert code == 0
    assert json.loads(out)["status"] == "pass"


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "crystalcoh.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "crystalcoh" in res.stdout
    res = subprocess.run(["crystalcoh", "--version"], capture_output=True, text=True)
    assert res.returncode == 0
