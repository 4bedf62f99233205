import csv
import json

import pytest

from hypwalk.cli import main
from hypwalk.config import parse_config
from hypwalk.errors import ResourceError
from hypwalk.experiments import run_config
from hypwalk.report import TIMESTAMP_KEY, build_report, dumps, load_report, strip_timestamp

SMALL = """\
title = "small Busemann check"
experiment = "E4"
seed = 11

[backend]
kind = "tree"
rank = 2

[measure]
kind = "explicit"
support = ["a", "A", "b", "B"]
masses = [0.4, 0.1, 0.25, 0.25]

[walk]
steps = 400
trajectories = 200
boundary_trajectories = 2000
boundary_depth = 24

[thresholds]
joint_se = {z}
"""


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL.format(z=3.0))
    return path


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert [line.split()[0] for line in out.splitlines() if line.startswith("E")] == ["E1", "E2", "E3", "E4", "E5"]


def test_malformed_config_writes_nothing(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(SMALL.format(z=3.0).replace("steps = 400", "steps = -4"))
    out = tmp_path / "out"
    assert main(["experiment", "--config", str(bad), "--out", str(out)]) == 2
    assert "line 15: " in capsys.readouterr().err
    assert not out.exists()
    assert main(["experiment", "--experiment", "E9", "--out", str(out)]) == 2
    assert main(["experiment", "--config", str(bad.with_name("missing.toml")), "--out", str(out)]) == 2
    assert not out.exists()


def test_experiment_writes_report_and_rerenders(small, tmp_path):
    out = tmp_path / "run"
    assert main(["experiment", "--config", str(small), "--out", str(out)]) == 0
    report = load_report(out)
    assert report["passed"] and report["exit_code"] == 0
    assert report["provenance"]["seed"] == 11 and report["provenance"]["config_source"] == "small.toml"
    assert {e["estimator"] for e in report["estimates"]} == {"escape_rate_mc", "escape_rate_busemann"}
    assert (out / "figures" / "escape_routes.png").stat().st_size > 0
    rows = list(csv.DictReader(open(out / "tables" / "checks.csv")))
    assert rows[0]["check"] == "busemann-formula"
    again = tmp_path / "again"
    assert main(["report", str(out / "report.json"), "--out", str(again), "--no-figures"]) == 0
    assert (again / "tables" / "estimates.csv").read_text() == (out / "tables" / "estimates.csv").read_text()
    assert not (again / "figures").exists()


def test_reports_are_byte_identical_modulo_timestamp(small, tmp_path):
    # the pointwise estimator needs 10^4 boundary samples
    small.write_text(small.read_text().replace("boundary_trajectories = 2000", "boundary_trajectories = 10000"))
    texts = []
    for name in ("one", "two"):
        assert main(["estimate", "--config", str(small), "--out", str(tmp_path / name), "--threads", "2"]) == 0
        texts.append((tmp_path / name / "report.json").read_text())
    one, two = (json.loads(t) for t in texts)
    assert TIMESTAMP_KEY in one
    assert dumps(strip_timestamp(one)) == dumps(strip_timestamp(two))
    # the timestamp is the only line that differs
    diff = [a for a, b in zip(texts[0].splitlines(), texts[1].splitlines()) if a != b]
    assert all(TIMESTAMP_KEY in line for line in diff)
    # a different seed changes the numbers
    assert main(["estimate", "--config", str(small), "--seed", "12", "--out", str(tmp_path / "three")]) == 0
    three = json.loads((tmp_path / "three" / "report.json").read_text())
    assert strip_timestamp(three) != strip_timestamp(one)


def test_short_boundary_sample_is_an_estimator_failure(small, tmp_path):
    assert main(["estimate", "--config", str(small), "--out", str(tmp_path / "e")]) == 1
    errors = load_report(tmp_path / "e")["errors"]
    assert errors[0]["step"] == "pointwise-dimension-harmonic"
    assert errors[0]["type"] == "EstimatorFailure" and errors[0]["details"] == {"samples": 2000}


def test_failed_check_exits_one(tmp_path, capsys):
    path = tmp_path / "strict.toml"
    path.write_text(SMALL.format(z=0.0))
    assert main(["experiment", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "failed busemann-formula" in capsys.readouterr().out
    assert load_report(tmp_path / "o")["exit_code"] == 1


def test_resource_error_exits_three():
    def runner(run):
        def blow_up():
            raise ResourceError("convolution table over its cap")
        run.step("entropy", blow_up)

    result = run_config(parse_config(SMALL.format(z=3.0)), runner=runner)
    assert result.exit_code == 3
    report = build_report(result)
    assert report["errors"][0]["type"] == "ResourceError" and report["exit_code"] == 3


def test_walk_exports_trajectories(small, tmp_path):
    out = tmp_path / "w"
    assert main(["walk", "--config", str(small), "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out / "trajectories.csv")))
    assert len(rows) == 200 * 401
    assert not (out / "figures").exists()
