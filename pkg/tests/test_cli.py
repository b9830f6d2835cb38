import csv
import json

import pytest

from isomech.cli import main
from conftest import write_csvs

SMALL_CONFIG = {"n_authors": 150, "policy": {"kind": "truthful"}}


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def config_path(tmp_path):
    p = tmp_path / "world.json"
    p.write_text(json.dumps(SMALL_CONFIG))
    return p


@pytest.fixture
def world_dir(tmp_path, config_path):
    out = tmp_path / "world"
    assert main(["simulate", "--config", str(config_path), "--out", str(out), "--seed", "3"]) == 0
    return out


def test_simulate_writes_six_files(world_dir):
    names = sorted(p.name for p in world_dir.iterdir())
    assert names == sorted(["submissions.csv", "reviews.csv", "authorships.csv", "rankings.csv",
                            "theta.csv", "manifest.json"])
    m = json.loads((world_dir / "manifest.json").read_text())
    assert m["seed"] == 3 and m["config"]["n_authors"] == 150
    assert all(len(d) == 64 for d in m["inputs"].values())
    assert _rows(world_dir / "theta.csv")[0].keys() == {"paper_id", "theta"}


def test_simulate_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n_authors": 10,,}')
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o"), "--seed", "1"]) == 1
    assert "byte offset 17" in capsys.readouterr().err


def test_simulate_unknown_key_is_input_error(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"n_author": 10}')
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o"), "--seed", "1"]) == 1


def test_simulate_unwritable_out(tmp_path, config_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["simulate", "--config", str(config_path), "--out", str(blocker / "sub"),
                 "--seed", "1"]) == 2


def test_refuses_overwrite_without_force(world_dir, config_path, capsys):
    args = ["simulate", "--config", str(config_path), "--out", str(world_dir), "--seed", "3"]
    assert main(args) == 2
    assert "--force" in capsys.readouterr().err
    assert main(args + ["--force"]) == 0


def test_simulate_idempotent(tmp_path, config_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        main(["simulate", "--config", str(config_path), "--out", str(out), "--seed", "8"])
        outs.append(out)
    for f in ("submissions.csv", "reviews.csv", "authorships.csv", "rankings.csv", "theta.csv"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()


def test_calibrate_full(abc_dir):
    assert main(["calibrate", "--data", str(abc_dir)]) == 0
    rows = {r["paper_id"]: r for r in _rows(abc_dir / "calibration.csv")}
    assert set(rows) == {"A", "B", "C", "D"}
    assert float(rows["B"]["modified"]) == pytest.approx(10 / 3)
    ranks = _rows(abc_dir / "residuals.csv")
    assert [r["rank"] for r in ranks] == ["1", "2", "3", "4"]
    assert (abc_dir / "calibrate.manifest.json").exists()


def test_calibrate_partition_distinct_topics_is_identity(tmp_path):
    d = write_csvs(
        tmp_path / "d",
        [("A", "t1"), ("B", "t2"), ("C", "t3")],
        [("A", "2"), ("B", "3"), ("C", "5")],
        [("A", "x"), ("B", "x"), ("C", "x")],
        [("x", "A", "1"), ("x", "B", "2"), ("x", "C", "3")],
    )
    assert main(["calibrate", "--data", str(d), "--variant", "partition"]) == 0
    for r in _rows(d / "calibration.csv"):
        assert float(r["modified"]) == float(r["raw"])
        assert r["flagged"] == "0"


def test_calibrate_flag_threshold_zero(abc_dir):
    out = abc_dir / "out"
    assert main(["calibrate", "--data", str(abc_dir), "--out", str(out), "--flag-threshold", "0"]) == 0
    for r in _rows(out / "calibration.csv"):
        moved = float(r["residual"]) != 0.0
        assert (r["flagged"] == "1") == (moved and int(r["participating"]) > 0)


def test_calibrate_bad_data_is_input_error(tmp_path, capsys):
    d = write_csvs(tmp_path / "d", [("A", "")], [("A", "11")], [("A", "x")], [])
    assert main(["calibrate", "--data", str(d)]) == 1
    assert "reviews.csv" in capsys.readouterr().err


def test_evaluate_world(world_dir, tmp_path, capsys):
    out = tmp_path / "ev"
    assert main(["evaluate", "--data", str(world_dir), "--theta", str(world_dir / "theta.csv"),
                 "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    lengths = sorted(int(k) for k in rep["variants"]["full"]["per_length"])
    fig = _rows(out / "figure1.csv")
    assert [int(r["ranking_length"]) for r in fig] == lengths
    assert main(["report", "--input", str(out / "report.json")]) == 0
    text = capsys.readouterr().out
    assert "[full] overall MSE" in text and "[partition]" in text


def test_evaluate_missing_theta(world_dir, tmp_path, capsys):
    missing = tmp_path / "nope" / "theta.csv"
    assert main(["evaluate", "--data", str(world_dir), "--theta", str(missing),
                 "--out", str(tmp_path / "ev")]) == 1
    assert str(missing) in capsys.readouterr().err


def test_evaluate_replications(config_path, tmp_path):
    out = tmp_path / "ev"
    assert main(["evaluate", "--config", str(config_path), "--seed", "4", "--reps", "3",
                 "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["config"]["replications"] == 3
    assert len(rep["variants"]["full"]["replications"]) == 3
    assert rep["paired"]["n_pairs"] <= 3
    assert main(["evaluate", "--config", str(config_path), "--reps", "3",
                 "--out", str(tmp_path / "x")]) == 1


def test_evaluate_output_independent_of_jobs(config_path, tmp_path):
    blobs = []
    for jobs in ("1", "2"):
        out = tmp_path / f"j{jobs}"
        main(["evaluate", "--config", str(config_path), "--seed", "4", "--reps", "3",
              "--jobs", jobs, "--out", str(out)])
        blobs.append((out / "report.json").read_bytes())
    assert blobs[0] == blobs[1]


@pytest.mark.parametrize(
    "utility, theta, expected",
    [("power:2", "5,3", True), ("accept:4", "6,3.9", False)],
)
def test_verify_truthfulness(utility, theta, expected, capsys):
    assert main(["verify-truthfulness", "--utility", utility, "--theta", theta,
                 "--noise", "0", "--seed", "0"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["truthful_optimal"] is expected
    assert doc["config"]["utility"] == utility


def test_verify_truthfulness_guard(capsys):
    assert main(["verify-truthfulness", "--theta", "1,2,3,4,5,6,7,8", "--seed", "0"]) == 1
    assert "limit" in capsys.readouterr().err


def test_seed_is_required(config_path, tmp_path):
    with pytest.raises(SystemExit):
        main(["simulate", "--config", str(config_path), "--out", str(tmp_path / "o")])


def test_report_rejects_foreign_json(tmp_path):
    p = tmp_path / "r.json"
    p.write_text("{}")
    assert main(["report", "--input", str(p)]) == 1


def test_partial_ranking_noted_in_manifest(tmp_path, capsys):
    d = write_csvs(
        tmp_path / "d",
        [("A", ""), ("B", ""), ("C", "")],
        [("A", "2"), ("B", "3"), ("C", "5")],
        [("A", "x"), ("B", "x"), ("C", "x")],
        [("x", "A", "1"), ("x", "B", "2")],
    )
    assert main(["calibrate", "--data", str(d)]) == 0
    assert "covers only part" in capsys.readouterr().err
    m = json.loads((d / "calibrate.manifest.json").read_text())
    assert m["config"]["partial_rankings"] == ["x"]
