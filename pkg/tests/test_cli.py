import csv
import json

import pytest
from click.testing import CliRunner

from sleepadapt.cli import main


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    r = invoke("simulate", "--out", d, "--seed", 3, "--subjects", 2, "--days", 2, "--shedders", 1)
    assert r.exit_code == 0, r.output
    return d


@pytest.fixture(scope="module")
def detected(sim, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    r = invoke("detect", "--manifest", sim / "manifest.json", "--out", out, "--seed", 0)
    assert r.exit_code == 0, r.output
    return out


def test_simulate_outputs(sim):
    rows = list(csv.DictReader(open(sim / "labels.csv")))
    assert [(r["subject"], r["binary"], r["ordinal"]) for r in rows] == [("S01", "1", "1"), ("S02", "0", "NA")]
    assert (sim / "S01_HR.csv").exists() and (sim / "S02_truth.csv").exists()


def test_simulate_bad_params(tmp_path):
    assert invoke("simulate", "--out", tmp_path, "--days", 1).exit_code == 2


def test_ingest(sim, tmp_path):
    r = invoke("ingest", "--manifest", sim / "manifest.json", "--out", tmp_path, "--subjects", "S02")
    assert r.exit_code == 0 and "S02: 2880 epochs" in r.output
    assert not (tmp_path / "subjects" / "S01").exists()


def test_detect_outputs(detected):
    report = json.loads((detected / "report.json").read_text())
    assert [s["status"] for s in report["subjects"]] == ["ok", "ok"]
    assert (detected / "features.csv").exists()


def test_features_day(detected):
    r = invoke("features", "--out", detected, "--day", 0)
    assert r.exit_code == 0
    lines = (detected / "features_day0.csv").read_text().splitlines()
    assert len(lines) == 3 and len(lines[0].split(",")) == 198


def test_diagnose(detected):
    r = invoke("diagnose", "--out", detected)
    assert r.exit_code == 0, r.output
    d = detected / "diagnostics"
    head = (d / "S01_pca.csv").read_text().splitlines()[:2]
    assert head[0] == "epoch_start,status,pc1,pc2" and "np." not in head[1]
    summary = json.loads((d / "summary.json").read_text())
    assert set(summary) == {"S01", "S02"}
    assert (d / "screening.csv").read_text().startswith("variable,mean_si,recommended")


def test_evaluate_flags(detected, sim, tmp_path):
    # two subjects are too few to score, but the command runs and writes its tables
    r = invoke("evaluate", "--features", detected / "features.csv", "--labels", sim / "labels.csv", "--day", 0, "--out", tmp_path)
    assert r.exit_code == 0, r.output
    assert (tmp_path / "binary_results.csv").exists()
    (tmp_path / "ghost.csv").write_text("subject,binary,ordinal\nS01,1,1\nGHOST,0,NA\n")
    r = invoke("evaluate", "--features", detected / "features.csv", "--labels", tmp_path / "ghost.csv", "--day", 0, "--out", tmp_path)
    assert r.exit_code == 1 and "GHOST" in r.output


def test_config_errors_exit_2(sim, tmp_path):
    (tmp_path / "bad.json").write_text(json.dumps({"median_window": 4}))
    r = invoke("detect", "--manifest", sim / "manifest.json", "--config", tmp_path / "bad.json", "--out", tmp_path / "o")
    assert r.exit_code == 2 and "median_window" in r.output
    r = invoke("detect", "--manifest", sim / "manifest.json", "--out", tmp_path / "o", "--subjects", "NOPE")
    assert r.exit_code == 2
    assert invoke("detect", "--out", tmp_path / "o").exit_code == 2
    assert invoke("features", "--out", tmp_path).exit_code == 2
    assert invoke("diagnose", "--out", tmp_path).exit_code == 2


def test_partial_failure_exit_1(sim, tmp_path):
    man = json.loads((sim / "manifest.json").read_text())
    man["subjects"][0]["signals"]["HR"]["file"] = str(tmp_path / "missing.csv")
    for s in man["subjects"]:
        for sig in s["signals"].values():
            if not sig["file"].startswith("/"):
                sig["file"] = str(sim / sig["file"])
    (tmp_path / "m.json").write_text(json.dumps(man))
    r = invoke("detect", "--manifest", tmp_path / "m.json", "--out", tmp_path / "o")
    assert r.exit_code == 1
    assert "S01: failed" in r.output and "S02: ok" in r.output


def test_fig3(tmp_path):
    r = invoke("fig3", "--out", tmp_path, "--n-seeds", 3, "--n-per-class", 30, "--mu", 3)
    assert r.exit_code == 0
    rows = list(csv.DictReader(open(tmp_path / "fig3.csv")))
    assert len(rows) == 1 and float(rows[0]["si_projection"]) > 0.9
    assert len((tmp_path / "fig3_points.csv").read_text().splitlines()) == 61
    assert invoke("fig3", "--n-seeds", 0).exit_code == 2


def test_determinism(sim, detected, tmp_path):
    r = invoke("detect", "--manifest", sim / "manifest.json", "--out", tmp_path, "--seed", 0)
    assert r.exit_code == 0
    first = sorted(p.relative_to(detected) for p in detected.rglob("*") if p.is_file() and "diagnostics" not in p.parts and not p.name.startswith("features_day"))
    second = sorted(p.relative_to(tmp_path) for p in tmp_path.rglob("*") if p.is_file())
    assert first == second
    for rel in first:
        assert (detected / rel).read_bytes() == (tmp_path / rel).read_bytes(), rel
