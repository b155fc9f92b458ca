import csv
import io
import json
import os
import shutil
import subprocess

import pytest

CLI = os.environ.get("SEGBENCH_CLI") or shutil.which("segbench")
pytestmark = pytest.mark.skipif(CLI is None, reason="segbench executable not found")


def run(*args, check=True):
    proc = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True)
    if check:
        assert proc.returncode == 0, proc.stderr
    return proc


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture(scope="module")
def cohort(tmp_path_factory):
    out = tmp_path_factory.mktemp("cohort")
    run("synth", "--out-dir", out, "--count", 4, "--dims", 64, 64, 32, "--seed", 11, "--jobs", 2)
    return out


def test_missing_subcommand_is_usage_error():
    assert run(check=False).returncode == 1
    assert run("evaluate", check=False).returncode == 1


def test_synth_writes_pairs_and_manifest(cohort):
    manifest = rows((cohort / "manifest.csv").read_text())
    assert [r["id"] for r in manifest] == ["case_001", "case_002", "case_003", "case_004"]
    for r in manifest:
        assert (cohort / f"{r['id']}.nrrd").exists()
        assert (cohort / f"{r['id']}_label.nrrd").exists()


def test_quality_reports_each_scan(cohort):
    out = rows(run("quality", "--dir", cohort).stdout)
    assert len(out) == 4
    assert all(r["band"] in ("high", "medium", "low") for r in out)


def test_evaluate_perfect_predictions(cohort, tmp_path):
    pred = tmp_path / "pred"
    pred.mkdir()
    for i in range(1, 5):
        shutil.copy(cohort / f"case_00{i}_label.nrrd", pred / f"case_00{i}.nrrd")
    out = rows(run("evaluate", "--pred", pred, "--truth", cohort).stdout)
    assert len(out) == 4
    assert all(float(r["dice"]) == 1.0 for r in out)
    doc = json.loads(run("evaluate", "--pred", pred, "--truth", cohort, "--format", "json").stdout)
    assert doc


def test_evaluate_missing_prediction_is_partial_failure(cohort, tmp_path):
    pred = tmp_path / "pred"
    pred.mkdir()
    shutil.copy(cohort / "case_001_label.nrrd", pred / "case_001.nrrd")
    proc = run("evaluate", "--pred", pred, "--truth", cohort, check=False)
    assert proc.returncode == 2
    assert len(rows(proc.stdout)) == 1


def test_pipeline_and_postprocess(cohort, tmp_path):
    out = tmp_path / "seg.nrrd"
    proc = run("pipeline", "--volume", cohort / "case_001.nrrd", "--truth", cohort / "case_001_label.nrrd",
               "--localizer", "oracle", "--segmenter", "oracle", "--roi", 48, 48, 32, "--out", out)
    assert out.exists()
    assert proc.stdout
    cleaned = tmp_path / "clean.nrrd"
    run("postprocess", "--in", out, "--out", cleaned, "--ops", "largest:26,close:cross:1")
    assert cleaned.exists()


def test_rank_from_case_metrics(cohort, tmp_path):
    pred = tmp_path / "pred"
    pred.mkdir()
    for i in range(1, 5):
        shutil.copy(cohort / f"case_00{i}_label.nrrd", pred / f"case_00{i}.nrrd")
    good = tmp_path / "good.csv"
    good.write_text(run("evaluate", "--pred", pred, "--truth", cohort).stdout)
    worse = tmp_path / "worse.csv"
    lines = good.read_text().splitlines()
    header = lines[0].split(",")
    dice_col = header.index("dice")
    edited = [lines[0]]
    for k, line in enumerate(lines[1:]):
        cells = line.split(",")
        cells[dice_col] = str(0.8 + 0.01 * k)
        edited.append(",".join(cells))
    worse.write_text("\n".join(edited) + "\n")
    board = tmp_path / "board.csv"
    run("rank", "--metrics", f"alpha={worse}", f"beta={good}", "--out-csv", board)
    ranked = rows(board.read_text())
    assert [r["team"] for r in ranked][:2] == ["beta", "alpha"]


def test_experiments(cohort):
    truth = cohort / "case_001_label.nrrd"
    offset = rows(run("experiment", "offset", "--truth", truth, "--roi", 48, 48, 32,
                      "--offsets", 0, 50, 100).stdout)
    assert len(offset) == 3
    sizes = rows(run("experiment", "patch-size", "--truth", truth, "--sizes", "64x64", "48x48",
                     "--z-extent", 32).stdout)
    assert len(sizes) == 2
