import json
import subprocess
import sys

import pytest

from ccbench.cli import run
from ccbench.evaluation import read_estimates_csv
from ccbench.groundtruth import GroundTruthTable


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert run(["simulate", "--n", "6", "--seed", "7", "--out", str(out)]) == 0
    return out


def _tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file()}


def test_simulate_byte_identical(tmp_path):
    for name in "ab":
        assert run(["simulate", "--n", "4", "--seed", "7", "--out", str(tmp_path / name)]) == 0
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")


def test_usage_errors(capsys, sim):
    assert run([]) == 1
    assert run(["frobnicate"]) == 1
    assert run(["estimate", "--manifest", str(sim / "manifest.json"), "--out", "x.csv",
                "--subtract-black", "--unsafe-allow-unsubtracted"]) == 1
    assert "mutually exclusive" in capsys.readouterr().err


def test_missing_file_is_data_error(tmp_path):
    assert run(["evaluate", "--estimates", str(tmp_path / "nope.csv"),
                "--gt", str(tmp_path / "nope.csv")]) == 2


def test_raw_images_refused_without_flag(sim, tmp_path, capsys):
    code = run(["estimate", "--manifest", str(sim / "manifest.json"),
                "--out", str(tmp_path / "e.csv")])
    assert code == 2
    err = capsys.readouterr().err
    assert "--subtract-black" in err and "--unsafe-allow-unsubtracted" in err


def test_taint_propagates_to_evaluation(sim, tmp_path, capsys):
    est = tmp_path / "unsafe.csv"
    assert run(["estimate", "--manifest", str(sim / "manifest.json"), "--out", str(est),
                "--unsafe-allow-unsubtracted"]) == 0
    assert "METHODOLOGY WARNING" in capsys.readouterr().err
    gt = tmp_path / "gt.csv"
    assert run(["extract-gt", "--manifest", str(sim / "manifest.json"),
                "--annotations", str(sim / "annotations.json"), "--subtract-black",
                "--out", str(gt)]) == 0
    report = tmp_path / "run.json"
    assert run(["evaluate", "--estimates", str(est), "--gt", str(gt),
                "--out", str(report)]) == 0
    assert "METHODOLOGY WARNING" in capsys.readouterr().err
    doc = json.loads(report.read_text())
    assert doc["pipeline"] == "unsubtracted"
    assert "black-level" in doc["methodology_warning"]
    assert doc["stats"]["median"] > 0.3


def test_safe_pipeline_and_parallel_jobs(sim, tmp_path):
    args = ["estimate", "--manifest", str(sim / "manifest.json"), "--subtract-black",
            "--estimator", "gray-edge:n=1,p=6,sigma=2"]
    assert run(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert run(args + ["--out", str(tmp_path / "b.csv"), "--jobs", "3"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    prov = json.loads((tmp_path / "a.csv.provenance.json").read_text())
    assert prov["pipeline"] == "subtracted"
    assert list(read_estimates_csv(tmp_path / "a.csv")) == [f"img{i:04d}" for i in range(6)]


def test_extracted_gt_matches_truth(sim, tmp_path):
    gt = tmp_path / "gt.csv"
    run(["extract-gt", "--manifest", str(sim / "manifest.json"),
         "--annotations", str(sim / "annotations.json"), "--subtract-black", "--out", str(gt)])
    report = tmp_path / "d.json"
    assert run(["diff-gt", str(gt), str(sim / "ground_truth.csv"), "--out", str(report)]) == 0
    assert json.loads(report.read_text())["max"] < 0.05


def test_mixed_ground_truth_refused(sim, tmp_path):
    gt = sim / "ground_truth.csv"
    est = tmp_path / "e.csv"
    run(["estimate", "--manifest", str(sim / "manifest.json"), "--subtract-black",
         "--out", str(est)])
    first = tmp_path / "r1.json"
    run(["evaluate", "--estimates", str(est), "--gt", str(gt), "--gt-id", "v1",
         "--out", str(first)])
    assert run(["evaluate", "--estimates", str(est), "--gt", str(gt), "--gt-id", "v2",
                "--compare", str(first)]) == 2
    assert run(["evaluate", "--estimates", str(est), "--gt", str(gt), "--gt-id", "v2",
                "--compare", str(first), "--force-mixed", "--format", "csv",
                "--out", str(tmp_path / "t.csv")]) == 0
    assert (tmp_path / "t.csv").read_text().count("\n") == 3


def _manifest_568(path):
    images = [{"image_id": str(i), "camera_id": "canon1d" if i <= 86 else "canon5d"}
              for i in range(1, 569)]
    path.write_text(json.dumps({"images": images}))


def test_folds_568(tmp_path):
    m = tmp_path / "m.json"
    _manifest_568(m)
    report = tmp_path / "audit.json"
    assert run(["folds", "--manifest", str(m), "--k", "3", "--mode", "none",
                "--out", str(tmp_path / "f.json"), "--report", str(report)]) == 0
    messages = [f["message"] for f in json.loads(report.read_text())["findings"]]
    assert "camera canon1d present only in fold 1" in messages
    folds = json.loads((tmp_path / "f.json").read_text())["folds"]
    assert folds[0] == [str(i) for i in range(1, 191)]


def test_seeded_folds_replay(tmp_path):
    m = tmp_path / "m.json"
    _manifest_568(m)
    for name in "ab":
        run(["folds", "--manifest", str(m), "--mode", "seeded", "--seed", "2024",
             "--out", str(tmp_path / f"{name}.json"), "--report", str(tmp_path / "r.json")])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_lint_exit_codes(sim, tmp_path):
    assert run(["lint", "--manifest", str(sim / "manifest.json"),
                "--out", str(tmp_path / "l.json")]) == 0
    assert run(["lint", "--manifest", str(sim / "manifest.json"), "--fail-on", "warn",
                "--out", str(tmp_path / "l.json")]) == 3
    doc = json.loads((tmp_path / "l.json").read_text())
    assert any(f["check_id"] == "black_level_presence" and f["severity"] == "warn"
               for f in doc["findings"])
    est = tmp_path / "e.csv"
    run(["estimate", "--manifest", str(sim / "manifest.json"), "--subtract-black",
         "--out", str(est)])
    gt = str(sim / "ground_truth.csv")
    assert run(["lint", "--run-a", str(est), "--run-b", str(est), "--gt-sub", gt,
                "--gt-unsub", gt, "--out", str(tmp_path / "l2.json")]) == 3
    assert run(["lint", "--run-a", str(est), "--out", "-"]) == 1


def test_lint_regions(sim, tmp_path):
    quad = {"left": [[4, 4], [20, 4], [20, 14], [4, 14]],
            "right": [[30, 4], [46, 4], [46, 14], [30, 14]]}
    regions = tmp_path / "r.json"
    regions.write_text(json.dumps({"img0000": quad}))
    code = run(["lint", str(sim / "images" / "img0000.ppm"), "--regions", str(regions),
                "--out", str(tmp_path / "l.json")])
    assert code == 0
    checks = {f["check_id"] for f in json.loads((tmp_path / "l.json").read_text())["findings"]}
    assert "uniform_illumination" in checks


def test_oracle_experiment(tmp_path):
    out = tmp_path / "o.json"
    assert run(["oracle-experiment", "--n", "6", "--seed", "3", "--black-levels", "64,512",
                "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["monotonic_nondecreasing"]
    assert all(r["right_run"]["stats"]["median"] < 1e-9 for r in doc["runs"])


def test_plot_chroma(sim, tmp_path):
    assert run(["plot-chroma", str(sim / "ground_truth.csv"), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p.svg").read_text().startswith("<svg")
    assert len((tmp_path / "p.csv").read_text().splitlines()) == 7


def test_subtract_command(sim, tmp_path):
    assert run(["subtract", "--manifest", str(sim / "manifest.json"),
                "--out-dir", str(tmp_path)]) == 0
    assert run(["lint", *map(str, sorted(tmp_path.glob("*.ppm"))), "--fail-on", "warn",
                "--out", str(tmp_path / "l.json")]) == 0


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "ccbench", "--version"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "ccbench" in r.stdout
