import json
import subprocess
import sys

import pytest

from eigconc.cli import main
from eigconc.linalg import read_matrix_text


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_sample_to_stdout_and_file(tmp_path, capsys):
    code, out, _ = run(["sample", "--preset", "rademacher", "--n", "3", "--seed", "4"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "3" and len(" ".join(lines[1:]).split()) == 6
    code, out, _ = run(["sample", "--preset", "rademacher", "--n", "3", "--seed", "4",
                        "--out", str(tmp_path)], capsys)
    assert code == 0
    assert read_matrix_text(tmp_path / "matrix_0.txt").n == 3


def test_seed_flag_beats_config(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("preset = rademacher\nn = 6\nseed = 1\n")
    _, from_cfg, _ = run(["sample", "--config", str(cfg)], capsys)
    _, seed1, _ = run(["sample", "--preset", "rademacher", "--n", "6", "--seed", "1"], capsys)
    _, flagged, _ = run(["sample", "--config", str(cfg), "--seed", "2"], capsys)
    _, seed2, _ = run(["sample", "--preset", "rademacher", "--n", "6", "--seed", "2"], capsys)
    assert from_cfg == seed1 and flagged == seed2 and seed1 != seed2


def test_spectrum(tmp_path, capsys):
    code, out, _ = run(["spectrum", "--preset", "bernoulli", "--p", "1", "--n", "4"], capsys)
    assert code == 0
    assert json.loads(out)["lambda1"] == pytest.approx(3.0)
    mat = tmp_path / "m.txt"
    mat.write_text("2\n0 1\n0\n")
    code, out, _ = run(["spectrum", "--matrix", str(mat)], capsys)
    assert json.loads(out)["delta_n"] == pytest.approx(-1.0)


def test_concentrate_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    code, _, _ = run(["concentrate", "--preset", "bernoulli", "--p", "0.5", "--n", "30",
                      "--trials", "25", "--out", str(out), "--plots",
                      "--t-grid", "0,0.25,0.5,1"], capsys)
    assert code == 0
    for name in ("trials.csv", "report.json", "manifest.txt", "lambda1_tail.svg",
                 "lambda1_histogram.svg", "lambda1_tail.svg.json"):
        assert (out / name).is_file(), name
    report = json.loads((out / "report.json").read_text())
    assert report["trials"] == 25
    tail = (out / "lambda1_tail.svg").read_bytes()
    (out / "lambda1_tail.svg").unlink()
    code, _, _ = run(["report", "--out", str(out)], capsys)
    assert code == 0 and (out / "lambda1_tail.svg").read_bytes() == tail


def test_report_from_json_only(tmp_path, capsys):
    out = tmp_path / "run"
    run(["concentrate", "--preset", "bernoulli", "--p", "0.5", "--n", "20", "--trials", "20",
         "--out", str(out)], capsys)
    code, _, _ = run(["report", "--out", str(out)], capsys)
    assert code == 0 and (out / "lambda1_tail.svg").is_file()
    code, _, _ = run(["report", "--out", str(tmp_path)], capsys)
    assert code == 2


def test_semicircle(tmp_path, capsys):
    code, out, _ = run(["semicircle", "--preset", "rademacher", "--n", "300", "--plots",
                        "--out", str(tmp_path)], capsys)
    assert code == 0 and json.loads(out)["ks"] < 0.1
    assert (tmp_path / "semicircle.svg").is_file()
    code, _, _ = run(["semicircle", "--preset", "rademacher", "--n", "300", "--max-ks", "1e-6"],
                     capsys)
    assert code == 2


def test_talagrand_verify(capsys):
    code, out, _ = run(["talagrand-verify", "--all-subsets"], capsys)
    res = json.loads(out)
    assert code == 0 and res["events"] == 255 and res["holds"]
    assert res["max_grid_gap"] <= 1e-6
    code, out, _ = run(["talagrand-verify", "--sizes", "2,3", "--measures", "0.5,0.5;0.2,0.3,0.5",
                        "--where", "1=2"], capsys)
    assert code == 0
    code, out, _ = run(["talagrand-verify", "--sizes", "2,2,2,2", "--event", "0,0,0,0;1,1,1,1",
                        "--t-grid", "0,1,2"], capsys)
    assert code == 0 and json.loads(out)["events"] == 1


def test_lemmas_verify(capsys):
    code, out, _ = run(["lemmas-verify", "--preset", "bernoulli", "--p", "0.5", "--n", "30",
                        "--trials", "10"], capsys)
    res = json.loads(out)
    assert code == 0
    assert res["counts"]["lemma44"]["fail"] == 0


@pytest.mark.parametrize("argv", [
    ["concentrate", "--bogus"],
    ["nope"],
    [],
    ["concentrate", "--preset", "bernoulli", "--p", "1.5", "--n", "10"],
    ["concentrate", "--preset", "bernoulli", "--p", "0.5"],
    ["talagrand-verify"],
    ["talagrand-verify", "--sizes", "2,2,2,2,2", "--all-subsets"],
    ["sample", "--config", "/definitely/missing.cfg"],
])
def test_usage_errors_exit_1(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1
    assert err


def test_runtime_failure_exit_2(tmp_path, capsys):
    code, _, _ = run(["spectrum", "--matrix", str(tmp_path / "missing.txt")], capsys)
    assert code == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("3\n1 2\n")
    code, _, _ = run(["spectrum", "--matrix", str(bad)], capsys)
    assert code == 2


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "eigconc.cli", "spectrum", "--preset",
                           "rademacher", "--n", "5"], capture_output=True, text=True)
    assert proc.returncode == 0 and "lambda1" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "eigconc.cli", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0
