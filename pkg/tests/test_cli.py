import json
import subprocess
import sys

import numpy as np
import pytest

from nst.bench import ExperimentSpec
from nst.cli import main
from nst.linalg import save_matrix
from nst.probgen import ProblemSpec, generate


@pytest.fixture
def example_matrix(tmp_path):
    path = tmp_path / "a.txt"
    save_matrix(path, [[1.0, 0.0, 1 / np.sqrt(2)], [0.0, 1.0, 1 / np.sqrt(2)]])
    return path


def test_analyze(example_matrix, capsys):
    assert main(["analyze", "--matrix", str(example_matrix), "-s", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["rip"]["delta_s"] == pytest.approx(0.70711, abs=1e-5)
    assert "certificate" not in out


def test_analyze_parseval(tmp_path, capsys):
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((12, 6)))
    path = tmp_path / "p.nstm"
    save_matrix(path, q.T)
    out_file = tmp_path / "report.json"
    assert main(["analyze", "--matrix", str(path), "-s", "2", "--out", str(out_file)]) == 0
    rip = json.loads(out_file.read_text())["rip"]
    assert rip["gamma_s"] == pytest.approx(rip["delta_s"], abs=1e-12)
    assert json.loads(capsys.readouterr().out)["certificate"]["s"] == 2


def test_analyze_blowup_leaves_no_file(tmp_path):
    path = tmp_path / "big.txt"
    save_matrix(path, np.random.default_rng(1).standard_normal((20, 40)))
    out_file = tmp_path / "report.json"
    assert main(["analyze", "--matrix", str(path), "-s", "10", "--out", str(out_file)]) == 2
    assert not out_file.exists()


def test_analyze_sampled(tmp_path, capsys):
    path = tmp_path / "big.txt"
    save_matrix(path, np.random.default_rng(1).standard_normal((20, 40)))
    args = ["analyze", "--matrix", str(path), "-s", "10", "--mode", "sample", "--samples", "200"]
    assert main(args) == 0
    assert json.loads(capsys.readouterr().out)["rip"]["method"] == "random_sample(200)"


def test_usage_and_io_errors(tmp_path, example_matrix):
    assert main([]) == 1
    assert main(["analyze", "--matrix", str(example_matrix)]) == 1
    assert main(["bogus"]) == 1
    assert main(["analyze", "--matrix", str(tmp_path / "missing.txt"), "-s", "1"]) == 3
    assert main(["phase", "--config", str(tmp_path / "missing.json")]) == 3


def test_solve(tmp_path, capsys):
    p = generate(ProblemSpec(40, 80, 5, seed=3))
    save_matrix(tmp_path / "a.nstm", p.a)
    np.savetxt(tmp_path / "b.txt", p.b)
    out = tmp_path / "u.txt"
    args = ["solve", "--matrix", str(tmp_path / "a.nstm"), "--rhs", str(tmp_path / "b.txt"), "-s", "5",
            "--out", str(out)]
    assert main(args) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["termination"] == "ResidualMet"
    assert info["support"] == np.flatnonzero(p.x_true).tolist()
    np.testing.assert_allclose(np.loadtxt(out), p.x_true, atol=1e-5)


def test_experiment_from_config(tmp_path):
    spec = ExperimentSpec("phase", ProblemSpec(32, 64, 4), ["nst_ht", "iht"], {"s": [4]}, trials=3)
    cfg = tmp_path / "spec.json"
    cfg.write_text(spec.to_json())
    out = tmp_path / "run"
    assert main(["phase", "--config", str(cfg), "--out", str(out), "--seed", "9", "--trials", "2"]) == 0
    lines = (out / "trials.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2
    assert main(["noise", "--config", str(cfg)]) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nst", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "analyze" in proc.stdout
