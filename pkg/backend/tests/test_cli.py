# Command-line surface: output files and exit codes
import json

import pytest

from app.cli import EXIT_OK, EXIT_REFUSED, main


def _run(capsys, tmp_path, *argv):
    code = main(["--out-dir", str(tmp_path), *argv])
    return code, capsys.readouterr().out


def test_rings_find(capsys, tmp_path):
    code, out = _run(capsys, tmp_path, "rings", "find", "--N", "3", "--branch", "2")
    assert code == EXIT_OK
    body = json.loads(out)
    assert body["r0"] == pytest.approx(0.178, abs=5e-4)


def test_kernel_zeros(capsys, tmp_path):
    code, out = _run(capsys, tmp_path, "kernel", "zeros", "--d-hi", "0.35")
    assert code == EXIT_OK
    assert [z["kind"] for z in json.loads(out)] == ["attractive", "repulsive", "attractive"]


def test_stability_of_one_ring(capsys, tmp_path):
    code, out = _run(capsys, tmp_path, "stability", "--N", "7", "--branch", "1")
    assert code == EXIT_OK
    assert json.loads(out)["verdict"] == "unstable"


def test_stability_needs_a_ring_size(capsys, tmp_path):
    code, _ = _run(capsys, tmp_path, "stability")
    assert code == EXIT_REFUSED


def test_stability_table(capsys, tmp_path):
    code, out = _run(capsys, tmp_path, "stability", "table", "--which", "1")
    assert code == EXIT_OK
    assert "unstable" in out
    assert (tmp_path / "table1.csv").exists()


def test_reproduce_stationary_table(capsys, tmp_path):
    code, out = _run(capsys, tmp_path, "--threads", "2", "reproduce", "table", "--which", "1")
    assert code == EXIT_OK
    assert "mismatch" not in out


def test_reproduce_radius_vs_n(capsys, tmp_path):
    code, _ = _run(capsys, tmp_path, "reproduce", "radius-vs-n", "--n-max", "8")
    assert code == EXIT_OK
    assert (tmp_path / "radius_vs_N.csv").exists()


def test_refused_inputs(capsys, tmp_path):
    # traveling rings need tau above tau_c
    code, _ = _run(capsys, tmp_path, "rings", "find", "--N", "3", "--kind", "traveling", "--tau", "0.1")
    assert code == EXIT_REFUSED
    # N below two fails request validation
    code, _ = _run(capsys, tmp_path, "rings", "find", "--N", "1")
    assert code == EXIT_REFUSED


def test_odesim_writes_a_trajectory(capsys, tmp_path):
    code, out = _run(capsys, tmp_path, "--seed", "3", "odesim", "run", "--N", "3", "--t-end", "20",
                     "--n-samples", "101")
    assert code == EXIT_OK
    body = json.loads(out)
    assert body["termination"] == "completed"
    assert body["trajectory_path"].startswith(str(tmp_path))
