import json
import subprocess
import sys

import pytest

from cflab.cli import main


def run(tmp_path, *argv):
    out = tmp_path / "out"
    code = main([*argv, "--out", str(out), "--threads", "2"])
    return code, out


def test_simulate_writes_csv_svg_manifest(tmp_path):
    code, out = run(tmp_path, "simulate", "--scenario", "sin2d", "--x0", "0.3,0.26", "--t", "40")
    assert code == 0
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,x_0,x_1,r"
    assert len(lines) == 402
    assert (out / "phase.svg").read_text().startswith("<svg")
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "simulate"
    assert [a["path"] for a in man["artifacts"]] == ["trajectory.csv", "phase.svg", "winding.svg"]
    assert len(man["config_sha256"]) == 64


def test_simulate_is_byte_identical(tmp_path):
    a = main(["simulate", "--scenario", "cotangent_attractor", "--out", str(tmp_path / "a")])
    b = main(["simulate", "--scenario", "cotangent_attractor", "--out", str(tmp_path / "b")])
    assert a == b == 0
    for name in ("trajectory.csv", "manifest.json", "phase.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_closed_form_scenario(tmp_path):
    code, out = run(tmp_path, "simulate", "--scenario", "sphere_legendrian", "--t", "5", "--samples", "11")
    assert code == 0
    assert len((out / "trajectory.csv").read_text().splitlines()) == 12


def test_classify(tmp_path):
    code, out = run(tmp_path, "classify", "--scenario", "sin2d", "--n", "10", "--seed", "4")
    assert code == 0
    doc = json.loads((out / "classification.json").read_text())
    assert doc["forward_labels"] == {"DissipativePlus": 10}
    assert doc["agreement"] == 1.0


def test_basin(tmp_path):
    code, out = run(tmp_path, "basin", "--scenario", "sin2d", "--grid", "8")
    assert code == 0
    assert len((out / "basin.csv").read_text().splitlines()) == 65
    doc = json.loads((out / "basin.json").read_text())
    assert doc["labels"] == {"Undetermined": 8, "circle_y_half": 56}
    assert "circle_y_half" in (out / "basin.svg").read_text()


def test_lyapunov_default_orbit(tmp_path):
    code, out = run(tmp_path, "lyapunov", "--scenario", "sin2d", "--t", "50")
    assert code == 0
    doc = json.loads((out / "lyapunov.json").read_text())
    assert doc["x0"] == [0.0, 0.5]
    assert doc["exponents"][0] == pytest.approx(-6.283185, abs=1e-2)


def test_leaf_recurrence_cycle(tmp_path):
    assert main(["leaf", "--scenario", "sin2d", "--x0", "0.1,0.2", "--out", str(tmp_path / "l")]) == 0
    assert json.loads((tmp_path / "l" / "leaf.json").read_text())["leaves"][0]["residual"] < 1e-8
    assert main(["recurrence", "--scenario", "lee2d", "--n", "5", "--t", "200", "--out", str(tmp_path / "r")]) == 0
    assert json.loads((tmp_path / "r" / "recurrence.json").read_text())["fraction"] == 1.0
    assert main(["cycle", "--scenario", "lee2d", "--t", "100", "--out", str(tmp_path / "c")]) == 0
    cyc = json.loads((tmp_path / "c" / "cycle.json").read_text())["cycle"]
    assert cyc == pytest.approx([-2 ** 0.5, 1.0], abs=1e-9)


def test_scenario_list(capsys):
    assert main(["scenario-list"]) == 0
    text = capsys.readouterr().out
    assert "cotangent_attractor" in text and "kappa (real, default 0.1)" in text


def test_verify_single_and_failure(tmp_path, capsys):
    code, out = run(tmp_path, "verify", "--scenario", "lee_twisted")
    assert code == 0
    assert json.loads((out / "verify.json").read_text())["passed"] is True
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"name": "lee_twisted", "expected": [
        {"check": "periodic_orbit_count", "target": 5, "tol": 0}]}))
    code, out = run(tmp_path, "verify", "--config", str(cfg))
    assert code == 1
    assert "FAIL lee_twisted periodic_orbit_count" in capsys.readouterr().out


@pytest.mark.parametrize("argv,needle", [
    (["simulate", "--scenario", "nosuch"], "name"),
    (["simulate", "--scenario", "lee2d", "--param", "c=1"], "params.c"),
    (["simulate", "--scenario", "lee2d", "--param", "a"], "KEY=VALUE"),
    (["simulate", "--scenario", "sin2d", "--x0", "0.1"], "--x0"),
    (["simulate"], "scenario"),
    (["basin", "--scenario", "lee_twisted"], "closed-form"),
    (["leaf", "--scenario", "cotangent_attractor"], "surfaces"),
    (["recurrence", "--scenario", "lee2d", "--eps", "0"], "--eps"),
    (["simulate", "--config", "/nonexistent.json"], "config"),
])
def test_config_errors_exit_2(tmp_path, capsys, argv, needle):
    assert main([*argv, "--out", str(tmp_path / "o")]) == 2
    assert needle in capsys.readouterr().err


def test_bad_config_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"name": "sin2d", "integrator": {"rtoll": 1}}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "integrator.rtoll" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cflab.cli", "scenario-list"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "sin2d" in proc.stdout
