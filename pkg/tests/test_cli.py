import json
import math
import subprocess
import sys

import pytest

from rieszlab.cli import RunConfig, dump_json, main, parse_surface, run
from rieszlab.geometry import TriMesh


def _run_cli(args, tmp_path=None):
    proc = subprocess.run([sys.executable, "-m", "rieszlab", *args],
                          capture_output=True, text=True)
    return proc


def test_beta_command():
    proc = _run_cli(["beta", "--surface", "circle", "--z", "1"])
    assert proc.returncode == 0
    data = json.loads(proc.stdout)
    assert data["value"] == pytest.approx(16 * math.pi, rel=1e-12)


def test_model_orthogonal_command():
    proc = _run_cli(["model", "orthogonal", "--alpha", "-3", "--rho", "1"])
    assert proc.returncode == 0
    data = json.loads(proc.stdout)
    assert data["result"]["value"] == pytest.approx(23.1259, rel=1e-4)


def test_energy_command_circle():
    proc = _run_cli(["energy", "--surface", "circle:r=1", "--alpha", "1"])
    assert proc.returncode == 0
    data = json.loads(proc.stdout)
    assert data["report"]["value"] == pytest.approx(16 * math.pi, rel=1e-6)


def test_energy_command_sphere_regularized():
    proc = _run_cli(["energy", "--surface", "sphere:r=1", "--alpha", "-4",
                     "--outer-scale", "0.12", "--inner-scale", "0.5"])
    assert proc.returncode == 0
    data = json.loads(proc.stdout)
    assert data["report"]["value"] == pytest.approx(-math.pi ** 2, rel=0.01)


def test_unknown_surface_exits_2():
    proc = _run_cli(["energy", "--surface", "klein-bottle", "--alpha", "1"])
    assert proc.returncode == 2
    err = json.loads(proc.stderr)
    assert err["error"] == "ConfigError"


def test_unsupported_input_exits_4():
    cfg = RunConfig(command="flow", surface="sphere:r=1", energy="ks")
    assert run(cfg) == 4


def test_missing_command_exits_2():
    assert main([]) == 2


def test_determinism_byte_identical(tmp_path):
    out1 = tmp_path / "a.json"
    out2 = tmp_path / "b.json"
    args = ["sweep", "--m", "2", "--alpha", "-5", "--gaps", "0.1,0.05,0.025",
            "--seed", "7"]
    p1 = _run_cli(args + ["-o", str(out1), "--csv", str(tmp_path / "a.csv")])
    p2 = _run_cli(args + ["-o", str(out2), "--csv", str(tmp_path / "b.csv")])
    assert p1.returncode == 0 and p2.returncode == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_sweep_csv_and_data(tmp_path):
    csv_path = tmp_path / "sweep.csv"
    dat_path = tmp_path / "sweep.dat"
    proc = _run_cli(["sweep", "--m", "2", "--alpha", "-5",
                     "--gaps", "0.1,0.05,0.025",
                     "--csv", str(csv_path), "--data", str(dat_path)])
    assert proc.returncode == 0
    rows = csv_path.read_text().strip().splitlines()
    assert rows[0] == "alpha,delta,energy,lambda_bound_sum"
    assert len(rows) == 4
    dat = dat_path.read_text().strip().splitlines()
    assert len(dat) == 3 and len(dat[0].split()) == 2


def test_flow_command(tmp_path):
    traj = tmp_path / "traj.csv"
    mesh_out = tmp_path / "final.off"
    proc = _run_cli(["flow", "--surface", "icosphere:subdiv=1", "--energy",
                     "ks", "--steps", "3", "--trajectory", str(traj),
                     "--mesh-out", str(mesh_out)])
    assert proc.returncode == 0
    data = json.loads(proc.stdout)
    assert data["energy_final"] <= data["energy_initial"]
    assert traj.exists() and mesh_out.exists()


def test_validate_command():
    proc = _run_cli(["validate", "--surface", "sphere:r=1", "--k", "3",
                     "--eps0", "0.1", "--b", "10", "--V", "20"])
    assert proc.returncode == 0
    data = json.loads(proc.stdout)
    assert data["report"]["passed"] is True
    proc2 = _run_cli(["validate", "--surface", "sphere:r=1", "--k", "3",
                      "--eps0", "0.1", "--b", "10", "--V", "1"])
    data2 = json.loads(proc2.stdout)
    assert data2["report"]["passed"] is False
    assert data2["report"]["volume"] == pytest.approx(4 * math.pi, rel=1e-6)


def test_config_file_merging(tmp_path):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps({"surface": "circle", "z": 1.0}))
    proc = _run_cli(["--config", str(cfg_path), "beta", "--surface", "circle",
                     "--z", "-2"])
    # flags override the file
    data = json.loads(proc.stdout)
    assert data["z"] == -2.0
    assert data["value"] == pytest.approx(0.0, abs=1e-12)


def test_mesh_roundtrip_energy(tmp_path):
    from rieszlab.geometry import icosphere, write_off
    from rieszlab.flow import ks_flow_energy
    mesh = icosphere(1)
    path = tmp_path / "ico.off"
    write_off(mesh, path)
    back = parse_surface(str(path))
    assert isinstance(back, TriMesh)
    assert ks_flow_energy(back) == pytest.approx(ks_flow_energy(mesh),
                                                 abs=1e-12)


def test_dump_json_17_digits():
    text = dump_json({"x": 1.0 / 3.0})
    assert "0.33333333333333331" in text
    assert json.loads(text)["x"] == 1.0 / 3.0
