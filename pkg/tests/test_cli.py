import subprocess
import sys

import numpy as np
import pytest

from nsac.cli import EXIT_ACCEPTANCE, EXIT_BLOWUP, EXIT_OK, EXIT_USAGE, main
from nsac.diagnostics import LEDGER_COLUMNS, read_ledger_csv
from nsac.drivers import ROUNDOFF
from nsac.grid import read_snapshot

BASE = """\
[grid]
length = 1.0
n_cells = {n}
bc = {bc}
coords = {coords}

[params]
nu = 0.1
eps = 0.05
theta = 0.9
rho_ref = 0.1

[step]
t_end = {t_end}

[scenario]
{scenario}

[output]
directory = {out}
ledger_interval = 0.01
snapshot_times = 0, {t_end}
"""
SINE = "kind = sine\nrho_mean = 0.5\namplitude = 0.1\nchi_mean = 0.0\nchi_amplitude = 0.5"


def write_config(tmp_path, name="run.cfg", n=64, bc="periodic", coords="euler", t_end=0.05, scenario=SINE):
    path = tmp_path / name
    path.write_text(BASE.format(n=n, bc=bc, coords=coords, t_end=t_end, scenario=scenario, out=tmp_path / "out"))
    return path


@pytest.fixture(autouse=True)
def _no_env(monkeypatch):
    monkeypatch.delenv("NSAC_OUT", raising=False)


def test_run_writes_ledger_and_snapshots(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["run", str(cfg), "--plot"]) == EXIT_OK
    out = tmp_path / "out"
    header = (out / "ledger.csv").read_text().splitlines()[0]
    assert header == ",".join(LEDGER_COLUMNS)
    rows = read_ledger_csv(out / "ledger.csv")
    assert rows[-1].time == pytest.approx(0.05)
    snap = out / "snapshot_t0.050000.csv"
    assert snap.read_text().startswith("x,rho,u,chi\n")
    x, state = read_snapshot(snap)
    assert len(x) == 64
    assert (out / "plot.gp").exists()
    assert "ok" in capsys.readouterr().out


def test_run_lagrange_uses_mass_coordinate(tmp_path):
    cfg = write_config(tmp_path, coords="lagrange")
    assert main(["run", str(cfg)]) == EXIT_OK
    assert (tmp_path / "out" / "final.csv").read_text().startswith("y,rho,u,chi\n")


def test_run_deterministic(tmp_path):
    scenario = "kind = random\nrho_mean = 1.0\namplitude = 0.1\nseed = 5\nchi_mean = 0.5"
    cfg = write_config(tmp_path, scenario=scenario)
    main(["run", str(cfg)])
    first = (tmp_path / "out" / "ledger.csv").read_bytes()
    main(["run", str(cfg)])
    assert (tmp_path / "out" / "ledger.csv").read_bytes() == first


def test_env_overrides_directory(tmp_path, monkeypatch):
    cfg = write_config(tmp_path)
    monkeypatch.setenv("NSAC_OUT", str(tmp_path / "env"))
    assert main(["run", str(cfg)]) == EXIT_OK
    assert (tmp_path / "env" / "ledger.csv").exists()


def test_config_error_exit(tmp_path, capsys):
    cfg = write_config(tmp_path)
    cfg.write_text(cfg.read_text().replace("theta = 0.9", "theta = -1"))
    assert main(["run", str(cfg)]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "theta" in err and "line 10" in err


def test_usage_error_exit():
    with pytest.raises(SystemExit) as exc:
        main(["run"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == EXIT_USAGE


def test_blow_up_exit(tmp_path, capsys):
    scenario = "kind = tanh\nrho_left = 0.05\nrho_right = 2.95\nwidth = 0.001"
    cfg = write_config(tmp_path, n=16, t_end=1.0, scenario=scenario)
    cfg.write_text(cfg.read_text().replace("t_end = 1.0", "t_end = 1.0\ndt = 0.5\ncfl = 0.9\npicard_max = 2"))
    assert main(["run", str(cfg)]) == EXIT_BLOWUP
    assert (tmp_path / "out" / "ledger.csv").exists()
    assert "BLOW-UP" in capsys.readouterr().out


def test_convergence_steady_is_exact(tmp_path, capsys):
    scenario = "kind = uniform\nrho = 0.1\nchi = 1.0"
    cfg = write_config(tmp_path, n=16, t_end=0.05, scenario=scenario)
    assert main(["convergence", str(cfg), "--levels", "2"]) == EXIT_OK
    table = capsys.readouterr().out
    assert table.count("exact") == 3
    data = np.genfromtxt(tmp_path / "out" / "convergence.csv", delimiter=",", names=True)
    # rho = 0.1 everywhere, so the roundoff floor is ROUNDOFF * 1
    assert np.all(data["diff_rho"][:2] <= ROUNDOFF)


def test_convergence_sine_first_order(tmp_path, capsys):
    scenario = "kind = sine\nrho_mean = 1.0\namplitude = 0.1"
    cfg = write_config(tmp_path, n=32, t_end=0.1, scenario=scenario)
    assert main(["convergence", str(cfg), "--levels", "3"]) == EXIT_OK
    data = np.genfromtxt(tmp_path / "out" / "convergence.csv", delimiter=",", names=True)
    for f in ("rho", "u"):
        orders = data[f"order_{f}"][:2]
        assert np.all(orders > 0.9)


def test_sweep_isolated_points(tmp_path):
    scenario = "kind = random\nrho_mean = 1.0\namplitude = 0.1\nseed = 1\nchi_mean = 0.5"
    cfg = write_config(tmp_path, n=32, t_end=0.02, scenario=scenario)
    assert main(["sweep", str(cfg), "--axis", "seed=1,2", "--workers", "2"]) == EXIT_OK
    swept = (tmp_path / "out" / "seed=1" / "ledger.csv").read_bytes()
    assert (tmp_path / "out" / "seed=2" / "ledger.csv").exists()
    assert main(["run", str(cfg)]) == EXIT_OK
    assert (tmp_path / "out" / "ledger.csv").read_bytes() == swept


def test_sweep_bad_axis(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["sweep", str(cfg), "--axis", "theta=0.9,-1"]) == EXIT_USAGE
    assert main(["sweep", str(cfg), "--axis", "theta"]) == EXIT_USAGE


def test_check_failure_exit(monkeypatch):
    from nsac import acceptance

    failing = acceptance.Criterion(0, "stub", False, "forced")
    monkeypatch.setattr(acceptance, "run_all", lambda backend=None, report=None: [failing])
    assert main(["check"]) == EXIT_ACCEPTANCE


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nsac.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "convergence" in proc.stdout
