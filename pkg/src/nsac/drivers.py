"""Run orchestration shared by the command line and the acceptance suite.

``execute`` turns a :class:`~nsac.config.SimConfig` into files on disk,
``convergence_study`` runs a refinement ladder and ``sweep`` fans a parameter
axis out over worker processes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from nsac.config import SECTIONS, ConfigError, SimConfig, parse_config
from nsac.diagnostics import assert_theorem_bounds, energy_budget, write_ledger_csv
from nsac.grid import FieldState, Grid, make_initial, write_snapshot
from nsac.solver_euler import BlowUpError, Trajectory, advance_fixed, run, stable_dt
from nsac.solver_lagrange import run_lagrange

FIELDS = ("rho", "u", "chi")
#: Level differences below this multiple of the field size count as zero.
ROUNDOFF = 1e-12


# -- single runs ----------------------------------------------------------------


@dataclass
class RunResult:
    directory: Path
    ledger_path: Path
    snapshot_paths: list[Path]
    n_steps: int
    final_time: float
    budget: float
    bounds_ok: bool
    mass_drift: float
    blew_up: bool = False
    message: str = ""


def _snapshot_name(t: float) -> str:
    return f"snapshot_t{t:.6f}.csv"


def write_trajectory(traj: Trajectory, directory: Path, extended: bool = False) -> tuple[Path, list[Path]]:
    """Write ``ledger.csv`` and one CSV per snapshot (plus ``final.csv``)."""
    directory.mkdir(parents=True, exist_ok=True)
    ledger_path = directory / "ledger.csv"
    write_ledger_csv(ledger_path, traj.rows, extended=extended)
    paths = []
    if traj.coords == "lagrange":
        mass = traj.rows[0].mass

        def coords_of(s):
            n = len(s.rho)
            return (np.arange(n) + 0.5) * mass / n, "y"

        final = traj.final
        final_state = FieldState(1.0 / final.v, final.u, final.chi, final.time)
    else:
        def coords_of(s):
            return traj.grid.x, "x"

        final_state = traj.final
    for snap in traj.snapshots:
        coords, name = coords_of(snap)
        path = directory / _snapshot_name(snap.time)
        write_snapshot(path, snap, coords, coord_name=name)
        paths.append(path)
    coords, name = coords_of(final_state)
    write_snapshot(directory / "final.csv", final_state, coords, coord_name=name)
    return ledger_path, paths


def write_gnuplot(directory: Path, snapshot_paths: Sequence[Path], coord_name: str = "x") -> Path:
    """Emit ``plot.gp`` drawing the energy ledger and the density/phase snapshots."""
    lines = [
        "# gnuplot -p plot.gp",
        'set datafile separator ","',
        "set key autotitle columnhead",
        "set multiplot layout 3,1",
        'set xlabel "t"',
        'plot "ledger.csv" using 1:7 with lines title "energy", '
        '"" using 1:8 with lines title "dissipation rate"',
        f'set xlabel "{coord_name}"',
    ]
    names = [p.name for p in snapshot_paths] or ["final.csv"]
    rho = ", ".join(f'"{n}" using 1:2 with lines title "{n}"' for n in names)
    chi = ", ".join(f'"{n}" using 1:4 with lines title "{n}"' for n in names)
    lines += [f"plot {rho}", f"plot {chi}", "unset multiplot", ""]
    path = directory / "plot.gp"
    path.write_text("\n".join(lines))
    return path


def execute(config: SimConfig, directory: Path | None = None, backend: str | None = None) -> RunResult:
    """Run ``config`` and write its artifacts.

    On blow-up the partial ledger is still written and the result is marked
    ``blew_up``; the caller decides on the exit status.
    """
    directory = Path(directory or config.output.directory)
    runner = run_lagrange if config.coords == "lagrange" else run
    blew_up, message = False, ""
    try:
        traj = runner(config, backend=backend)
    except BlowUpError as err:
        if err.trajectory is None:
            raise
        traj, blew_up, message = err.trajectory, True, str(err)
    ledger_path, snaps = write_trajectory(traj, directory, config.output.extended)
    if config.output.plot:
        write_gnuplot(directory, snaps, "y" if config.coords == "lagrange" else "x")
    bounds = assert_theorem_bounds(traj.rows)
    return RunResult(
        directory=directory,
        ledger_path=ledger_path,
        snapshot_paths=snaps,
        n_steps=traj.n_steps,
        final_time=traj.rows[-1].time,
        budget=energy_budget(traj.rows).max_relative,
        bounds_ok=bounds.passed,
        mass_drift=bounds.mass_drift,
        blew_up=blew_up,
        message=message,
    )


# -- refinement study -------------------------------------------------------------


def restrict(fine: np.ndarray, grid_fine: Grid) -> np.ndarray:
    """Fine-grid field on the next coarser grid.

    Periodic cells are averaged in pairs (the coarse cell is the union of two
    fine cells); mixed-grid nodes are injected.
    """
    if grid_fine.periodic:
        return 0.5 * (fine[0::2] + fine[1::2])
    return fine[0::2].copy()


@dataclass
class ConvergenceTable:
    n_cells: list[int]
    dt: list[float]
    differences: dict[str, list[float]]
    scales: dict[str, float]

    def _negligible(self, name: str, d: float) -> bool:
        return d <= ROUNDOFF * max(1.0, self.scales[name])

    def order(self, name: str, k: int) -> float:
        """Observed order between differences ``k`` and ``k + 1``.

        ``inf`` when the finer difference is at roundoff level, which covers
        an exactly resolved field.
        """
        coarse, fine = self.differences[name][k], self.differences[name][k + 1]
        if self._negligible(name, fine):
            return math.inf
        if self._negligible(name, coarse):
            return -math.inf
        return math.log2(coarse / fine)

    def order_label(self, name: str, k: int) -> str:
        d = self.differences[name]
        if self._negligible(name, d[k]) and self._negligible(name, d[k + 1]):
            return "exact"
        return f"{self.order(name, k):.3f}"

    def orders(self, name: str) -> list[float]:
        return [self.order(name, k) for k in range(len(self.differences[name]) - 1)]

    def is_exact(self, name: str) -> bool:
        return all(self._negligible(name, d) for d in self.differences[name])

    def min_order(self) -> float:
        return min((o for f in FIELDS for o in self.orders(f)), default=math.inf)

    def format(self) -> str:
        head = f"{'level':>5} {'N':>6} {'dt':>11} " + " ".join(f"{'d_' + f:>11} {'p_' + f:>7}" for f in FIELDS)
        out = [head]
        for k, (n, dt) in enumerate(zip(self.n_cells, self.dt)):
            cols = []
            for f in FIELDS:
                d = self.differences[f]
                diff = f"{d[k]:11.3e}" if k < len(d) else " " * 11
                label = self.order_label(f, k) if k < len(d) - 1 else ""
                cols.append(f"{diff} {label:>7}")
            out.append(f"{k:>5} {n:>6} {dt:11.4e} " + " ".join(cols))
        return "\n".join(out)

    def write_csv(self, path) -> None:
        cols = ["level", "n_cells", "dt"] + [f"diff_{f}" for f in FIELDS] + [f"order_{f}" for f in FIELDS]
        rows = [",".join(cols)]
        for k, (n, dt) in enumerate(zip(self.n_cells, self.dt)):
            vals = [str(k), str(n), "%.17g" % dt]
            for f in FIELDS:
                d = self.differences[f]
                vals.append("%.17g" % d[k] if k < len(d) else "")
            for f in FIELDS:
                n_orders = len(self.differences[f]) - 1
                vals.append("%.17g" % self.order(f, k) if k < n_orders else "")
            rows.append(",".join(vals))
        Path(path).write_text("\n".join(rows) + "\n")


def convergence_study(config: SimConfig, levels: int, backend: str | None = None) -> ConvergenceTable:
    """Solve on ``N, 2N, ..., 2^levels N`` with ``dt`` halved alongside ``dx``.

    The coarsest step is ``config.step.dt`` if set, else the stability bound
    of the initial state, rounded down so that ``t_end / dt`` is an integer.
    Every level then takes exactly twice as many uniform steps as the one
    before, so the time and space errors shrink together. Differences are
    ``max |q_k - R q_{k+1}|`` with ``R`` the restriction of :func:`restrict`.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if config.coords != "euler":
        raise ConfigError("the refinement study runs in Euler coordinates (set coords = euler)", key="coords")
    grid0, ctl = config.grid, config.step
    state0 = make_initial(config.scenario, grid0, config.params)
    dt0 = ctl.dt if ctl.dt is not None else stable_dt(state0, grid0, config.params, ctl)
    n_steps0 = max(1, math.ceil(ctl.t_end / dt0 - 1e-9))

    grids, finals, dts = [], [], []
    for k in range(levels + 1):
        grid = Grid(grid0.length, grid0.n_cells * 2**k, grid0.bc_mode)
        n_steps = n_steps0 * 2**k
        state = make_initial(config.scenario, grid, config.params)
        finals.append(advance_fixed(state, grid, config.params, ctl, n_steps, backend=backend))
        grids.append(grid)
        dts.append(ctl.t_end / n_steps)

    diffs = {f: [] for f in FIELDS}
    for k in range(levels):
        for f in FIELDS:
            coarse = getattr(finals[k], f)
            fine = restrict(getattr(finals[k + 1], f), grids[k + 1])
            diffs[f].append(float(np.max(np.abs(coarse - fine))))
    scales = {f: float(np.max(np.abs(getattr(finals[-1], f)))) for f in FIELDS}
    return ConvergenceTable([g.n_cells for g in grids], dts, diffs, scales)


# -- sweeps -----------------------------------------------------------------------

_KEY_SECTIONS = {
    "length": "grid", "n_cells": "grid", "bc": "grid", "coords": "grid",
    "nu": "params", "eps": "params", "theta": "params", "rho_ref": "params",
    "t_end": "step", "dt": "step", "cfl": "step", "picard_tol": "step", "picard_max": "step",
    "directory": "output", "ledger_interval": "output", "snapshot_times": "output",
    "plot": "output", "extended": "output",
}


def parse_axis(text: str) -> tuple[str, list[str]]:
    """``"theta=0.9,0.95"`` -> ``("params.theta", ["0.9", "0.95"])``.

    Bare keys are looked up in their usual section; anything unknown is taken
    to be a scenario field.
    """
    if "=" not in text:
        raise ConfigError(f"axis must look like key=v1,v2,..., got {text!r}")
    key, values = (s.strip() for s in text.split("=", 1))
    if "." in key:
        if key.split(".", 1)[0] not in SECTIONS:
            raise ConfigError(f"unknown section in axis key {key!r}")
    else:
        key = f"{_KEY_SECTIONS.get(key, 'scenario')}.{key}"
    points = [v.strip() for v in values.split(",") if v.strip()]
    if not points:
        raise ConfigError(f"axis {key} has no values")
    return key, points


def _point_directory(base: Path, key: str, value: str) -> Path:
    return base / f"{key.split('.', 1)[1]}={value}"


def _run_point(config_path: str, key: str, value: str, base: str, backend):
    config = parse_config(config_path, overrides={key: value})
    return execute(config, _point_directory(Path(base), key, value), backend)


@dataclass
class SweepResult:
    key: str
    values: list[str]
    results: list[RunResult] = field(default_factory=list)

    @property
    def any_blow_up(self) -> bool:
        return any(r.blew_up for r in self.results)


def sweep(config_path, axis: str, workers: int | None = None, backend: str | None = None) -> SweepResult:
    """Run one independent simulation per axis value, each in its own directory.

    Every point is parsed (and so validated) before any worker starts.
    """
    key, values = parse_axis(axis)
    base = parse_config(config_path).output.directory
    for v in values:
        parse_config(config_path, overrides={key: v})
    workers = workers or min(len(values), os.cpu_count() or 1)
    out = SweepResult(key, values)
    if workers == 1:
        out.results = [_run_point(str(config_path), key, v, str(base), backend) for v in values]
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_point, str(config_path), key, v, str(base), backend) for v in values]
        out.results = [f.result() for f in futures]
    return out


__all__ = [
    "ConvergenceTable",
    "RunResult",
    "SweepResult",
    "convergence_study",
    "execute",
    "parse_axis",
    "restrict",
    "sweep",
    "write_gnuplot",
    "write_trajectory",
]
