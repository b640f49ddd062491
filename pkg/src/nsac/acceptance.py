"""Executable acceptance suite.

Each criterion is a function of a shared :class:`Runs` cache, so the
expensive simulations (baseline, spinodal, mixed walls, refinement ladders)
are computed once whether the suite is driven by ``nsac-sim check`` or by
the test suite. Every criterion returns a :class:`Criterion` carrying the
measured value that was compared against its threshold.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.integrate import quad

from nsac.diagnostics import assert_theorem_bounds, energy_budget, ledger, ledger_lagrange, sobolev_check, sobolev_rhs
from nsac.drivers import ConvergenceTable, FIELDS, convergence_study
from nsac.eos import PhysParams, critical_points, phi, pressure, pressure_derivative, spinodal_roots
from nsac.grid import BCMode, FieldState, Grid, SeededRandom, SinePerturb, TanhInterface, Uniform, make_initial
from nsac.solver_euler import StepControl, Trajectory, simulate, stable_dt, step_with_info
from nsac.solver_lagrange import (
    simulate_lagrange,
    stable_dt_lagrange,
    step_lagrange_with_info,
    to_euler,
    to_lagrange,
)

# -- presets --------------------------------------------------------------------

PARAMS = PhysParams(nu=0.1, eps=0.05, theta=0.9, rho_ref=0.1)
N_BASE = 256
CONTROL = StepControl(t_end=1.0, cfl=0.5)

#: Two diffuse interfaces riding on a density wave.
BASELINE = SinePerturb(rho_mean=0.5, amplitude=0.1, wavenumber=1, chi_mean=0.0, chi_amplitude=0.5)
#: Noise around the critical density; chi starts biased towards the +1 phase.
SPINODAL = SeededRandom(rho_mean=1.0, amplitude=0.1, seed=7, chi_mean=0.5)
SPINODAL_T_END = 5.0
MIXED = TanhInterface(rho_left=0.3, rho_right=1.8, width=0.05)
#: Density wave inside the spinodal interval in a pure phase.
REFINEMENT = SinePerturb(rho_mean=1.0, amplitude=0.1, wavenumber=1)
REFINEMENT_N = 128
REFINEMENT_T_END = 0.1
EL_T_END = 0.1
FIXED_POINT_STEPS = 1000
SNAPSHOT_TIMES = tuple(0.1 * k for k in range(11))

TOL_PHI = 1e-10
TOL_DP = 1e-6
TOL_ROOT = 1e-8
TOL_MASS_PERIODIC = 1e-12
TOL_MASS_MIXED = 1e-10
TOL_BUDGET = 0.02
TOL_EL = 0.02
TOL_FIXED = 1e-12
TOL_SOBOLEV = 1e-6
FRACTION_SEPARATED = 0.9
MIN_ORDER = 1.0
RUN_BUDGET_SECONDS = 60.0


@dataclass
class Criterion:
    number: int
    title: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number}. {self.title}: {self.detail}"


@dataclass
class TimedRun:
    trajectory: Trajectory
    seconds: float
    rho0_mass: float


def _timed(fn: Callable[[], Trajectory], rho0_mass: float) -> TimedRun:
    start = time.perf_counter()
    traj = fn()
    return TimedRun(traj, time.perf_counter() - start, rho0_mass)


def _initial_mass(state: FieldState, grid: Grid) -> float:
    return float(np.dot(grid.weights, state.rho))


class Runs:
    """Lazily computed simulations shared by the criteria."""

    def __init__(self, backend: str | None = None):
        self.backend = backend

    def _euler(self, scenario, grid, ctl, snapshot_times=(), ledger_interval=None) -> TimedRun:
        state = make_initial(scenario, grid, PARAMS)
        return _timed(
            lambda: simulate(state, grid, PARAMS, ctl, ledger_interval, snapshot_times, self.backend),
            _initial_mass(state, grid),
        )

    @cached_property
    def baseline(self) -> TimedRun:
        return self._euler(BASELINE, Grid(1.0, N_BASE), CONTROL, SNAPSHOT_TIMES)

    @cached_property
    def baseline_refined(self) -> TimedRun:
        """``2N`` cells, every baseline step split into two halves."""
        grid = Grid(1.0, 2 * N_BASE)
        state = make_initial(BASELINE, grid, PARAMS)
        times = [row.time for row in self.baseline.trajectory.rows]

        def replay():
            traj = Trajectory(grid=grid, params=PARAMS)
            s = state.copy()
            traj.rows.append(ledger(s, grid, PARAMS))
            for t0, t1 in zip(times[:-1], times[1:]):
                for target in (0.5 * (t0 + t1), t1):
                    while s.time < target - 1e-14:
                        s, info = step_with_info(s, grid, PARAMS, CONTROL, dt=target - s.time, backend=self.backend)
                        traj.picard_iterations.append(info.iterations)
                    s.time = target
                    traj.rows.append(ledger(s, grid, PARAMS))
            traj.final = s
            traj.snapshots.append(s.copy())
            return traj

        return _timed(replay, _initial_mass(state, grid))

    @cached_property
    def spinodal(self) -> TimedRun:
        ctl = StepControl(t_end=SPINODAL_T_END, cfl=CONTROL.cfl)
        times = tuple(0.5 * k for k in range(11))
        return self._euler(SPINODAL, Grid(1.0, N_BASE), ctl, times)

    @cached_property
    def mixed(self) -> TimedRun:
        return self._euler(MIXED, Grid(1.0, N_BASE, BCMode.MIXED), CONTROL)

    def euler_lagrange(self, n: int) -> dict:
        grid = Grid(1.0, n)
        state = make_initial(BASELINE, grid, PARAMS)
        ctl = StepControl(t_end=EL_T_END, cfl=CONTROL.cfl)
        start = time.perf_counter()
        euler = simulate(state, grid, PARAMS, ctl, ledger_interval=EL_T_END, backend=self.backend).final
        lag = simulate_lagrange(state, grid, PARAMS, ctl, ledger_interval=EL_T_END, backend=self.backend).final
        mapped = to_euler(lag, grid)
        seconds = time.perf_counter() - start
        rel = {
            f: float(np.max(np.abs(getattr(mapped, f) - getattr(euler, f))) / np.max(np.abs(getattr(euler, f))))
            for f in FIELDS
        }
        return {"n": n, "relative": rel, "worst": max(rel.values()), "euler": euler, "mapped": mapped,
                "grid": grid, "rho0_mass": _initial_mass(state, grid), "seconds": seconds}

    @cached_property
    def el_coarse(self) -> dict:
        return self.euler_lagrange(N_BASE)

    @cached_property
    def el_fine(self) -> dict:
        return self.euler_lagrange(2 * N_BASE)

    @cached_property
    def convergence(self) -> ConvergenceTable:
        from nsac.config import OutputSpec, SimConfig

        config = SimConfig(
            grid=Grid(1.0, REFINEMENT_N),
            params=PARAMS,
            step=StepControl(t_end=REFINEMENT_T_END, cfl=CONTROL.cfl),
            scenario=REFINEMENT,
            output=OutputSpec(),
        )
        return convergence_study(config, levels=3, backend=self.backend)

    @cached_property
    def fixed_point(self) -> dict:
        """Largest per-step change of Uniform(rho_ref, 0, +-1) in both solvers."""
        grid = Grid(1.0, N_BASE)
        out = {"euler": 0.0, "lagrange": 0.0, "energy": 0.0, "dissipation": 0.0, "states": []}
        for chi in (1.0, -1.0):
            state = make_initial(Uniform(PARAMS.rho_ref, 0.0, chi), grid, PARAMS)
            row = ledger(state, grid, PARAMS)
            out["energy"] = max(out["energy"], abs(row.energy_total))
            out["dissipation"] = max(out["dissipation"], abs(row.dissipation_rate))
            s = state.copy()
            dt = stable_dt(s, grid, PARAMS, CONTROL)
            for _ in range(FIXED_POINT_STEPS):
                new, _ = step_with_info(s, grid, PARAMS, CONTROL, dt=dt, backend=self.backend)
                change = max(np.max(np.abs(getattr(new, f) - getattr(s, f))) for f in FIELDS)
                out["euler"] = max(out["euler"], float(change))
                s = new
            out["states"].append(s)

            ls = to_lagrange(state, grid)
            row = ledger_lagrange(ls.v, ls.u, ls.chi, ls.dy, 0.0, PARAMS)
            out["energy"] = max(out["energy"], abs(row.energy_total))
            out["dissipation"] = max(out["dissipation"], abs(row.dissipation_rate))
            dt = stable_dt_lagrange(ls, PARAMS, CONTROL)
            for _ in range(FIXED_POINT_STEPS):
                new, _ = step_lagrange_with_info(ls, PARAMS, CONTROL, dt=dt, backend=self.backend)
                change = max(np.max(np.abs(new.v - ls.v)), np.max(np.abs(new.u - ls.u)),
                             np.max(np.abs(new.chi - ls.chi)))
                out["lagrange"] = max(out["lagrange"], float(change))
                ls = new
        return out


# -- criteria -------------------------------------------------------------------


def _phi_by_quadrature(rho: float, params: PhysParams) -> float:
    p_ref = pressure(params.rho_ref, params.theta)
    integrand = lambda s: (pressure(s, params.theta) - p_ref) / (s * s)
    value, _ = quad(integrand, params.rho_ref, rho, epsabs=1e-14, epsrel=1e-13, limit=200)
    return rho * value


def _five_point_derivative(rho: np.ndarray, theta: float) -> np.ndarray:
    h = 1e-3 * np.minimum(rho, 3.0 - rho)
    p = lambda r: pressure(r, theta)
    return (p(rho - 2 * h) - 8 * p(rho - h) + 8 * p(rho + h) - p(rho + 2 * h)) / (12 * h)


def check_eos(runs: Runs | None = None) -> Criterion:
    rho = np.linspace(0.005, 2.995, 1000)
    closed = phi(rho, PARAMS)
    oracle = np.array([_phi_by_quadrature(r, PARAMS) for r in rho])
    phi_err = float(np.max(np.abs(closed - oracle)))

    dp_err = 0.0
    for theta in (0.9, 1.0, 1.5):
        exact = pressure_derivative(rho, theta)
        fd = _five_point_derivative(rho, theta)
        dp_err = max(dp_err, float(np.max(np.abs(fd - exact) / np.abs(exact))))

    (root,) = spinodal_roots(1.0)
    root_err = abs(root - 1.0)
    passed = phi_err <= TOL_PHI and dp_err <= TOL_DP and root_err <= TOL_ROOT
    detail = (f"|Phi - quad| = {phi_err:.2e} (<= {TOL_PHI:g}), p' vs FD rel = {dp_err:.2e} (<= {TOL_DP:g}), "
              f"|root(theta=1) - 1| = {root_err:.1e} (<= {TOL_ROOT:g})")
    return Criterion(1, "EOS correctness", passed, detail,
                     {"phi": phi_err, "dp": dp_err, "root": root_err})


def check_mass(runs: Runs) -> Criterion:
    periodic = assert_theorem_bounds(runs.baseline.trajectory.rows).mass_drift
    mixed = assert_theorem_bounds(runs.mixed.trajectory.rows).mass_drift
    passed = periodic <= TOL_MASS_PERIODIC and mixed <= TOL_MASS_MIXED
    detail = (f"periodic drift {periodic:.2e} (<= {TOL_MASS_PERIODIC:g}), "
              f"mixed drift {mixed:.2e} (<= {TOL_MASS_MIXED:g})")
    return Criterion(2, "Mass conservation", passed, detail, {"periodic": periodic, "mixed": mixed})


def check_bounds(runs: Runs) -> Criterion:
    parts, passed, values = [], True, {}
    for name in ("baseline", "spinodal", "mixed"):
        rows = getattr(runs, name).trajectory.rows
        rep = assert_theorem_bounds(rows)
        passed &= rep.passed
        values[name] = rep
        parts.append(f"{name} rho in [{rep.rho_min:.3g}, {rep.rho_max:.3g}], "
                     f"chi in [{rep.chi_min:.7g}, {rep.chi_max:.7g}]")
    return Criterion(3, "Bounds 0 < rho < 3, |chi| <= 1", passed, "; ".join(parts), values)


def check_energy(runs: Runs) -> Criterion:
    coarse = energy_budget(runs.baseline.trajectory.rows).max_relative
    fine = energy_budget(runs.baseline_refined.trajectory.rows).max_relative
    passed = coarse <= TOL_BUDGET and fine < coarse
    detail = f"max|r|/E0 = {coarse:.3e} at N={N_BASE} (<= {TOL_BUDGET:g}), {fine:.3e} at (2N, dt/2)"
    return Criterion(4, "Energy budget", passed, detail, {"coarse": coarse, "fine": fine})


def check_euler_lagrange(runs: Runs) -> Criterion:
    c, f = runs.el_coarse, runs.el_fine
    passed = c["worst"] <= TOL_EL and f["worst"] < c["worst"]
    fmt = lambda r: ", ".join(f"{k} {v:.2e}" for k, v in r["relative"].items())
    detail = (f"relative Linf at N={c['n']}: {fmt(c)} (<= {TOL_EL:g}); "
              f"N={f['n']}: {fmt(f)}")
    return Criterion(5, "Euler-Lagrange equivalence", passed, detail, {"coarse": c["worst"], "fine": f["worst"]})


def check_fixed_point(runs: Runs) -> Criterion:
    fp = runs.fixed_point
    passed = (fp["euler"] <= TOL_FIXED and fp["lagrange"] <= TOL_FIXED
              and fp["energy"] == 0.0 and fp["dissipation"] == 0.0)
    detail = (f"max per-step change euler {fp['euler']:.1e}, lagrange {fp['lagrange']:.1e} over "
              f"{FIXED_POINT_STEPS} steps (<= {TOL_FIXED:g}); |E| = {fp['energy']:g}, |D| = {fp['dissipation']:g}")
    return Criterion(6, "Steady-state exactness", passed, detail,
                     {k: fp[k] for k in ("euler", "lagrange", "energy", "dissipation")})


def _sobolev_cases(runs: Runs):
    for name in ("baseline", "baseline_refined", "spinodal"):
        run = getattr(runs, name)
        for snap in run.trajectory.snapshots:
            yield name, snap, run.trajectory.grid, run.rho0_mass
    for el in (runs.el_coarse, runs.el_fine):
        yield f"euler N={el['n']}", el["euler"], el["grid"], el["rho0_mass"]
        yield f"lagrange N={el['n']}", el["mapped"], el["grid"], el["rho0_mass"]
    grid = Grid(1.0, N_BASE)
    for s in runs.fixed_point["states"]:
        yield "uniform", s, grid, _initial_mass(s, grid)


def check_sobolev(runs: Runs) -> Criterion:
    worst, worst_name, count = math.inf, "", 0
    for name, snap, grid, m0 in _sobolev_cases(runs):
        slack = sobolev_check(snap, grid, m0) / sobolev_rhs(snap, grid, m0)
        count += 1
        if slack < worst:
            worst, worst_name = slack, f"{name} t={snap.time:.3g}"
    passed = worst >= -TOL_SOBOLEV
    detail = f"min slack/RHS = {worst:.3e} over {count} snapshots (at {worst_name}; >= {-TOL_SOBOLEV:g})"
    return Criterion(7, "Sobolev bound on 1/rho", passed, detail, {"min_relative_slack": worst})


def check_phase_separation(runs: Runs) -> Criterion:
    final = runs.spinodal.trajectory.final
    cp = critical_points(PARAMS.theta)
    outside = float(np.mean(~cp.in_spinodal(final.rho)))
    pure = float(np.mean(np.abs(final.chi) > 0.9))
    passed = outside >= FRACTION_SEPARATED and pure >= FRACTION_SEPARATED
    detail = (f"t={final.time:g}: {100 * outside:.1f}% of cells outside (alpha, beta) = "
              f"({cp.alpha:.4f}, {cp.beta:.4f}), {100 * pure:.1f}% with |chi| > 0.9 (each >= 90%)")
    return Criterion(8, "Phase separation", passed, detail, {"outside": outside, "pure": pure})


def check_convergence(runs: Runs) -> Criterion:
    table = runs.convergence
    parts = []
    for f in FIELDS:
        labels = [table.order_label(f, k) for k in range(len(table.differences[f]) - 1)]
        parts.append(f"{f} {'/'.join(labels)}")
    worst = table.min_order()
    passed = worst >= MIN_ORDER
    detail = f"N={table.n_cells[0]}..{table.n_cells[-1]}, observed orders " + ", ".join(parts) + f" (>= {MIN_ORDER:g})"
    return Criterion(9, "Self-convergence", passed, detail, {"min_order": worst, "table": table})


CRITERIA = (
    check_eos,
    check_mass,
    check_bounds,
    check_energy,
    check_euler_lagrange,
    check_fixed_point,
    check_sobolev,
    check_phase_separation,
    check_convergence,
)


def check_runtime(runs: Runs) -> dict[str, float]:
    """Wall time of each acceptance simulation that has been computed so far."""
    out = {}
    for name in ("baseline", "baseline_refined", "spinodal", "mixed"):
        if name in runs.__dict__:
            out[name] = runs.__dict__[name].seconds
    for name in ("el_coarse", "el_fine"):
        if name in runs.__dict__:
            out[name] = runs.__dict__[name]["seconds"]
    return out


def run_all(backend: str | None = None, report: Callable[[Criterion], None] | None = None) -> list[Criterion]:
    runs = Runs(backend)
    results = []
    for check in CRITERIA:
        result = check(runs)
        results.append(result)
        if report is not None:
            report(result)
    return results
