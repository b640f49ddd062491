"""Mass-coordinate solver used to cross-check the Euler solver.

With ``y = int_0^x rho`` and ``v = 1/rho`` the periodic system becomes

    v_t = u_y
    u_t + p(1/v)_y = nu (u_y / v)_y - (eps/2) (chi_y^2 / v^2)_y
    chi_t = -(v/eps)(chi^3 - chi) + eps v (chi_y / v)_y

on ``[0, rho_mean L)``. No transport terms remain, so this path shares no
advection discretization with the Euler solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from nsac import _backend
from nsac.diagnostics import ledger_lagrange
from nsac.eos import PhysParams, pressure_derivative
from nsac.grid import FieldState, Grid, make_initial
from nsac.solver_euler import (
    RHO_CEIL_GUARD,
    RHO_FLOOR,
    BlowUpError,
    PicardDivergenceError,
    StepControl,
    StepInfo,
    Trajectory,
    integrate,
)


@dataclass
class LagrangeState:
    """Fields on the uniform mass grid ``y_i = (i + 1/2) dy``.

    ``x_origin`` is the Euler position of the material point ``y = 0``; it
    moves with the flow and is needed to map back to Euler coordinates.
    """

    v: np.ndarray
    u: np.ndarray
    chi: np.ndarray
    period: float
    time: float = 0.0
    x_origin: float = 0.0

    @property
    def n(self) -> int:
        return len(self.v)

    @property
    def dy(self) -> float:
        return self.period / self.n

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.dy

    @property
    def volume(self) -> float:
        return float(self.dy * np.sum(self.v))

    def copy(self) -> "LagrangeState":
        return LagrangeState(self.v.copy(), self.u.copy(), self.chi.copy(), self.period, self.time, self.x_origin)

    def validate(self) -> "LagrangeState":
        if not np.all(np.isfinite(self.v)) or not np.all(self.v > 1.0 / 3.0):
            raise ValueError("specific volume must be finite and > 1/3")
        return self


def _periodic_nodes(coords, values, period):
    """Append one wrapped node on each side so interpolation covers ``[0, period]``."""
    xs = np.concatenate(([coords[-1] - period], coords, [coords[0] + period]))
    return xs, [np.concatenate(([f[-1]], f, [f[0]])) for f in values]


def _cumulative_periodic(coords, density, period, origin=0.0):
    """``int_origin^{coords_i} density`` for piecewise-linear periodic ``density``."""
    h = coords[1] - coords[0]
    first = coords[0] - origin
    at_origin = density[-1] + (density[0] - density[-1]) * (h - first) / h
    start = 0.5 * first * (at_origin + density[0])
    steps = 0.5 * h * (density[1:] + density[:-1])
    return start + np.concatenate(([0.0], np.cumsum(steps)))


def to_lagrange(state: FieldState, grid: Grid) -> LagrangeState:
    """Resample an Euler state onto a uniform mass grid of the same size."""
    if not grid.periodic:
        raise ValueError("mass coordinates are implemented for the periodic problem only")
    x = grid.x
    mass_at_x = _cumulative_periodic(x, state.rho, grid.length)
    if np.any(np.diff(mass_at_x) <= 0):
        raise ArithmeticError("cumulative mass is not strictly increasing")
    period = float(grid.dx * np.sum(state.rho))
    n = grid.n_points
    y = (np.arange(n) + 0.5) * period / n
    ys, (xs, rho_ext, u_ext, chi_ext) = _periodic_nodes(
        mass_at_x, [x, state.rho, state.u, state.chi], period
    )
    # wrapped x nodes must be shifted by the spatial period
    xs = xs.copy()
    xs[0] -= grid.length
    xs[-1] += grid.length
    x_of_y = np.interp(y, ys, xs)
    x_all = np.concatenate(([x[-1] - grid.length], x, [x[0] + grid.length]))
    v = 1.0 / np.interp(x_of_y, x_all, rho_ext)
    u = np.interp(x_of_y, x_all, u_ext)
    chi = np.interp(x_of_y, x_all, chi_ext)
    return LagrangeState(v, u, chi, period, state.time, 0.0)


def to_euler(lstate: LagrangeState, grid: Grid) -> FieldState:
    """Map a mass-coordinate state back onto the Euler grid ``grid``."""
    y = lstate.y
    x_at_y = lstate.x_origin + _cumulative_periodic(y, lstate.v, lstate.period)
    fields = [np.interp(grid.x, x_at_y, f, period=grid.length) for f in (1.0 / lstate.v, lstate.u, lstate.chi)]
    return FieldState(*fields, time=lstate.time)


def stable_dt_lagrange(lstate: LagrangeState, params: PhysParams, ctl: StepControl) -> float:
    """Counterpart of ``solver_euler.stable_dt`` with ``dx`` replaced by ``v dy``."""
    rho = 1.0 / lstate.v
    speed = np.max(np.abs(lstate.u)) + np.sqrt(np.max(np.abs(pressure_derivative(rho, params.theta))))
    dt = ctl.cfl * lstate.dy * float(np.min(lstate.v)) / max(speed, 1e-8)
    dt = min(dt, ctl.cfl * params.eps * float(np.min(rho)))
    if ctl.dt is not None:
        dt = min(dt, ctl.dt)
    return dt


def step_lagrange_with_info(lstate: LagrangeState, params: PhysParams, ctl: StepControl,
                            dt: float | None = None, backend: str | None = None):
    kernels = _backend.get_kernels(backend)
    if dt is None:
        dt = stable_dt_lagrange(lstate, params, ctl)
    v_min = 1.0 / (3.0 - RHO_CEIL_GUARD)
    v_max = 1.0 / RHO_FLOOR
    retried = False
    for attempt in range(2):
        v, u, chi, iters, status, bad = kernels.lagrange_step(
            lstate.v, lstate.u, lstate.chi, lstate.dy, dt, params.nu, params.eps, params.theta,
            ctl.picard_tol, int(ctl.picard_max), v_min, v_max,
        )
        if status == kernels.OK:
            # velocity of the y = 0 material point, interpolated between the end cells
            x0 = lstate.x_origin + dt * 0.5 * (u[0] + u[-1])
            new = LagrangeState(v, u, chi, lstate.period, lstate.time + dt, x0)
            return new, StepInfo(dt, iters, retried)
        if attempt == 0:
            dt *= 0.5
            retried = True
    if status == kernels.OUT_OF_RANGE:
        raise BlowUpError(
            f"specific volume left (1/3, {v_max:g}) at t={lstate.time:.6g}, cell {bad}",
            time=lstate.time, cell=bad,
        )
    raise PicardDivergenceError(
        f"Picard iteration did not converge at t={lstate.time:.6g}", time=lstate.time
    )


def step_lagrange(lstate: LagrangeState, params: PhysParams, ctl: StepControl,
                  dt: float | None = None, backend: str | None = None) -> LagrangeState:
    return step_lagrange_with_info(lstate, params, ctl, dt, backend)[0]


def simulate_lagrange(state: FieldState, grid: Grid, params: PhysParams, ctl: StepControl,
                      ledger_interval: float | None = None, snapshot_times: Sequence[float] = (),
                      backend: str | None = None) -> Trajectory:
    """Evolve an Euler initial state in mass coordinates.

    Snapshots are stored in mass coordinates (``FieldState`` with
    ``rho = 1/v``); ``Trajectory.final`` is the final :class:`LagrangeState`.
    """
    state.validate()
    lstate = to_lagrange(state, grid)
    traj = Trajectory(grid=grid, params=params, coords="lagrange")
    return integrate(
        lstate,
        advance=lambda s, dt: step_lagrange_with_info(s, params, ctl, dt, backend),
        max_dt=lambda s: stable_dt_lagrange(s, params, ctl),
        record=lambda s: ledger_lagrange(s.v, s.u, s.chi, s.dy, s.time, params),
        snapshot=lambda s: FieldState(1.0 / s.v, s.u.copy(), s.chi.copy(), s.time),
        t_end=ctl.t_end,
        ledger_interval=ledger_interval,
        snapshot_times=snapshot_times,
        traj=traj,
    )


def run_lagrange(config, backend: str | None = None) -> Trajectory:
    state = make_initial(config.scenario, config.grid, config.params)
    return simulate_lagrange(
        state, config.grid, config.params, config.step,
        ledger_interval=config.output.ledger_interval,
        snapshot_times=config.output.snapshot_times,
        backend=backend,
    )
