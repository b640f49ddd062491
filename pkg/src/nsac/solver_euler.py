"""Semi-implicit Picard time stepping of the Euler-coordinate system.

Per step the lagged iterate ``(rho, u, chi)^(n-1)`` supplies the transport
velocity and the double-well term while the new iterate is found field by
field: density by implicit upwind flux form, velocity with implicit
viscosity, phase with implicit diffusion. The kernels live in ``_kernels``
(compiled) or ``_pykernels``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from nsac import _backend
from nsac.diagnostics import EnergyLedger, ledger
from nsac.eos import DOMAIN_GUARD, PhysParams, pressure_derivative
from nsac.grid import FieldState, Grid, check_compatibility, make_initial

log = logging.getLogger(__name__)

RHO_FLOOR = 1e-6
RHO_CEIL_GUARD = DOMAIN_GUARD


@dataclass(frozen=True)
class StepControl:
    """Time-step and fixed-point settings.

    ``dt`` is an upper bound; the step actually taken is further limited by
    ``cfl`` times the transport/acoustic bound of the current state.
    """

    t_end: float = 1.0
    dt: float | None = None
    cfl: float = 0.5
    picard_tol: float = 1e-10
    picard_max: int = 50

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not 0 < self.cfl <= 0.9:
            raise ValueError(f"cfl must lie in (0, 0.9], got {self.cfl}")
        if not self.picard_tol > 0:
            raise ValueError(f"picard_tol must be > 0, got {self.picard_tol}")
        if int(self.picard_max) != self.picard_max or self.picard_max < 1:
            raise ValueError(f"picard_max must be an integer >= 1, got {self.picard_max}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")


class BlowUpError(RuntimeError):
    """The discrete solution left the admissible density range, or Picard failed.

    ``trajectory`` is attached by the run drivers so callers can inspect the
    partial history.
    """

    def __init__(self, message, time, cell=None):
        super().__init__(message)
        self.time = time
        self.cell = cell
        self.trajectory = None


class PicardDivergenceError(BlowUpError):
    pass


@dataclass(frozen=True)
class StepInfo:
    dt: float
    iterations: int
    retried: bool


def stable_dt(state: FieldState, grid: Grid, params: PhysParams, ctl: StepControl) -> float:
    """Largest step allowed by ``ctl``.

    The signal speed is ``max|u| + sqrt(max|p'(rho)|)``; the absolute value
    keeps the bound finite inside the spinodal interval, where ``sqrt(-p')``
    sets the growth rate instead of a sound speed. The phase reaction adds
    ``dt <= cfl * eps * min(rho)``.
    """
    speed = np.max(np.abs(state.u)) + math.sqrt(np.max(np.abs(pressure_derivative(state.rho, params.theta))))
    dt = ctl.cfl * grid.dx / max(speed, 1e-8)
    dt = min(dt, ctl.cfl * params.eps * float(np.min(state.rho)))
    if ctl.dt is not None:
        dt = min(dt, ctl.dt)
    return dt


def _raw_step(state, grid, params, ctl, dt, kernels):
    return kernels.euler_step(
        state.rho, state.u, state.chi, grid.dx, dt, params.nu, params.eps, params.theta,
        grid.periodic, ctl.picard_tol, int(ctl.picard_max), RHO_FLOOR, RHO_CEIL_GUARD,
    )


def step_with_info(state: FieldState, grid: Grid, params: PhysParams, ctl: StepControl,
                   dt: float | None = None, backend: str | None = None) -> tuple[FieldState, StepInfo]:
    """Advance one step; on failure retry once with ``dt/2`` before raising."""
    kernels = _backend.get_kernels(backend)
    if dt is None:
        dt = stable_dt(state, grid, params, ctl)
    retried = False
    for attempt in range(2):
        rho, u, chi, iters, status, bad = _raw_step(state, grid, params, ctl, dt, kernels)
        if status == kernels.OK:
            return FieldState(rho, u, chi, state.time + dt), StepInfo(dt, iters, retried)
        if attempt == 0:
            log.debug("step at t=%g failed (status %d), retrying with dt/2", state.time, status)
            dt *= 0.5
            retried = True
    if status == kernels.OUT_OF_RANGE:
        raise BlowUpError(
            f"density left ({RHO_FLOOR}, 3) at t={state.time:.6g}, cell {bad}: rho={rho[bad]!r}",
            time=state.time, cell=bad,
        )
    raise PicardDivergenceError(
        f"Picard iteration did not reach tol={ctl.picard_tol} in {ctl.picard_max} sweeps at t={state.time:.6g}",
        time=state.time,
    )


def step(state: FieldState, grid: Grid, params: PhysParams, ctl: StepControl,
         dt: float | None = None, backend: str | None = None) -> FieldState:
    return step_with_info(state, grid, params, ctl, dt, backend)[0]


@dataclass
class Trajectory:
    grid: Grid
    params: PhysParams
    rows: list[EnergyLedger] = field(default_factory=list)
    snapshots: list[FieldState] = field(default_factory=list)
    final: FieldState | None = None
    picard_iterations: list[int] = field(default_factory=list)
    coords: str = "euler"

    @property
    def n_steps(self) -> int:
        return len(self.picard_iterations)


def output_schedule(t_end: float, ledger_interval: float | None, snapshot_times: Sequence[float] = ()):
    """Sorted stop times ``(ledger_times, snapshot_times, all_stops)``.

    Ledger times are ``k * interval`` computed by multiplication, so they are
    exactly uniform; ``t_end`` always closes the schedule.
    """
    if ledger_interval is None:
        ledger_times = [0.0, t_end] if t_end > 0 else [0.0]
    else:
        k = int(math.floor(t_end / ledger_interval * (1 + 1e-12)))
        ledger_times = [i * ledger_interval for i in range(k + 1)]
        if t_end - ledger_times[-1] > 1e-12 * max(t_end, 1.0):
            ledger_times.append(t_end)
    snaps = sorted(t for t in snapshot_times if 0.0 <= t <= t_end)
    stops = sorted(set(ledger_times) | set(snaps) | {t_end})
    return ledger_times, snaps, stops


def integrate(
    state: FieldState,
    advance: Callable[[object, float | None], tuple[object, StepInfo]],
    max_dt: Callable[[object], float],
    record: Callable[[object], EnergyLedger],
    snapshot: Callable[[object], FieldState],
    t_end: float,
    ledger_interval: float | None,
    snapshot_times: Sequence[float],
    traj: Trajectory,
):
    """Shared time loop: land exactly on every output time.

    With ``ledger_interval=None`` a ledger row is written after every step.
    """
    ledger_times, snaps, stops = output_schedule(t_end, ledger_interval, snapshot_times)
    ledger_set, snap_set = set(ledger_times), set(snaps)
    every_step = ledger_interval is None

    traj.rows.append(record(state))
    if 0.0 in snap_set:
        traj.snapshots.append(snapshot(state))
    t = 0.0
    try:
        for stop in stops[1:] if stops[0] == 0.0 else stops:
            while t < stop:
                dt = max_dt(state)
                remaining = stop - t
                landing = dt >= remaining * (1 - 1e-9)
                if landing:
                    dt = remaining
                elif dt > 0.5 * remaining:
                    dt = 0.5 * remaining  # avoid a sliver step before the stop
                state, info = advance(state, dt)
                traj.picard_iterations.append(info.iterations)
                t = stop if (landing and not info.retried) else t + info.dt
                state.time = t
                if every_step and t < stop:
                    traj.rows.append(record(state))
            if stop in ledger_set or every_step:
                traj.rows.append(record(state))
            if stop in snap_set:
                traj.snapshots.append(snapshot(state))
    except BlowUpError as err:
        traj.final = state
        err.trajectory = traj
        raise
    traj.final = state
    return traj


def simulate(state: FieldState, grid: Grid, params: PhysParams, ctl: StepControl,
             ledger_interval: float | None = None, snapshot_times: Sequence[float] = (),
             backend: str | None = None) -> Trajectory:
    """Evolve ``state`` to ``ctl.t_end`` recording ledger rows and snapshots."""
    state.validate()
    check_compatibility(state, grid, params)
    traj = Trajectory(grid=grid, params=params)
    return integrate(
        state.copy(),
        advance=lambda s, dt: step_with_info(s, grid, params, ctl, dt, backend),
        max_dt=lambda s: stable_dt(s, grid, params, ctl),
        record=lambda s: ledger(s, grid, params),
        snapshot=lambda s: s.copy(),
        t_end=ctl.t_end,
        ledger_interval=ledger_interval,
        snapshot_times=snapshot_times,
        traj=traj,
    )


def advance_fixed(state: FieldState, grid: Grid, params: PhysParams, ctl: StepControl,
                  n_steps: int, backend: str | None = None) -> FieldState:
    """Take exactly ``n_steps`` steps of ``ctl.t_end / n_steps`` (no CFL adaptation).

    Used by refinement studies, where the step must scale exactly with ``dx``.
    A step that needed the ``dt/2`` retry is completed by a second half step.
    """
    dt = ctl.t_end / n_steps
    s = state.copy()
    for k in range(n_steps):
        target = ctl.t_end if k == n_steps - 1 else (k + 1) * dt
        while s.time < target - 1e-12 * dt:
            s, _ = step_with_info(s, grid, params, ctl, dt=target - s.time, backend=backend)
        s.time = target
    return s


def run(config, backend: str | None = None) -> Trajectory:
    """Run a :class:`~nsac.config.SimConfig` in Euler coordinates."""
    state = make_initial(config.scenario, config.grid, config.params)
    return simulate(
        state, config.grid, config.params, config.step,
        ledger_interval=config.output.ledger_interval,
        snapshot_times=config.output.snapshot_times,
        backend=backend,
    )
