"""Energy ledger, budget residual and a-priori-bound checks along trajectories."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from nsac.eos import PhysParams, chemical_potential, phi
from nsac.grid import (
    CHI_TOL,
    FieldState,
    Grid,
    check_compatibility,
    face_average,
    face_difference,
    second_difference,
)

LEDGER_COLUMNS = (
    "t",
    "mass",
    "kinetic",
    "gradient",
    "phi_pot",
    "well",
    "energy_total",
    "dissipation_rate",
    "min_rho",
    "max_rho",
    "min_chi",
    "max_chi",
    "inv_rho_sup",
    "grad_inv_rho",
)
#: Higher-order norms recorded for inspection only (no thresholds).
EXTENDED_COLUMNS = ("chi_t_l2", "chi_xx_l2", "u_x_l2")


@dataclass(frozen=True)
class EnergyLedger:
    time: float
    mass: float
    kinetic: float
    gradient: float
    phi_pot: float
    well: float
    energy_total: float
    dissipation_rate: float
    min_rho: float
    max_rho: float
    min_chi: float
    max_chi: float
    inv_rho_sup: float
    grad_inv_rho: float
    chi_t_l2: float = math.nan
    chi_xx_l2: float = math.nan
    u_x_l2: float = math.nan

    def row(self, extended: bool = False) -> tuple:
        values = astuple(self)
        return values if extended else values[: len(LEDGER_COLUMNS)]


def _ledger_from_parts(time, mass, kinetic, gradient, phi_pot, well, dissipation, rho, chi, grad_inv_rho, extra):
    return EnergyLedger(
        time=float(time),
        mass=float(mass),
        kinetic=float(kinetic),
        gradient=float(gradient),
        phi_pot=float(phi_pot),
        well=float(well),
        energy_total=float(kinetic) + float(gradient) + float(phi_pot) + float(well),
        dissipation_rate=float(dissipation),
        min_rho=float(rho.min()),
        max_rho=float(rho.max()),
        min_chi=float(chi.min()),
        max_chi=float(chi.max()),
        inv_rho_sup=float((1.0 / rho).max()),
        grad_inv_rho=float(grad_inv_rho),
        **extra,
    )


def ledger(state: FieldState, grid: Grid, params: PhysParams) -> EnergyLedger:
    """Discrete energy components, dissipation rate and field bounds of ``state``.

    Point quantities use the trapezoidal weights of ``grid``; derivative
    quantities live on faces and are summed with weight ``dx``.
    """
    rho, u, chi = state.rho, state.u, state.chi
    w, dx, eps = grid.weights, grid.dx, params.eps

    chi_x = face_difference(chi, grid)
    u_x = face_difference(u, grid)
    inv_rho_x = face_difference(1.0 / rho, grid)
    mu = chemical_potential(state, grid, params)
    chi_t = check_compatibility(state, grid, params)

    return _ledger_from_parts(
        state.time,
        mass=np.dot(w, rho),
        kinetic=np.dot(w, 0.5 * rho * u * u),
        gradient=dx * np.sum(0.5 * eps * chi_x**2),
        phi_pot=np.dot(w, phi(rho, params)),
        well=np.dot(w, rho * (chi * chi - 1.0) ** 2) / (4.0 * eps),
        dissipation=np.dot(w, mu * mu) + dx * params.nu * np.sum(u_x**2),
        rho=rho,
        chi=chi,
        grad_inv_rho=dx * np.sum(face_average(rho, grid) * inv_rho_x**2),
        extra=dict(
            chi_t_l2=math.sqrt(np.dot(w, chi_t**2)),
            chi_xx_l2=math.sqrt(np.dot(w, second_difference(chi, grid) ** 2)),
            u_x_l2=math.sqrt(dx * np.sum(u_x**2)),
        ),
    )


def ledger_lagrange(v, u, chi, dy: float, time: float, params: PhysParams) -> EnergyLedger:
    """The same ledger evaluated in periodic mass coordinates.

    ``dx = v dy`` converts every Euler integral; ``d/dx = (1/v) d/dy``.
    """
    eps, nu = params.eps, params.nu
    rho = 1.0 / v
    vf = 0.5 * (v + np.roll(v, -1))
    chi_y = (np.roll(chi, -1) - chi) / dy
    u_y = (np.roll(u, -1) - u) / dy
    v_y = (np.roll(v, -1) - v) / dy
    curvature = ((np.roll(chi, -1) - chi) / vf - (chi - np.roll(chi, 1)) / np.roll(vf, 1)) / dy**2
    mu = (chi**3 - chi) / eps - eps * v * curvature
    return _ledger_from_parts(
        time,
        mass=dy * len(v),
        kinetic=dy * np.sum(0.5 * u * u),
        gradient=dy * np.sum(0.5 * eps * chi_y**2 / vf),
        phi_pot=dy * np.sum(phi(rho, params) * v),
        well=dy * np.sum((chi * chi - 1.0) ** 2) / (4.0 * eps),
        dissipation=dy * np.sum(mu * mu * v) + dy * nu * np.sum(u_y**2 / vf),
        rho=rho,
        chi=chi,
        grad_inv_rho=dy * np.sum(v_y**2 / vf**2),
        extra={},
    )


@dataclass(frozen=True)
class EnergyBudget:
    residual: np.ndarray
    max_relative: float
    e0: float
    relative: bool


def energy_budget(trajectory: Sequence[EnergyLedger]) -> EnergyBudget:
    """``r(t_n) = E(t_n) + sum_{k<n} D(t_k) (t_{k+1} - t_k) - E(0)``.

    ``max_relative`` is ``max|r| / E(0)``, or ``max|r|`` with
    ``relative=False`` when ``E(0) == 0``.
    """
    if len(trajectory) == 0:
        raise ValueError("energy budget of an empty trajectory")
    t = np.array([row.time for row in trajectory])
    energy = np.array([row.energy_total for row in trajectory])
    dissipation = np.array([row.dissipation_rate for row in trajectory])
    dissipated = np.concatenate(([0.0], np.cumsum(dissipation[:-1] * np.diff(t))))
    residual = energy + dissipated - energy[0]
    e0 = float(energy[0])
    peak = float(np.max(np.abs(residual)))
    if e0 == 0.0:
        return EnergyBudget(residual, peak, e0, relative=False)
    return EnergyBudget(residual, peak / abs(e0), e0, relative=True)


class NotApplicableError(ValueError):
    """The check is only defined for periodic states."""


def sobolev_rhs(state: FieldState, grid: Grid, rho0_mass: float) -> float:
    """``L int rho |(1/rho)_x|^2 + 2L / int rho0`` with face-based derivatives."""
    if not grid.periodic:
        raise NotApplicableError("the 1/rho Sobolev bound is derived for the periodic problem")
    L = grid.length
    inv_rho_x = face_difference(1.0 / state.rho, grid)
    grad_term = grid.dx * np.sum(face_average(state.rho, grid) * inv_rho_x**2)
    return float(L * grad_term + 2.0 * L / rho0_mass)


def sobolev_check(state: FieldState, grid: Grid, rho0_mass: float) -> float:
    """Slack ``RHS - max 1/rho`` of the Sobolev bound; negative means violated."""
    return sobolev_rhs(state, grid, rho0_mass) - float(np.max(1.0 / state.rho))


@dataclass(frozen=True)
class BoundsReport:
    rho_min: float
    rho_max: float
    chi_min: float
    chi_max: float
    rho_ok: bool
    chi_ok: bool
    mass_drift: float
    first_violation_time: float | None

    @property
    def passed(self) -> bool:
        return self.rho_ok and self.chi_ok


def assert_theorem_bounds(trajectory: Sequence[EnergyLedger], chi_tol: float = CHI_TOL) -> BoundsReport:
    """Global extrema of rho and chi, the ``0 < rho < 3``/``|chi| <= 1`` verdicts and mass drift."""
    first_bad = None
    for row in trajectory:
        ok = row.min_rho > 0.0 and row.max_rho < 3.0 and -1.0 - chi_tol <= row.min_chi and row.max_chi <= 1.0 + chi_tol
        if not ok:
            first_bad = row.time
            break
    rho_min = min(r.min_rho for r in trajectory)
    rho_max = max(r.max_rho for r in trajectory)
    chi_min = min(r.min_chi for r in trajectory)
    chi_max = max(r.max_chi for r in trajectory)
    m0 = trajectory[0].mass
    drift = max(abs(r.mass - m0) for r in trajectory) / m0
    return BoundsReport(
        rho_min=rho_min,
        rho_max=rho_max,
        chi_min=chi_min,
        chi_max=chi_max,
        rho_ok=rho_min > 0.0 and rho_max < 3.0,
        chi_ok=chi_min >= -1.0 - chi_tol and chi_max <= 1.0 + chi_tol,
        mass_drift=drift,
        first_violation_time=first_bad,
    )


def write_ledger_csv(path, rows: Sequence[EnergyLedger], extended: bool = False) -> None:
    header = LEDGER_COLUMNS + (EXTENDED_COLUMNS if extended else ())
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["%.17g" % v for v in row.row(extended)])


def read_ledger_csv(path) -> list[EnergyLedger]:
    names = [f.name for f in fields(EnergyLedger)]
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header[: len(LEDGER_COLUMNS)]) != LEDGER_COLUMNS:
            raise ValueError(f"{path}: unexpected ledger header {header}")
        for rec in reader:
            out.append(EnergyLedger(**dict(zip(names, map(float, rec)))))
    return out
