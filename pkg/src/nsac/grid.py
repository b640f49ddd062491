"""Uniform 1-D grids, discrete fields, initial data and snapshot files.

Periodic grids store ``n_cells`` values at cell centres ``(i + 1/2) dx``.
Mixed (wall) grids store ``n_cells + 1`` values at the nodes ``i dx`` so that
the walls ``x = 0, L`` carry unknowns; ``u`` is pinned to zero there and
``chi`` obeys a mirrored-ghost Neumann condition.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Union

import numpy as np

from nsac.eos import PhysParams

#: Slack on the discrete maximum principle for chi.
CHI_TOL = 1e-6


class BCMode(str, enum.Enum):
    PERIODIC = "periodic"
    MIXED = "mixed"


class ConstructionError(ValueError):
    """Initial data violate ``0 < rho < 3`` or ``|chi| <= 1``, or are not finite."""


class InvalidStateError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    length: float
    n_cells: int
    bc_mode: BCMode = BCMode.PERIODIC

    def __post_init__(self):
        object.__setattr__(self, "bc_mode", BCMode(self.bc_mode))
        if int(self.n_cells) != self.n_cells or self.n_cells < 8:
            raise ValueError(f"n_cells must be an integer >= 8, got {self.n_cells}")
        if not (math.isfinite(self.length) and self.length > 0):
            raise ValueError(f"length must be positive, got {self.length}")

    @property
    def periodic(self) -> bool:
        return self.bc_mode is BCMode.PERIODIC

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def n_points(self) -> int:
        return self.n_cells if self.periodic else self.n_cells + 1

    @property
    def x(self) -> np.ndarray:
        i = np.arange(self.n_points, dtype=float)
        return (i + 0.5) * self.dx if self.periodic else i * self.dx

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights (control-volume sizes)."""
        w = np.full(self.n_points, self.dx)
        if not self.periodic:
            w[0] = w[-1] = 0.5 * self.dx
        return w

    def refined(self, factor: int = 2) -> "Grid":
        return replace(self, n_cells=self.n_cells * factor)


@dataclass
class FieldState:
    rho: np.ndarray
    u: np.ndarray
    chi: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.chi = np.asarray(self.chi, dtype=float)
        if not (self.rho.shape == self.u.shape == self.chi.shape and self.rho.ndim == 1):
            raise ValueError("rho, u, chi must be 1-D arrays of equal length")

    def copy(self) -> "FieldState":
        return FieldState(self.rho.copy(), self.u.copy(), self.chi.copy(), self.time)

    def shifted(self, cells: int) -> "FieldState":
        return FieldState(
            np.roll(self.rho, cells), np.roll(self.u, cells), np.roll(self.chi, cells), self.time
        )

    def violations(self, chi_tol: float = CHI_TOL) -> list[str]:
        problems = []
        for name in ("rho", "u", "chi"):
            if not np.all(np.isfinite(getattr(self, name))):
                problems.append(f"{name} has non-finite entries")
        if not np.all((self.rho > 0.0) & (self.rho < 3.0)):
            i = int(np.argmax((self.rho <= 0.0) | (self.rho >= 3.0)))
            problems.append(f"rho[{i}] = {self.rho[i]!r} outside (0, 3)")
        if np.any(np.abs(self.chi) > 1.0 + chi_tol):
            i = int(np.argmax(np.abs(self.chi)))
            problems.append(f"chi[{i}] = {self.chi[i]!r} outside [-1, 1]")
        return problems

    def validate(self, chi_tol: float = CHI_TOL) -> "FieldState":
        problems = self.violations(chi_tol)
        if problems:
            raise InvalidStateError("; ".join(problems))
        return self


# -- stencils ---------------------------------------------------------------


def with_neumann_ghosts(f):
    """Pad a mixed-grid field with mirrored ghosts ``f[-1] = f[1]``, ``f[n+1] = f[n-1]``."""
    return np.concatenate(([f[1]], f, [f[-2]]))


def face_difference(f, grid: Grid):
    """``(f[i+1] - f[i]) / dx`` on the faces between stored points."""
    if grid.periodic:
        return (np.roll(f, -1) - f) / grid.dx
    return np.diff(f) / grid.dx


def face_average(f, grid: Grid):
    if grid.periodic:
        return 0.5 * (np.roll(f, -1) + f)
    return 0.5 * (f[1:] + f[:-1])


def second_difference(f, grid: Grid, neumann: bool = True):
    """Three-point second derivative; mixed grids mirror a ghost point at walls."""
    dx2 = grid.dx**2
    if grid.periodic:
        return (np.roll(f, -1) - 2.0 * f + np.roll(f, 1)) / dx2
    if neumann:
        g = with_neumann_ghosts(f)
        return (g[2:] - 2.0 * g[1:-1] + g[:-2]) / dx2
    out = np.zeros_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / dx2
    return out


def central_difference(f, grid: Grid):
    if grid.periodic:
        return (np.roll(f, -1) - np.roll(f, 1)) / (2.0 * grid.dx)
    out = np.zeros_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * grid.dx)
    return out


def upwind_difference(f, velocity, grid: Grid):
    """First-order upwind ``f_x`` for transport with ``velocity``.

    On mixed grids the wall ghost mirrors the first interior value.
    """
    if grid.periodic:
        back = (f - np.roll(f, 1)) / grid.dx
        fwd = (np.roll(f, -1) - f) / grid.dx
    else:
        ext = with_neumann_ghosts(f)
        back = (ext[1:-1] - ext[:-2]) / grid.dx
        fwd = (ext[2:] - ext[1:-1]) / grid.dx
    return np.where(velocity > 0.0, back, fwd)


# -- scenarios --------------------------------------------------------------


@dataclass(frozen=True)
class Uniform:
    rho: float
    u: float = 0.0
    chi: float = 1.0


@dataclass(frozen=True)
class SinePerturb:
    """``rho = rho_mean + amplitude sin(2 pi k x / L)``.

    ``chi = chi_mean + chi_amplitude cos(2 pi k x / L)``; the cosine keeps
    ``chi_x = 0`` at the walls of a mixed grid.
    """

    rho_mean: float
    amplitude: float
    wavenumber: int = 1
    chi_mean: float = 1.0
    chi_amplitude: float = 0.0


@dataclass(frozen=True)
class TanhInterface:
    """Smoothed gas/liquid step; periodic grids get a slab with two interfaces.

    ``chi`` follows the same profile from -1 (left phase) to +1 (right phase).
    """

    rho_left: float
    rho_right: float
    width: float


@dataclass(frozen=True)
class SeededRandom:
    """Uniform noise of half-width ``amplitude`` on ``rho`` and on ``chi``."""

    rho_mean: float
    amplitude: float
    seed: int
    chi_mean: float = 0.0


Scenario = Union[Uniform, SinePerturb, TanhInterface, SeededRandom]


def make_initial(scenario: Scenario, grid: Grid, params: PhysParams | None = None) -> FieldState:
    x, L, n = grid.x, grid.length, grid.n_points
    if isinstance(scenario, Uniform):
        rho = np.full(n, float(scenario.rho))
        u = np.full(n, float(scenario.u))
        chi = np.full(n, float(scenario.chi))
    elif isinstance(scenario, SinePerturb):
        s = scenario
        lo, hi = s.rho_mean - abs(s.amplitude), s.rho_mean + abs(s.amplitude)
        if not (0.0 < lo and hi < 3.0):
            raise ConstructionError(f"rho_mean +- amplitude = [{lo}, {hi}] leaves (0, 3)")
        phase = 2.0 * np.pi * s.wavenumber * x / L
        rho = s.rho_mean + s.amplitude * np.sin(phase)
        u = np.zeros(n)
        chi = s.chi_mean + s.chi_amplitude * np.cos(phase)
    elif isinstance(scenario, TanhInterface):
        s = scenario
        if s.width <= 0:
            raise ConstructionError("interface width must be positive")
        if grid.periodic:
            profile = 0.5 * (np.tanh((x - 0.25 * L) / s.width) - np.tanh((x - 0.75 * L) / s.width))
        else:
            profile = 0.5 * (1.0 + np.tanh((x - 0.5 * L) / s.width))
        rho = s.rho_left + (s.rho_right - s.rho_left) * profile
        u = np.zeros(n)
        chi = 2.0 * profile - 1.0
    elif isinstance(scenario, SeededRandom):
        s = scenario
        rng = np.random.default_rng(s.seed)
        rho = s.rho_mean + s.amplitude * rng.uniform(-1.0, 1.0, n)
        chi = np.clip(s.chi_mean + s.amplitude * rng.uniform(-1.0, 1.0, n), -1.0, 1.0)
        u = np.zeros(n)
    else:
        raise TypeError(f"unknown scenario {scenario!r}")

    if not grid.periodic:
        u[0] = u[-1] = 0.0
    state = FieldState(rho, u, chi, 0.0)
    problems = state.violations(chi_tol=0.0)
    if problems:
        raise ConstructionError("; ".join(problems))
    return state


def check_compatibility(state0: FieldState, grid: Grid, params: PhysParams) -> np.ndarray:
    """Initial ``chi_t`` implied by the phase equation at ``t = 0``.

    Uses the same upwind and three-point stencils as the time stepper.
    """
    rho, u, chi = state0.rho, state0.u, state0.chi
    chi_t = (
        -u * upwind_difference(chi, u, grid)
        + params.eps / rho**2 * second_difference(chi, grid)
        - (chi**3 - chi) / (params.eps * rho)
    )
    if not np.all(np.isfinite(chi_t)):
        raise ConstructionError("compatibility data chi_t(x, 0) is not finite")
    return chi_t


# -- snapshot files ---------------------------------------------------------

_FMT = "%.17g"


def write_snapshot(path, state: FieldState, coords: np.ndarray, coord_name: str = "x") -> None:
    data = np.column_stack([coords, state.rho, state.u, state.chi])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, data, fmt=_FMT, delimiter=",", header=f"{coord_name},rho,u,chi", comments="")


def read_snapshot(path) -> tuple[np.ndarray, FieldState]:
    """Return ``(coords, state)``; the time is not stored in the file."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0].copy(), FieldState(data[:, 1].copy(), data[:, 2].copy(), data[:, 3].copy())
