"""Van der Waals thermodynamics for the isothermal Navier-Stokes-Allen-Cahn model.

All densities are reduced (critical density 1, close-packing density 3) and
the temperature enters only through the reduced value ``theta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.optimize import bisect

#: Densities closer than this to 0 or 3 are treated as out of domain.
DOMAIN_GUARD = 1e-9
#: Absolute tolerance of the bracketing root searches.
ROOT_TOL = 1e-12


class DomainError(ValueError):
    """A thermodynamic function was evaluated outside ``0 < rho < 3``."""


def _check_density(rho, *, allow_zero=False):
    r = np.asarray(rho, dtype=float)
    lo_ok = r >= 0.0 if allow_zero else r > DOMAIN_GUARD
    if not np.all(lo_ok & (r < 3.0 - DOMAIN_GUARD) & np.isfinite(r)):
        bad = r[~(lo_ok & (r < 3.0 - DOMAIN_GUARD) & np.isfinite(r))]
        raise DomainError(f"density {bad.ravel()[0]!r} outside the van der Waals domain (0, 3)")
    return r


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def pressure(rho, theta):
    """Van der Waals pressure ``-3 rho^2 + 8 theta rho / (3 - rho)``."""
    r = _check_density(rho, allow_zero=True)
    return _scalar_or_array(-3.0 * r * r + 8.0 * theta * r / (3.0 - r))


def pressure_derivative(rho, theta):
    """``dp/drho = -6 (rho^3 - 6 rho^2 + 9 rho - 4 theta) / (3 - rho)^2``."""
    r = _check_density(rho, allow_zero=True)
    cubic = ((r - 6.0) * r + 9.0) * r - 4.0 * theta
    return _scalar_or_array(-6.0 * cubic / (3.0 - r) ** 2)


def spinodal_cubic(rho, theta):
    """Numerator cubic of ``p'``; its roots in (0, 3) are the spinodal densities."""
    return ((rho - 6.0) * rho + 9.0) * rho - 4.0 * theta


def spinodal_roots(theta: float) -> tuple[float, ...]:
    """Roots of :func:`spinodal_cubic` in (0, 3), with a double root listed once.

    At ``theta == 1`` the cubic is ``(rho - 1)^2 (rho - 4)`` and only touches
    zero, so the root is located as the sign change of its derivative
    ``3 (rho - 1)(rho - 3)`` instead.
    """
    theta = float(theta)
    if theta > 1.0:
        return ()
    if theta == 1.0:
        slope = lambda r: (3.0 * r - 12.0) * r + 9.0
        return (bisect(slope, 0.0, 2.0, xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps),)
    cp = critical_points(theta)
    return (cp.alpha, cp.beta)


@dataclass(frozen=True)
class EosCriticalPoints:
    """Spinodal densities ``alpha < beta`` and the matched density ``gamma``.

    ``exists`` is False for ``theta >= 1`` (monotone pressure). ``gamma`` is
    NaN when ``p(beta) <= 0``, which happens for ``theta <= 27/32``: the
    pressure on ``[0, alpha]`` is positive, so no positive density matches it.
    """

    theta: float
    exists: bool
    alpha: float = math.nan
    beta: float = math.nan
    gamma: float = math.nan

    @property
    def has_gamma(self) -> bool:
        return self.exists and not math.isnan(self.gamma)

    def in_spinodal(self, rho):
        if not self.exists:
            return np.zeros(np.shape(rho), dtype=bool)
        rho = np.asarray(rho)
        return (rho > self.alpha) & (rho < self.beta)


@lru_cache(maxsize=64)
def critical_points(theta: float) -> EosCriticalPoints:
    """Locate the spinodal interval and the matched density by bisection.

    The cubic ``rho^3 - 6 rho^2 + 9 rho - 4 theta`` equals
    ``(rho - 1)^2 (rho - 4) + 4 (1 - theta)``, so for ``theta < 1`` it is
    negative at 0 and 3 and positive at 1, which brackets ``alpha`` in (0, 1)
    and ``beta`` in (1, 3).
    """
    theta = float(theta)
    if not theta > 0.0:
        raise DomainError(f"reduced temperature must be positive, got {theta}")
    if theta >= 1.0:
        return EosCriticalPoints(theta=theta, exists=False)

    alpha = bisect(spinodal_cubic, 0.0, 1.0, args=(theta,), xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps)
    beta = bisect(spinodal_cubic, 1.0, 3.0, args=(theta,), xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps)
    p_beta = pressure(beta, theta)
    gamma = math.nan
    if p_beta > 0.0:
        gamma = bisect(
            lambda r: pressure(r, theta) - p_beta, 0.0, alpha, xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps
        )
        # p increases on [0, alpha] and p(beta) < p(alpha), so gamma < alpha
        if not gamma < alpha:
            raise ArithmeticError(f"matched density {gamma} not below alpha {alpha} at theta={theta}")
    return EosCriticalPoints(theta=theta, exists=True, alpha=alpha, beta=beta, gamma=gamma)


@dataclass(frozen=True)
class PhysParams:
    """Physical constants: viscosity, interface thickness, temperature, reference density."""

    nu: float
    eps: float
    theta: float
    rho_ref: float

    def __post_init__(self):
        for name in ("nu", "eps", "theta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be > 0, got {value}")
        if not 0.0 < self.rho_ref < 3.0:
            raise ValueError(f"rho_ref must lie in (0, 3), got {self.rho_ref}")
        if self.theta < 1.0:
            cp = critical_points(self.theta)
            if not cp.has_gamma:
                raise ValueError(
                    f"rho_ref must be below gamma(theta), but no positive gamma exists "
                    f"for theta={self.theta} <= 27/32"
                )
            if not self.rho_ref < cp.gamma:
                raise ValueError(
                    f"rho_ref must be below gamma(theta={self.theta}) = {cp.gamma:.6g}, got {self.rho_ref}"
                )


def potential_f(rho, chi, theta):
    """Free-energy density ``-3 rho + (8 theta/3) ln(rho/(3-rho)) + (chi^2-1)^2/4``."""
    r = _check_density(rho)
    chi = np.asarray(chi, dtype=float)
    out = -3.0 * r + (8.0 * theta / 3.0) * np.log(r / (3.0 - r)) + 0.25 * (chi * chi - 1.0) ** 2
    return _scalar_or_array(out)


def _phi_antiderivative(s, theta, p_ref):
    return -3.0 * s + (8.0 * theta / 3.0) * np.log(s / (3.0 - s)) + p_ref / s


def phi(rho, params: PhysParams):
    """Renormalized potential ``rho * int_{rho_ref}^{rho} (p(s) - p(rho_ref)) / s^2 ds``.

    Evaluated through the closed-form antiderivative, so ``phi(rho_ref) == 0``
    exactly.
    """
    r = _check_density(rho)
    p_ref = pressure(params.rho_ref, params.theta)
    F = _phi_antiderivative(r, params.theta, p_ref)
    F_ref = _phi_antiderivative(params.rho_ref, params.theta, p_ref)
    return _scalar_or_array(r * (F - F_ref))


def chemical_potential(state, grid, params: PhysParams):
    """Pointwise chemical potential ``(chi^3 - chi)/eps - (eps/rho) chi_xx``."""
    from nsac.grid import second_difference

    chi = state.chi
    chi_xx = second_difference(chi, grid, neumann=True)
    return (chi**3 - chi) / params.eps - params.eps / state.rho * chi_xx
