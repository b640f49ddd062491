"""NumPy implementation of the Picard time-step kernels.

Mirrors ``_kernels.pyx`` operation for operation; used when the compiled
extension is unavailable or ``NSAC_BACKEND=python`` is set.

Every step returns ``(a, b, chi, iterations, status, bad_index)`` with
``status`` one of ``OK``, ``NOT_CONVERGED`` or ``OUT_OF_RANGE``.
"""

import numpy as np
from scipy.linalg import solve_banded

OK = 0
NOT_CONVERGED = 1
OUT_OF_RANGE = 2


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve ``lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]``.

    ``lower[0]`` and ``upper[-1]`` are ignored.
    """
    n = len(diag)
    ab = np.empty((3, n))
    ab[0, 1:] = upper[:-1]
    ab[0, 0] = 0.0
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    ab[2, -1] = 0.0
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def solve_cyclic_tridiagonal(lower, diag, upper, rhs):
    """Periodic tridiagonal solve; ``lower[0]`` couples row 0 to ``x[-1]`` and
    ``upper[-1]`` couples the last row to ``x[0]``. Sherman-Morrison correction.
    """
    corner_top = lower[0]
    corner_bottom = upper[-1]
    gamma = -diag[0]
    d = np.array(diag, dtype=float)
    d[0] -= gamma
    d[-1] -= corner_bottom * corner_top / gamma
    x = solve_tridiagonal(lower, d, upper, rhs)
    w = np.zeros(len(diag))
    w[0] = gamma
    w[-1] = corner_bottom
    z = solve_tridiagonal(lower, d, upper, w)
    fact = (x[0] + corner_top * x[-1] / gamma) / (1.0 + z[0] + corner_top * z[-1] / gamma)
    return x - fact * z


def _solve(lower, diag, upper, rhs, periodic):
    if periodic:
        return solve_cyclic_tridiagonal(lower, diag, upper, rhs)
    return solve_tridiagonal(lower, diag, upper, rhs)


def _pressure(rho, theta):
    return -3.0 * rho * rho + 8.0 * theta * rho / (3.0 - rho)


def _shift(f, periodic, offset, fill):
    """``f[i + offset]`` with wrap or constant fill beyond the ends."""
    if periodic:
        return np.roll(f, -offset)
    out = np.full_like(f, fill)
    if offset > 0:
        out[:-offset] = f[offset:]
    else:
        out[-offset:] = f[:offset]
    return out


def _mass_solve(rho0, u_lag, dx, dt, periodic):
    n = len(rho0)
    w = np.full(n, dx)
    if not periodic:
        w[0] = w[-1] = 0.5 * dx
    a = 0.5 * (u_lag + _shift(u_lag, periodic, 1, 0.0))
    if not periodic:
        a[-1] = 0.0  # no face beyond the right wall
    ap = np.maximum(a, 0.0)
    am = np.minimum(a, 0.0)
    ap_left = _shift(ap, periodic, -1, 0.0)
    am_left = _shift(am, periodic, -1, 0.0)
    diag = w / dt + ap - am_left
    upper = am.copy()
    lower = -ap_left
    return _solve(lower, diag, upper, w * rho0 / dt, periodic)


def _momentum_solve(rho, u0, u_lag, chi_lag, dx, dt, nu, eps, theta, periodic):
    p = _pressure(rho, theta)
    grad_p = (_shift(p, periodic, 1, 0.0) - _shift(p, periodic, -1, 0.0)) / (2.0 * dx)
    q = ((_shift(chi_lag, periodic, 1, 0.0) - chi_lag) / dx) ** 2
    cap = 0.5 * eps * (q - _shift(q, periodic, -1, 0.0)) / dx
    bp = rho * np.maximum(u_lag, 0.0) / dx
    bm = rho * np.minimum(u_lag, 0.0) / dx
    k = nu / dx**2
    diag = rho / dt + bp - bm + 2.0 * k
    lower = -bp - k
    upper = bm - k
    rhs = rho * u0 / dt - grad_p - cap
    if not periodic:
        for i in (0, len(rho) - 1):
            diag[i], lower[i], upper[i], rhs[i] = 1.0, 0.0, 0.0, 0.0
    u = _solve(lower, diag, upper, rhs, periodic)
    if not periodic:
        u[0] = u[-1] = 0.0
    return u


def _phase_solve(rho, chi0, u_lag, chi_lag, dx, dt, eps, periodic):
    bp = rho * np.maximum(u_lag, 0.0) / dx
    bm = rho * np.minimum(u_lag, 0.0) / dx
    k = eps / (rho * dx**2)
    diag = rho / dt + bp - bm + 2.0 * k
    lower = -bp - k
    upper = bm - k
    if not periodic:
        # mirrored ghost: chi[-1] = chi[1], chi[n+1] = chi[n-1]
        upper[0] += lower[0]
        lower[-1] += upper[-1]
    rhs = rho * chi0 / dt - (chi_lag**3 - chi_lag) / eps
    return _solve(lower, diag, upper, rhs, periodic)


def euler_step(rho0, u0, chi0, dx, dt, nu, eps, theta, periodic, tol, maxit, rho_floor, rho_ceil):
    """One backward-Euler step of the Euler-coordinate system by Picard iteration."""
    rho0 = np.asarray(rho0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    chi0 = np.asarray(chi0, dtype=float)
    rho_prev, u_prev, chi_prev = rho0, u0, chi0
    for it in range(1, maxit + 1):
        rho = _mass_solve(rho0, u_prev, dx, dt, periodic)
        bad = np.flatnonzero(~((rho > rho_floor) & (rho < 3.0 - rho_ceil)))
        if bad.size:
            return rho, u_prev, chi_prev, it, OUT_OF_RANGE, int(bad[0])
        u = _momentum_solve(rho, u0, u_prev, chi_prev, dx, dt, nu, eps, theta, periodic)
        chi = _phase_solve(rho, chi0, u_prev, chi_prev, dx, dt, eps, periodic)
        change = max(
            np.max(np.abs(rho - rho_prev)), np.max(np.abs(u - u_prev)), np.max(np.abs(chi - chi_prev))
        )
        rho_prev, u_prev, chi_prev = rho, u, chi
        if not np.isfinite(change):
            return rho, u, chi, it, NOT_CONVERGED, -1
        if change < tol:
            return rho, u, chi, it, OK, -1
    return rho_prev, u_prev, chi_prev, maxit, NOT_CONVERGED, -1


def lagrange_step(v0, u0, chi0, dy, dt, nu, eps, theta, tol, maxit, v_min, v_max):
    """One backward-Euler Picard step of the mass-coordinate system (periodic)."""
    v0 = np.asarray(v0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    chi0 = np.asarray(chi0, dtype=float)
    v_prev, u_prev, chi_prev = v0, u0, chi0
    for it in range(1, maxit + 1):
        v = v0 + dt * (np.roll(u_prev, -1) - np.roll(u_prev, 1)) / (2.0 * dy)
        bad = np.flatnonzero(~((v > v_min) & (v < v_max)))
        if bad.size:
            return v, u_prev, chi_prev, it, OUT_OF_RANGE, int(bad[0])
        p = _pressure(1.0 / v, theta)
        vf = 0.5 * (v + np.roll(v, -1))
        q = ((np.roll(chi_prev, -1) - chi_prev) / dy) ** 2 / vf**2
        k = nu / (vf * dy**2)
        k_left = np.roll(k, 1)
        rhs = u0 / dt - (np.roll(p, -1) - np.roll(p, 1)) / (2.0 * dy) - 0.5 * eps * (q - np.roll(q, 1)) / dy
        u = solve_cyclic_tridiagonal(-k_left, 1.0 / dt + k + k_left, -k, rhs)

        kc = eps * v / (vf * dy**2)
        kc_left = eps * v / (np.roll(vf, 1) * dy**2)
        rhs = chi0 / dt - v / eps * (chi_prev**3 - chi_prev)
        chi = solve_cyclic_tridiagonal(-kc_left, 1.0 / dt + kc + kc_left, -kc, rhs)

        change = max(
            np.max(np.abs(v - v_prev)), np.max(np.abs(u - u_prev)), np.max(np.abs(chi - chi_prev))
        )
        v_prev, u_prev, chi_prev = v, u, chi
        if not np.isfinite(change):
            return v, u, chi, it, NOT_CONVERGED, -1
        if change < tol:
            return v, u, chi, it, OK, -1
    return v_prev, u_prev, chi_prev, maxit, NOT_CONVERGED, -1
