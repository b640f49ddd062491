# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Picard time-step kernels (same contract as ``_pykernels``)."""

import numpy as np
from libc.math cimport fabs, isfinite

OK = 0
NOT_CONVERGED = 1
OUT_OF_RANGE = 2


cdef inline double _pressure(double rho, double theta) nogil:
    return -3.0 * rho * rho + 8.0 * theta * rho / (3.0 - rho)


cdef void _thomas(const double[::1] lower, const double[::1] diag, const double[::1] upper,
                  const double[::1] rhs, double[::1] x, double[::1] cp, double[::1] dp, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double m
    m = 1.0 / diag[0]
    cp[0] = upper[0] * m
    dp[0] = rhs[0] * m
    for i in range(1, n):
        m = 1.0 / (diag[i] - lower[i] * cp[i - 1])
        cp[i] = upper[i] * m
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) * m
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]


cdef void _cyclic(const double[::1] lower, double[::1] diag, const double[::1] upper, const double[::1] rhs,
                  double[::1] x, double[::1] z, double[::1] w, double[::1] cp, double[::1] dp,
                  Py_ssize_t n) noexcept nogil:
    # Sherman-Morrison; diag is modified in place
    cdef double corner_top = lower[0]
    cdef double corner_bottom = upper[n - 1]
    cdef double gamma = -diag[0]
    cdef double fact
    cdef Py_ssize_t i
    diag[0] -= gamma
    diag[n - 1] -= corner_bottom * corner_top / gamma
    _thomas(lower, diag, upper, rhs, x, cp, dp, n)
    for i in range(n):
        w[i] = 0.0
    w[0] = gamma
    w[n - 1] = corner_bottom
    _thomas(lower, diag, upper, w, z, cp, dp, n)
    fact = (x[0] + corner_top * x[n - 1] / gamma) / (1.0 + z[0] + corner_top * z[n - 1] / gamma)
    for i in range(n):
        x[i] -= fact * z[i]


cdef class _Work:
    cdef double[::1] lower, diag, upper, rhs, z, w, cp, dp
    cdef Py_ssize_t n

    def __init__(self, Py_ssize_t n):
        self.n = n
        self.lower = np.empty(n)
        self.diag = np.empty(n)
        self.upper = np.empty(n)
        self.rhs = np.empty(n)
        self.z = np.empty(n)
        self.w = np.empty(n)
        self.cp = np.empty(n)
        self.dp = np.empty(n)

    cdef void solve(self, double[::1] x, bint periodic) noexcept nogil:
        if periodic:
            _cyclic(self.lower, self.diag, self.upper, self.rhs, x, self.z, self.w, self.cp, self.dp, self.n)
        else:
            _thomas(self.lower, self.diag, self.upper, self.rhs, x, self.cp, self.dp, self.n)


cdef _Work _work_from(lower, diag, upper, rhs):
    # copies: the cyclic solve modifies diag in place
    cdef _Work wk = _Work(len(diag))
    wk.lower = np.array(lower, dtype=float)
    wk.diag = np.array(diag, dtype=float)
    wk.upper = np.array(upper, dtype=float)
    wk.rhs = np.array(rhs, dtype=float)
    return wk


def solve_tridiagonal(lower, diag, upper, rhs):
    cdef _Work wk = _work_from(lower, diag, upper, rhs)
    x = np.empty(wk.n)
    wk.solve(x, False)
    return x


def solve_cyclic_tridiagonal(lower, diag, upper, rhs):
    cdef _Work wk = _work_from(lower, diag, upper, rhs)
    x = np.empty(wk.n)
    wk.solve(x, True)
    return x


cdef inline Py_ssize_t _nb(Py_ssize_t i, Py_ssize_t off, Py_ssize_t n, bint periodic) noexcept nogil:
    # neighbour index, -1 when it falls outside a non-periodic grid
    cdef Py_ssize_t j = i + off
    if j < 0:
        return j + n if periodic else -1
    if j >= n:
        return j - n if periodic else -1
    return j


cdef double _max_change(double[::1] a, double[::1] b, Py_ssize_t n) noexcept nogil:
    cdef double m = 0.0, d
    cdef Py_ssize_t i
    for i in range(n):
        d = fabs(a[i] - b[i])
        if not d <= m:  # also catches NaN
            m = d
    return m


def euler_step(rho0_in, u0_in, chi0_in, double dx, double dt, double nu, double eps, double theta,
               bint periodic, double tol, int maxit, double rho_floor, double rho_ceil):
    cdef double[::1] rho0 = np.ascontiguousarray(rho0_in, dtype=float)
    cdef double[::1] u0 = np.ascontiguousarray(u0_in, dtype=float)
    cdef double[::1] chi0 = np.ascontiguousarray(chi0_in, dtype=float)
    cdef Py_ssize_t n = rho0.shape[0]
    cdef _Work wk = _Work(n)
    rho_a = np.array(rho0)
    u_a = np.array(u0)
    chi_a = np.array(chi0)
    cdef double[::1] rho = rho_a
    cdef double[::1] u = u_a
    cdef double[::1] chi = chi_a
    cdef double[::1] rho_prev = np.array(rho0)
    cdef double[::1] u_prev = np.array(u0)
    cdef double[::1] chi_prev = np.array(chi0)
    cdef double[::1] p = np.empty(n)
    cdef double[::1] q = np.empty(n)
    cdef double[::1] w = np.full(n, dx)
    cdef double[::1] ap = np.empty(n)
    cdef double[::1] am = np.empty(n)
    cdef Py_ssize_t i, ip, im
    cdef int it
    cdef double a, bp, bm, k, change, c
    cdef double inv_dx = 1.0 / dx, inv_dt = 1.0 / dt, inv_dx2 = 1.0 / (dx * dx)
    if not periodic:
        w[0] = 0.5 * dx
        w[n - 1] = 0.5 * dx

    with nogil:
        for it in range(1, maxit + 1):
            # (a) mass, upwind flux form with the lagged velocity
            for i in range(n):
                ip = _nb(i, 1, n, periodic)
                if ip < 0:
                    a = 0.0
                else:
                    a = 0.5 * (u_prev[i] + u_prev[ip])
                ap[i] = a if a > 0.0 else 0.0
                am[i] = a if a < 0.0 else 0.0
            for i in range(n):
                im = _nb(i, -1, n, periodic)
                if im < 0:
                    wk.diag[i] = w[i] * inv_dt + ap[i]
                    wk.lower[i] = 0.0
                else:
                    wk.diag[i] = w[i] * inv_dt + ap[i] - am[im]
                    wk.lower[i] = -ap[im]
                wk.upper[i] = am[i]
                wk.rhs[i] = w[i] * rho0[i] * inv_dt
            wk.solve(rho, periodic)
            for i in range(n):
                if not (rho[i] > rho_floor and rho[i] < 3.0 - rho_ceil):
                    with gil:
                        return rho_a, np.asarray(u_prev).copy(), np.asarray(chi_prev).copy(), it, OUT_OF_RANGE, i

            # (b) momentum, implicit viscosity and advection
            for i in range(n):
                p[i] = _pressure(rho[i], theta)
                ip = _nb(i, 1, n, periodic)
                if ip >= 0:
                    c = (chi_prev[ip] - chi_prev[i]) * inv_dx
                    q[i] = c * c
                else:
                    q[i] = 0.0
            k = nu * inv_dx2
            for i in range(n):
                ip = _nb(i, 1, n, periodic)
                im = _nb(i, -1, n, periodic)
                if ip < 0 or im < 0:
                    wk.diag[i] = 1.0
                    wk.lower[i] = 0.0
                    wk.upper[i] = 0.0
                    wk.rhs[i] = 0.0
                    continue
                bp = rho[i] * (u_prev[i] if u_prev[i] > 0.0 else 0.0) * inv_dx
                bm = rho[i] * (u_prev[i] if u_prev[i] < 0.0 else 0.0) * inv_dx
                wk.diag[i] = rho[i] * inv_dt + bp - bm + 2.0 * k
                wk.lower[i] = -bp - k
                wk.upper[i] = bm - k
                wk.rhs[i] = (rho[i] * u0[i] * inv_dt - (p[ip] - p[im]) * 0.5 * inv_dx
                             - 0.5 * eps * (q[i] - q[im]) * inv_dx)
            wk.solve(u, periodic)
            if not periodic:
                u[0] = 0.0
                u[n - 1] = 0.0

            # (c) phase, implicit diffusion, lagged double-well term
            for i in range(n):
                bp = rho[i] * (u_prev[i] if u_prev[i] > 0.0 else 0.0) * inv_dx
                bm = rho[i] * (u_prev[i] if u_prev[i] < 0.0 else 0.0) * inv_dx
                k = eps / (rho[i] * dx * dx)
                wk.diag[i] = rho[i] * inv_dt + bp - bm + 2.0 * k
                wk.lower[i] = -bp - k
                wk.upper[i] = bm - k
                wk.rhs[i] = rho[i] * chi0[i] * inv_dt - (chi_prev[i] * chi_prev[i] * chi_prev[i] - chi_prev[i]) / eps
            if not periodic:
                wk.upper[0] += wk.lower[0]
                wk.lower[n - 1] += wk.upper[n - 1]
            wk.solve(chi, periodic)

            change = _max_change(rho, rho_prev, n)
            c = _max_change(u, u_prev, n)
            if not c <= change:
                change = c
            c = _max_change(chi, chi_prev, n)
            if not c <= change:
                change = c
            rho_prev[:] = rho
            u_prev[:] = u
            chi_prev[:] = chi
            if not isfinite(change):
                with gil:
                    return rho_a, u_a, chi_a, it, NOT_CONVERGED, -1
            if change < tol:
                with gil:
                    return rho_a, u_a, chi_a, it, OK, -1
    return rho_a, u_a, chi_a, maxit, NOT_CONVERGED, -1


def lagrange_step(v0_in, u0_in, chi0_in, double dy, double dt, double nu, double eps, double theta,
                  double tol, int maxit, double v_min, double v_max):
    cdef double[::1] v0 = np.ascontiguousarray(v0_in, dtype=float)
    cdef double[::1] u0 = np.ascontiguousarray(u0_in, dtype=float)
    cdef double[::1] chi0 = np.ascontiguousarray(chi0_in, dtype=float)
    cdef Py_ssize_t n = v0.shape[0]
    cdef _Work wk = _Work(n)
    v_a = np.array(v0)
    u_a = np.array(u0)
    chi_a = np.array(chi0)
    cdef double[::1] v = v_a
    cdef double[::1] u = u_a
    cdef double[::1] chi = chi_a
    cdef double[::1] v_prev = np.array(v0)
    cdef double[::1] u_prev = np.array(u0)
    cdef double[::1] chi_prev = np.array(chi0)
    cdef double[::1] p = np.empty(n)
    cdef double[::1] q = np.empty(n)
    cdef double[::1] vf = np.empty(n)
    cdef Py_ssize_t i, ip, im
    cdef int it
    cdef double c, k, k_left, change
    cdef double inv_dy = 1.0 / dy, inv_dt = 1.0 / dt, inv_dy2 = 1.0 / (dy * dy)

    with nogil:
        for it in range(1, maxit + 1):
            for i in range(n):
                ip = i + 1 if i + 1 < n else 0
                im = i - 1 if i > 0 else n - 1
                v[i] = v0[i] + dt * (u_prev[ip] - u_prev[im]) * 0.5 * inv_dy
            for i in range(n):
                if not (v[i] > v_min and v[i] < v_max):
                    with gil:
                        return v_a, np.asarray(u_prev).copy(), np.asarray(chi_prev).copy(), it, OUT_OF_RANGE, i
            for i in range(n):
                ip = i + 1 if i + 1 < n else 0
                p[i] = _pressure(1.0 / v[i], theta)
                vf[i] = 0.5 * (v[i] + v[ip])
                c = (chi_prev[ip] - chi_prev[i]) * inv_dy
                q[i] = c * c / (vf[i] * vf[i])
            for i in range(n):
                ip = i + 1 if i + 1 < n else 0
                im = i - 1 if i > 0 else n - 1
                k = nu / vf[i] * inv_dy2
                k_left = nu / vf[im] * inv_dy2
                wk.diag[i] = inv_dt + k + k_left
                wk.lower[i] = -k_left
                wk.upper[i] = -k
                wk.rhs[i] = (u0[i] * inv_dt - (p[ip] - p[im]) * 0.5 * inv_dy
                             - 0.5 * eps * (q[i] - q[im]) * inv_dy)
            wk.solve(u, True)
            for i in range(n):
                im = i - 1 if i > 0 else n - 1
                k = eps * v[i] / vf[i] * inv_dy2
                k_left = eps * v[i] / vf[im] * inv_dy2
                wk.diag[i] = inv_dt + k + k_left
                wk.lower[i] = -k_left
                wk.upper[i] = -k
                wk.rhs[i] = chi0[i] * inv_dt - v[i] / eps * (chi_prev[i] * chi_prev[i] * chi_prev[i] - chi_prev[i])
            wk.solve(chi, True)

            change = _max_change(v, v_prev, n)
            c = _max_change(u, u_prev, n)
            if not c <= change:
                change = c
            c = _max_change(chi, chi_prev, n)
            if not c <= change:
                change = c
            v_prev[:] = v
            u_prev[:] = u
            chi_prev[:] = chi
            if not isfinite(change):
                with gil:
                    return v_a, u_a, chi_a, it, NOT_CONVERGED, -1
            if change < tol:
                with gil:
                    return v_a, u_a, chi_a, it, OK, -1
    return v_a, u_a, chi_a, maxit, NOT_CONVERGED, -1
