import numpy as np
import pytest

from nsac import _backend, _pykernels

try:
    from nsac import _kernels
except ImportError:  # pragma: no cover - exercised only without a compiler
    _kernels = None

IMPLEMENTATIONS = [_pykernels] + ([_kernels] if _kernels is not None else [])
needs_compiled = pytest.mark.skipif(_kernels is None, reason="compiled kernels not built")


def dense(lower, diag, upper, cyclic):
    a = np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)
    if cyclic:
        a[0, -1] += lower[0]
        a[-1, 0] += upper[-1]
    return a


def diagonally_dominant(rng, n):
    lower = rng.uniform(-1, 0, n)
    upper = rng.uniform(-1, 0, n)
    diag = 2.5 + rng.uniform(0, 1, n)
    return lower, diag, upper, rng.standard_normal(n)


@pytest.mark.parametrize("impl", IMPLEMENTATIONS, ids=lambda m: m.__name__)
@pytest.mark.parametrize("n", [3, 8, 101])
def test_tridiagonal_matches_dense(impl, n, rng):
    lower, diag, upper, rhs = diagonally_dominant(rng, n)
    x = impl.solve_tridiagonal(lower, diag, upper, rhs)
    assert np.allclose(x, np.linalg.solve(dense(lower, diag, upper, False), rhs), rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("impl", IMPLEMENTATIONS, ids=lambda m: m.__name__)
@pytest.mark.parametrize("n", [3, 8, 101])
def test_cyclic_matches_dense(impl, n, rng):
    lower, diag, upper, rhs = diagonally_dominant(rng, n)
    x = impl.solve_cyclic_tridiagonal(lower, diag, upper, rhs)
    assert np.allclose(x, np.linalg.solve(dense(lower, diag, upper, True), rhs), rtol=1e-12, atol=1e-13)


def _states(rng, n, periodic):
    rho = 0.6 + 0.3 * rng.uniform(-1, 1, n)
    u = 0.1 * rng.standard_normal(n)
    chi = np.clip(0.3 + 0.5 * rng.uniform(-1, 1, n), -1, 1)
    if not periodic:
        u[0] = u[-1] = 0.0
    return rho, u, chi


@needs_compiled
@pytest.mark.parametrize("periodic", [True, False])
def test_euler_step_backends_agree(rng, periodic):
    n = 64 if periodic else 65
    args = _states(rng, n, periodic)
    common = (1.0 / 64, 1e-3, 0.1, 0.05, 0.9, periodic, 1e-12, 50, 1e-6, 1e-9)
    a = _pykernels.euler_step(*args, *common)
    b = _kernels.euler_step(*args, *common)
    assert a[4] == b[4] == _pykernels.OK
    assert a[3] == b[3]
    for fa, fb in zip(a[:3], b[:3]):
        assert np.max(np.abs(np.asarray(fa) - np.asarray(fb))) < 1e-13


@needs_compiled
def test_lagrange_step_backends_agree(rng):
    rho, u, chi = _states(rng, 64, True)
    common = (0.6 / 64, 1e-3, 0.1, 0.05, 0.9, 1e-12, 50, 1 / 3 + 1e-9, 1e6)
    a = _pykernels.lagrange_step(1 / rho, u, chi, *common)
    b = _kernels.lagrange_step(1 / rho, u, chi, *common)
    assert a[4] == b[4] == _pykernels.OK
    for fa, fb in zip(a[:3], b[:3]):
        assert np.max(np.abs(np.asarray(fa) - np.asarray(fb))) < 1e-13


@pytest.mark.parametrize("impl", IMPLEMENTATIONS, ids=lambda m: m.__name__)
def test_out_of_range_reported(impl):
    n = 32
    rho = np.full(n, 2.9)
    u = np.zeros(n)
    u[: n // 2] = 5.0  # strong compression in the middle
    chi = np.ones(n)
    *_, status, bad = impl.euler_step(rho, u, chi, 1 / n, 0.05, 0.1, 0.05, 0.9, True, 1e-10, 50, 1e-6, 1e-9)
    assert status == impl.OUT_OF_RANGE
    assert 0 <= bad < n


def test_backend_selection():
    assert _backend.get_kernels("python") is _pykernels
    assert _backend.BACKEND in ("cython", "python")
    with pytest.raises(ValueError):
        _backend.get_kernels("fortran")
