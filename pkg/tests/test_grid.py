import numpy as np
import pytest

from nsac.eos import critical_points
from nsac.grid import (
    BCMode,
    ConstructionError,
    FieldState,
    Grid,
    InvalidStateError,
    SeededRandom,
    SinePerturb,
    TanhInterface,
    Uniform,
    central_difference,
    check_compatibility,
    face_average,
    face_difference,
    make_initial,
    read_snapshot,
    second_difference,
    upwind_difference,
    with_neumann_ghosts,
    write_snapshot,
)


class TestGrid:
    def test_periodic_layout(self):
        g = Grid(2.0, 8)
        assert g.n_points == 8 and g.dx == 0.25
        assert np.allclose(g.x, 0.125 + 0.25 * np.arange(8))
        assert np.all(g.weights == 0.25)

    def test_mixed_layout(self):
        g = Grid(1.0, 8, "mixed")
        assert g.bc_mode is BCMode.MIXED and g.n_points == 9
        assert g.x[0] == 0.0 and g.x[-1] == 1.0
        assert g.weights.sum() == pytest.approx(1.0, abs=1e-15)
        assert g.weights[0] == g.weights[-1] == 0.0625

    @pytest.mark.parametrize("n", [4, 7.5])
    def test_rejects_small_or_fractional(self, n):
        with pytest.raises(ValueError, match="n_cells"):
            Grid(1.0, n)

    def test_rejects_nonpositive_length(self):
        with pytest.raises(ValueError, match="length"):
            Grid(0.0, 16)

    def test_refined(self):
        assert Grid(1.0, 16, "mixed").refined() == Grid(1.0, 32, "mixed")


class TestStencils:
    def test_exact_on_linear_interior(self, mixed_grid):
        f = 3.0 * mixed_grid.x + 1.0
        assert np.allclose(central_difference(f, mixed_grid)[1:-1], 3.0)
        assert np.allclose(face_difference(f, mixed_grid), 3.0)
        assert np.allclose(second_difference(f, mixed_grid, neumann=False)[1:-1], 0.0, atol=1e-10)

    def test_second_order_accuracy(self):
        errs = []
        for n in (32, 64, 128):
            g = Grid(1.0, n)
            f = np.sin(2 * np.pi * g.x)
            exact = -(2 * np.pi) ** 2 * f
            errs.append(np.max(np.abs(second_difference(f, g) - exact)))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.01)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.01)

    def test_translation_equivariance(self, periodic_grid, rng):
        f = rng.standard_normal(periodic_grid.n_points)
        v = rng.standard_normal(periodic_grid.n_points)
        for j in (1, 5, -3):
            for op in (face_difference, face_average, second_difference, central_difference):
                assert np.array_equal(np.roll(op(np.roll(f, j), periodic_grid), -j), op(f, periodic_grid))
            shifted = upwind_difference(np.roll(f, j), np.roll(v, j), periodic_grid)
            assert np.array_equal(np.roll(shifted, -j), upwind_difference(f, v, periodic_grid))

    def test_neumann_ghosts(self, mixed_grid, rng):
        f = rng.standard_normal(mixed_grid.n_points)
        g = with_neumann_ghosts(f)
        dx = mixed_grid.dx
        assert (g[2] - g[0]) / (2 * dx) == 0.0
        assert (g[-1] - g[-3]) / (2 * dx) == 0.0

    def test_upwind_direction(self, periodic_grid):
        f = periodic_grid.x**2
        right = upwind_difference(f, np.ones_like(f), periodic_grid)
        left = upwind_difference(f, -np.ones_like(f), periodic_grid)
        i = 10
        dx = periodic_grid.dx
        assert right[i] == pytest.approx((f[i] - f[i - 1]) / dx)
        assert left[i] == pytest.approx((f[i + 1] - f[i]) / dx)


class TestScenarios:
    def test_uniform(self, periodic_grid):
        s = make_initial(Uniform(1.0, 0.0, 1.0), periodic_grid)
        assert np.all(s.rho == 1.0) and np.all(s.u == 0.0) and np.all(s.chi == 1.0)

    def test_sine_construction_error(self, periodic_grid):
        with pytest.raises(ConstructionError):
            make_initial(SinePerturb(1.0, 2.5, 1), periodic_grid)

    def test_sine_inside_spinodal(self, periodic_grid):
        cp = critical_points(0.9)
        s = make_initial(SinePerturb(1.0, 0.1, 1), periodic_grid)
        assert cp.alpha < s.rho.min() and s.rho.max() < cp.beta
        assert np.allclose(s.rho, 1.0 + 0.1 * np.sin(2 * np.pi * periodic_grid.x))

    def test_tanh_mixed_walls(self, mixed_grid):
        s = make_initial(TanhInterface(0.3, 1.8, 0.05), mixed_grid)
        assert s.u[0] == 0.0 and s.u[-1] == 0.0
        assert s.rho[0] == pytest.approx(0.3, abs=1e-6) and s.rho[-1] == pytest.approx(1.8, abs=1e-6)
        assert s.chi.min() >= -1 and s.chi.max() <= 1

    def test_tanh_bad_width(self, periodic_grid):
        with pytest.raises(ConstructionError):
            make_initial(TanhInterface(0.3, 1.8, 0.0), periodic_grid)

    def test_seeded_random_reproducible(self, periodic_grid):
        a = make_initial(SeededRandom(1.0, 0.1, seed=3), periodic_grid)
        b = make_initial(SeededRandom(1.0, 0.1, seed=3), periodic_grid)
        c = make_initial(SeededRandom(1.0, 0.1, seed=4), periodic_grid)
        for f in ("rho", "u", "chi"):
            assert np.array_equal(getattr(a, f), getattr(b, f))
        assert not np.array_equal(a.rho, c.rho)

    def test_unknown_scenario(self, periodic_grid):
        with pytest.raises(TypeError):
            make_initial(object(), periodic_grid)


class TestFieldState:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            FieldState(np.ones(4), np.ones(3), np.ones(4))

    def test_validate(self):
        ok = FieldState(np.full(8, 0.5), np.zeros(8), np.ones(8))
        assert ok.validate() is ok
        with pytest.raises(InvalidStateError, match="rho"):
            FieldState(np.full(8, 3.0), np.zeros(8), np.ones(8)).validate()
        with pytest.raises(InvalidStateError, match="chi"):
            FieldState(np.full(8, 0.5), np.zeros(8), np.full(8, 1.1)).validate()
        FieldState(np.full(8, 0.5), np.zeros(8), np.full(8, 1 + 1e-7)).validate()


class TestCompatibility:
    def test_pure_phase(self, params, periodic_grid):
        s = make_initial(Uniform(0.7, 0.0, 1.0), periodic_grid)
        assert np.all(check_compatibility(s, periodic_grid, params) == 0.0)

    def test_constant_phase(self, params, periodic_grid):
        c, rho = 0.4, 0.7
        s = make_initial(Uniform(rho, 0.0, c), periodic_grid)
        assert np.allclose(check_compatibility(s, periodic_grid, params), -(c**3 - c) / (params.eps * rho))

    def test_matches_small_solver_step(self, params):
        from nsac.solver_euler import StepControl, step

        grid = Grid(1.0, 64)
        s0 = make_initial(SinePerturb(0.5, 0.1, 1, chi_mean=0.0, chi_amplitude=0.5), grid)
        dt = 1e-8
        s1 = step(s0, grid, params, StepControl(picard_tol=1e-14), dt=dt)
        chi_t = check_compatibility(s0, grid, params)
        assert np.max(np.abs((s1.chi - s0.chi) / dt - chi_t)) < 1e-4 * np.max(np.abs(chi_t))


def test_snapshot_round_trip(tmp_path, rng):
    g = Grid(1.0, 16)
    s = FieldState(rng.uniform(0.1, 2.0, 16), rng.standard_normal(16), rng.uniform(-1, 1, 16))
    path = tmp_path / "snap.csv"
    write_snapshot(path, s, g.x)
    assert path.read_text().splitlines()[0] == "x,rho,u,chi"
    x, back = read_snapshot(path)
    assert np.array_equal(x, g.x)
    for f in ("rho", "u", "chi"):
        assert np.array_equal(getattr(back, f), getattr(s, f))
