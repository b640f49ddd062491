import math

import numpy as np
import pytest

from nsac.diagnostics import (
    LEDGER_COLUMNS,
    EnergyLedger,
    NotApplicableError,
    assert_theorem_bounds,
    energy_budget,
    ledger,
    read_ledger_csv,
    sobolev_check,
    sobolev_rhs,
    write_ledger_csv,
)
from nsac.grid import BCMode, FieldState, Grid, SinePerturb, Uniform, make_initial
from nsac.solver_euler import StepControl, simulate


def _row(t, energy=1.0, dissipation=0.0, chi_max=1.0, mass=1.0):
    return EnergyLedger(t, mass, 0.0, 0.0, 0.0, energy, energy, dissipation,
                        0.5, 1.5, -1.0, chi_max, 2.0, 0.0)


class TestLedger:
    @pytest.mark.parametrize("bc", ["periodic", "mixed"])
    def test_reference_state(self, params, bc):
        grid = Grid(1.0, 32, bc)
        row = ledger(make_initial(Uniform(params.rho_ref, 0.0, 1.0), grid), grid, params)
        assert row.mass == pytest.approx(params.rho_ref, rel=1e-15)
        assert row.energy_total == 0.0
        assert row.dissipation_rate == 0.0

    def test_kinetic(self, params, periodic_grid):
        row = ledger(make_initial(Uniform(0.7, 0.4, 1.0), periodic_grid), periodic_grid, params)
        assert row.kinetic == pytest.approx(0.7 * 0.4**2 / 2, rel=1e-14)

    def test_kinetic_quadruples(self, params, periodic_grid):
        s = make_initial(SinePerturb(0.5, 0.1, 1, chi_mean=0.0, chi_amplitude=0.5), periodic_grid)
        s.u = 0.1 * np.cos(2 * np.pi * periodic_grid.x)
        a = ledger(s, periodic_grid, params)
        s2 = s.copy()
        s2.u = 2 * s.u
        b = ledger(s2, periodic_grid, params)
        assert b.kinetic == 4 * a.kinetic
        for name in ("gradient", "phi_pot", "well", "mass"):
            assert getattr(b, name) == getattr(a, name)

    def test_gradient_second_order(self, params):
        exact = params.eps / 2 * (2 * np.pi) ** 2 / 2  # int (eps/2) (2 pi cos)^2 over [0, 1]
        errs = []
        for n in (32, 64, 128):
            g = Grid(1.0, n)
            s = FieldState(np.ones(n), np.zeros(n), np.sin(2 * np.pi * g.x))
            errs.append(abs(ledger(s, g, params).gradient - exact))
        assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
        assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)

    def test_components_sum(self, params, periodic_grid):
        s = make_initial(SinePerturb(0.5, 0.1, 1, chi_mean=0.0, chi_amplitude=0.5), periodic_grid)
        r = ledger(s, periodic_grid, params)
        assert r.energy_total == r.kinetic + r.gradient + r.phi_pot + r.well
        assert r.dissipation_rate >= 0
        assert all(math.isfinite(v) for v in r.row(extended=True))


class TestEnergyBudget:
    def test_single_row(self):
        b = energy_budget([_row(0.0)])
        assert list(b.residual) == [0.0]

    def test_steady(self):
        b = energy_budget([_row(0.1 * k) for k in range(5)])
        assert np.all(b.residual == 0.0) and b.max_relative == 0.0

    def test_left_endpoint_rule(self):
        rows = [_row(0.0, 1.0, 2.0), _row(0.5, 0.0, 0.0), _row(1.0, 0.0, 0.0)]
        b = energy_budget(rows)
        assert b.residual == pytest.approx([0.0, 0.0, 0.0])

    def test_zero_energy_reports_absolute(self):
        b = energy_budget([_row(0.0, 0.0), _row(1.0, 0.5)])
        assert not b.relative and b.max_relative == 0.5

    def test_empty(self):
        with pytest.raises(ValueError):
            energy_budget([])

    def test_budget_shrinks_with_refinement(self, params):
        out = []
        for n in (64, 128):
            g = Grid(1.0, n)
            s = make_initial(SinePerturb(0.5, 0.1, 1, chi_mean=0.0, chi_amplitude=0.5), g)
            traj = simulate(s, g, params, StepControl(t_end=0.2))
            out.append(energy_budget(traj.rows).max_relative)
        assert out[1] < out[0]


class TestSobolev:
    def test_uniform_slack(self, periodic_grid):
        rho = 0.8
        s = make_initial(Uniform(rho), periodic_grid)
        mass = rho * periodic_grid.length
        assert sobolev_check(s, periodic_grid, mass) == pytest.approx(1 / rho, rel=1e-14)
        assert sobolev_rhs(s, periodic_grid, mass) == pytest.approx(2 / rho, rel=1e-14)

    def test_mixed_not_applicable(self, mixed_grid):
        s = make_initial(Uniform(0.8), mixed_grid)
        with pytest.raises(NotApplicableError):
            sobolev_check(s, mixed_grid, 0.8)

    def test_refinement(self):
        vals = []
        for n in (64, 128, 256):
            g = Grid(1.0, n)
            s = make_initial(SinePerturb(1.0, 0.5, 1), g)
            vals.append(sobolev_check(s, g, 1.0))
        assert abs(vals[1] - vals[2]) < abs(vals[0] - vals[1]) / 3


class TestBounds:
    def test_steady(self):
        rep = assert_theorem_bounds([_row(0.1 * k) for k in range(3)])
        assert rep.passed and rep.mass_drift == 0.0 and rep.first_violation_time is None

    def test_chi_excursion(self):
        rows = [_row(0.0), _row(0.5, chi_max=1.1), _row(1.0)]
        rep = assert_theorem_bounds(rows)
        assert not rep.passed and not rep.chi_ok and rep.rho_ok
        assert rep.first_violation_time == 0.5
        assert rep.chi_max == 1.1

    def test_drift(self):
        rep = assert_theorem_bounds([_row(0.0, mass=1.0), _row(1.0, mass=1.0 + 1e-9)])
        assert rep.mass_drift == pytest.approx(1e-9)


def test_csv_round_trip(tmp_path, params, periodic_grid):
    s = make_initial(SinePerturb(0.5, 0.1, 1, chi_mean=0.0, chi_amplitude=0.5), periodic_grid)
    traj = simulate(s, periodic_grid, params, StepControl(t_end=0.02))
    path = tmp_path / "ledger.csv"
    write_ledger_csv(path, traj.rows)
    assert path.read_text().splitlines()[0] == ",".join(LEDGER_COLUMNS)
    back = read_ledger_csv(path)
    assert [r.row() for r in back] == [r.row() for r in traj.rows]
    write_ledger_csv(path, traj.rows, extended=True)
    assert [r.row(True) for r in read_ledger_csv(path)] == [r.row(True) for r in traj.rows]


def test_mixed_ledger_mass(params):
    g = Grid(1.0, 16, BCMode.MIXED)
    row = ledger(make_initial(Uniform(0.6), g), g, params)
    assert row.mass == pytest.approx(0.6, rel=1e-15)
