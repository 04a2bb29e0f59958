"""Tests for the perturbative global driver and its ledger.

The key independent check here is the residual oracle: the reconstructed
trajectory u = v + w is plugged back into the full equation with a central
time difference, and the residual has to shrink second order under step
halving.  That route never touches the driver's own bookkeeping.
"""
import itertools
import math

import numpy as np
import pytest
from numpy.random import default_rng

from cqnls import (
    EquationParams,
    GwpConfig,
    GwpLedger,
    GwpLedgerRow,
    NoContractionError,
    SolverConfig,
    SpectralField,
    TimeInterval,
    TorusGrid,
    constant_field,
    evaluate_nonlinearity,
    evolve,
    mass,
    mode_field,
    run_gwp_scheme,
    sobolev_norm,
    solve_difference_equation,
    solve_quintic_reference,
    zero_field,
)

BUDGET_EXPONENT = 1.0 / 20.0


def decaying_field(grid, h1, seed):
    rng = default_rng(seed)
    shape = grid.lattice_shape
    c = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    c = c / (1.0 + grid.symbol_sq)
    f = SpectralField(grid, c)
    return SpectralField(grid, c * (h1 / sobolev_norm(f, 1.0)))


def h1_gap(grid, a, b):
    d = a - b
    w = grid.japanese_bracket_sq
    return float(np.sqrt(np.sum(w * (d.real**2 + d.imag**2))))


class TestQuinticReference:
    def test_zero_data_stays_zero(self, medium_grid):
        traj, report = solve_quintic_reference(
            zero_field(medium_grid), TimeInterval(0.0, 0.5), SolverConfig(dt=0.05))
        assert np.all(traj.coeffs == 0)
        assert report.mass == 0.0
        assert report.z_norm == 0.0

    def test_constant_data_rotates_exactly(self, small_grid):
        # constant data sees no dispersion, so the flow is the exact phase
        # rotation exp(-i |c|^4 t) and the splitting commits no error
        c = 0.7
        u0 = constant_field(small_grid, c)
        interval = TimeInterval(0.0, 0.5)
        traj, _ = solve_quintic_reference(u0, interval, SolverConfig(dt=0.05))
        for k in range(traj.node_count):
            expected = u0.coeffs * np.exp(-1j * c**4 * traj.times[k])
            assert np.max(np.abs(traj.coeffs[k] - expected)) < 1e-10

    def test_report_tracks_interval_and_mass(self, small_grid):
        u0 = decaying_field(small_grid, 0.4, 3)
        interval = TimeInterval(0.0, 0.3)
        traj, report = solve_quintic_reference(u0, interval, SolverConfig(dt=0.01))
        assert report.t_start == interval.start
        assert report.t_end == traj.times[-1]
        assert report.mass == pytest.approx(mass(u0), rel=1e-9)
        assert report.zprime_proxy > 0.0

    def test_rejects_long_intervals(self, small_grid):
        with pytest.raises(ValueError):
            solve_quintic_reference(
                zero_field(small_grid), TimeInterval(0.0, 1.2), SolverConfig(dt=0.05))


class TestDifferenceEquation:
    def test_zero_mu1_means_zero_correction(self, small_grid):
        v, _ = solve_quintic_reference(
            decaying_field(small_grid, 0.4, 11), TimeInterval(0.0, 0.2),
            SolverConfig(dt=0.01))
        w = solve_difference_equation(v, TimeInterval(0.0, 0.2), 0.0,
                                      SolverConfig(dt=0.01))
        # the forcing cancels identically when mu1 = 0, so every Picard
        # sweep reproduces the zero iterate without roundoff
        assert np.all(w.coeffs == 0)

    def test_correction_scales_linearly_in_mu1(self, small_grid):
        v, _ = solve_quintic_reference(
            decaying_field(small_grid, 0.4, 11), TimeInterval(0.0, 0.2),
            SolverConfig(dt=0.01))
        sizes = {}
        for mu1 in (1e-3, 2e-3):
            w = solve_difference_equation(v, TimeInterval(0.0, 0.2), mu1,
                                          SolverConfig(dt=0.01))
            sizes[mu1] = float(np.max(w.h1_series))
        assert sizes[1e-3] > 0.0
        assert sizes[2e-3] / sizes[1e-3] == pytest.approx(2.0, abs=0.01)

    def test_correction_lives_on_reference_nodes(self, small_grid):
        v, _ = solve_quintic_reference(
            decaying_field(small_grid, 0.3, 5), TimeInterval(0.0, 0.2),
            SolverConfig(dt=0.01))
        window = TimeInterval(0.05, 0.15)
        w = solve_difference_equation(v, window, -0.5, SolverConfig(dt=0.01))
        assert np.array_equal(w.times, v.restrict(window).times)
        assert w.params == EquationParams(-0.5, 1.0)

    def test_carried_start_is_kept_at_first_node(self, small_grid):
        v, _ = solve_quintic_reference(
            decaying_field(small_grid, 0.3, 5), TimeInterval(0.0, 0.2),
            SolverConfig(dt=0.01))
        w_start = SpectralField(small_grid, 1e-4 * decaying_field(small_grid, 1.0, 9).coeffs)
        w = solve_difference_equation(v, TimeInterval(0.0, 0.2), -0.5,
                                      SolverConfig(dt=0.01), w_start=w_start)
        assert np.max(np.abs(w.coeffs[0] - w_start.coeffs)) < 1e-15

    def test_needs_two_reference_nodes(self, small_grid):
        v, _ = solve_quintic_reference(
            decaying_field(small_grid, 0.3, 5), TimeInterval(0.0, 0.2),
            SolverConfig(dt=0.01))
        with pytest.raises(ValueError):
            solve_difference_equation(v, TimeInterval(0.002, 0.008), -0.5,
                                      SolverConfig(dt=0.01))


class TestResidualOracle:
    def test_reconstruction_satisfies_equation_second_order(self, small_grid):
        u0 = decaying_field(small_grid, 0.35, 7)
        mu1 = -0.8
        interval = TimeInterval(0.0, 0.24)
        params = EquationParams(mu1, 1.0)
        sym = small_grid.symbol_sq

        def worst_residual(traj):
            worst = 0.0
            for k in range(1, traj.node_count - 1):
                hp = traj.times[k + 1] - traj.times[k]
                hm = traj.times[k] - traj.times[k - 1]
                up, uk, um = traj.coeffs[k + 1], traj.coeffs[k], traj.coeffs[k - 1]
                # three-point derivative, exact on quadratics even when the
                # window boundary shortens a step
                du = (hm**2 * up - hp**2 * um + (hp**2 - hm**2) * uk) \
                    / (hp * hm * (hp + hm))
                f = evaluate_nonlinearity(traj.field(k), params).coeffs
                r = 1j * du - sym * uk - f
                worst = max(worst, float(np.sqrt(np.sum(r.real**2 + r.imag**2))))
            return worst

        residuals = []
        for dt in (0.012, 0.006):
            cfg = GwpConfig(solver=SolverConfig(dt=dt), eta=0.5, eta_tilde=0.12)
            traj, _ = run_gwp_scheme(u0, interval, mu1, cfg)
            residuals.append(worst_residual(traj))
        assert residuals[0] < 5e-3
        assert residuals[1] < 5e-4
        assert 3.0 < residuals[0] / residuals[1] < 5.0


class TestDegenerateLimit:
    def test_tiny_mu1_matches_quintic_reference(self, small_grid):
        u0 = decaying_field(small_grid, 0.4, 13)
        interval = TimeInterval(0.0, 0.3)
        solver = SolverConfig(dt=0.01)
        cfg = GwpConfig(solver=solver, eta=0.5, eta_tilde=0.15)
        traj, ledger = run_gwp_scheme(u0, interval, 1e-8, cfg)
        ref, _ = solve_quintic_reference(u0, interval, solver)
        assert traj.node_count == ref.node_count
        assert np.max(np.abs(traj.times - ref.times)) < 1e-9
        gaps = [h1_gap(small_grid, traj.coeffs[k], ref.coeffs[k])
                for k in range(traj.node_count)]
        assert max(gaps) < 1e-6
        assert ledger.all_passed


class TestAgainstDirectSolve:
    def test_plane_wave_agrees_with_direct_solve(self):
        grid = TorusGrid(3)
        u0 = mode_field(grid, (1, 0, 0), 0.5)
        interval = TimeInterval(0.0, 0.3)
        cfg = GwpConfig(solver=SolverConfig(dt=0.01), eta=0.5, eta_tilde=0.15)
        traj, ledger = run_gwp_scheme(u0, interval, -1.0, cfg)
        direct = evolve(u0, interval, EquationParams(-1.0, 1.0), SolverConfig(dt=0.01))
        assert h1_gap(grid, traj.coeffs[-1], direct.coeffs[-1]) < 1e-12
        assert ledger.all_passed

    def test_small_data_gap_shrinks_with_dt(self, small_grid):
        u0 = decaying_field(small_grid, 0.35, 7)
        interval = TimeInterval(0.0, 0.24)
        params = EquationParams(-0.8, 1.0)
        gaps = []
        for dt in (0.02, 0.01, 0.005):
            cfg = GwpConfig(solver=SolverConfig(dt=dt), eta=0.5, eta_tilde=0.12)
            traj, _ = run_gwp_scheme(u0, interval, -0.8, cfg)
            direct = evolve(u0, interval, params, SolverConfig(dt=dt))
            gaps.append(h1_gap(small_grid, traj.coeffs[-1], direct.coeffs[-1]))
        assert gaps[0] < 1e-10
        assert gaps[0] > gaps[1] > gaps[2]

    def test_mass_is_conserved_by_reconstruction(self, small_grid):
        u0 = decaying_field(small_grid, 0.4, 21)
        interval = TimeInterval(0.0, 0.3)
        cfg = GwpConfig(solver=SolverConfig(dt=0.01), eta=0.5, eta_tilde=0.15)
        traj, _ = run_gwp_scheme(u0, interval, -1.0, cfg)
        m0 = mass(u0)
        drift = max(abs(mass(traj.field(k)) - m0) for k in range(traj.node_count))
        assert drift / m0 < 1e-8
        assert np.all(np.diff(traj.times) > 0)


@pytest.fixture(scope="module")
def run():
    grid = TorusGrid(3)
    u0 = mode_field(grid, (1, 0, 0), 0.5)
    cfg = GwpConfig(solver=SolverConfig(dt=0.01), eta=0.5, eta_tilde=0.15)
    traj, ledger = run_gwp_scheme(u0, TimeInterval(0.0, 0.3), -1.0, cfg)
    return cfg, traj, ledger


class TestLedger:
    def test_rows_tile_the_interval(self, run):
        cfg, traj, ledger = run
        assert len(ledger.rows) >= 2
        spans = []
        for window, rows in itertools.groupby(ledger.rows, key=lambda r: r.window):
            rows = list(rows)
            for a, b in zip(rows, rows[1:]):
                assert a.t_end == b.t_start
            spans.append((rows[0].t_start, rows[-1].t_end))
        assert math.isclose(spans[0][0], traj.times[0], abs_tol=1e-12)
        assert math.isclose(spans[-1][1], traj.times[-1], abs_tol=1e-12)
        for (_, end), (start, _) in zip(spans, spans[1:]):
            assert math.isclose(end, start, abs_tol=1e-12)

    def test_piece_counter_is_global_and_consecutive(self, run):
        _, _, ledger = run
        assert [r.j for r in ledger.rows] == list(range(len(ledger.rows)))
        assert [r.window for r in ledger.rows] == sorted(r.window for r in ledger.rows)

    def test_budgets_follow_the_inductive_formula(self, run):
        cfg, _, ledger = run
        lengths = {}
        for r in ledger.rows:
            lo, hi = lengths.get(r.window, (r.t_start, r.t_end))
            lengths[r.window] = (min(lo, r.t_start), max(hi, r.t_end))
        for r in ledger.rows:
            span = lengths[r.window][1] - lengths[r.window][0]
            expected = (2.0 * cfg.budget_c) ** r.j * span**BUDGET_EXPONENT
            assert r.budget == pytest.approx(expected, rel=1e-12)
        budgets = [r.budget for r in ledger.rows]
        assert budgets == sorted(budgets)

    def test_reference_smallness_respected(self, run):
        cfg, _, ledger = run
        for r in ledger.rows:
            assert r.zprime_v <= cfg.eta + 1e-9
            assert r.w_measure >= 0.0

    def test_pass_flags_are_consistent(self, run):
        _, _, ledger = run
        for r in ledger.rows:
            assert r.passed == (r.w_measure <= r.budget)
        assert ledger.all_passed == all(r.passed for r in ledger.rows)
        assert ledger.retries == 0
        assert ledger.eta_tilde == 0.15

    def test_csv_round_trip(self, run):
        _, _, ledger = run
        assert GwpLedger.from_csv(ledger.to_csv()) == ledger

    def test_json_round_trip(self, run):
        _, _, ledger = run
        assert GwpLedger.from_json(ledger.to_json()) == ledger

    def test_csv_rejects_foreign_tables(self):
        with pytest.raises(ValueError):
            GwpLedger.from_csv("# budget_c=2.0\n# eta=0.3\n# eta_tilde=0.25\n"
                               "# retries=0\nnot,the,right,header\n")

    def test_row_is_frozen(self):
        row = GwpLedgerRow(window=0, j=0, t_start=0.0, t_end=0.1,
                           zprime_v=0.1, w_measure=0.0, budget=1.0, passed=True)
        with pytest.raises(AttributeError):
            row.budget = 2.0


class TestRetries:
    def test_exhausted_retries_raise(self, small_grid):
        u0 = decaying_field(small_grid, 0.4, 17)
        solver = SolverConfig(dt=0.01, picard_max_iters=3, picard_tol=1e-30)
        cfg = GwpConfig(solver=solver, eta=0.5, eta_tilde=0.2, max_retries=1)
        with pytest.raises(NoContractionError):
            run_gwp_scheme(u0, TimeInterval(0.0, 0.4), -1.0, cfg)

    def test_config_validation(self):
        solver = SolverConfig(dt=0.01)
        with pytest.raises(ValueError):
            GwpConfig(solver=solver, eta=0.0)
        with pytest.raises(ValueError):
            GwpConfig(solver=solver, eta_tilde=1.5)
        with pytest.raises(ValueError):
            GwpConfig(solver=solver, budget_c=0.4)
        with pytest.raises(ValueError):
            GwpConfig(solver=solver, max_retries=-1)
