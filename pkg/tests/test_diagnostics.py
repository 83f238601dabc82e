import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhdlab import diagnostics as dg
from mhdlab.errors import ConfigurationError, MissingSnapshotError
from mhdlab.fields import FieldSpec, random_solenoidal
from mhdlab.solver import MHDState, SolverConfig, run
from mhdlab.spectral import build_grid, heat_multiplier, to_physical, transform_forward

TWO_PI = 2 * math.pi


def state_of(u, B, grid, t=0.0, delta=1.0):
    return MHDState(t=t, u=u, B=B, delta=delta, grid=grid)


def sine_state(grid, t=0.0):
    X = grid.coords()
    u = transform_forward(np.stack([np.zeros_like(X[0]), np.sin(X[0])]), grid)
    return state_of(u, np.zeros_like(u), grid, t=t)


@pytest.fixture(scope="module")
def grid():
    return build_grid(2, 32, TWO_PI)


class TestEnergy:
    def test_zero(self, grid):
        z = np.zeros((2, 32, 32), dtype=complex)
        assert dg.energy(state_of(z, z, grid)) == (0.0, 0.0)

    def test_sine(self, grid):
        E_u, E_B = dg.energy(sine_state(grid))
        assert E_u == pytest.approx(2 * math.pi**2, rel=1e-14)
        assert E_B == 0.0

    def test_matches_physical_quadrature(self, grid):
        u = random_solenoidal(grid, seed=3)
        B = random_solenoidal(grid, norm=0.2, seed=4)
        E_u, E_B = dg.energy(state_of(u, B, grid))
        for E, v in ((E_u, u), (E_B, B)):
            assert E == pytest.approx(grid.dx**2 * np.sum(to_physical(v, grid) ** 2), rel=1e-10)


class TestEnergyBalance:
    def test_empty(self, grid):
        s = dg.Series(records=[], delta=1.0, grid=grid)
        with pytest.raises(ValueError):
            dg.energy_balance_residual(s)

    @pytest.mark.parametrize("N", [16, 64])
    @pytest.mark.parametrize("delta", [0.0, 0.3, 1.0])
    def test_linear_run_exact(self, N, delta):
        g = build_grid(2, N, TWO_PI)
        u = random_solenoidal(g, k_hi=5.0, seed=1)
        B = random_solenoidal(g, k_hi=5.0, seed=2)
        cfg = SolverConfig(dt=1e-2, T=0.5, nonlinear=False, record_every=5)
        assert dg.energy_balance_residual(run(u, B, delta, cfg, g)) <= 1e-8

    def test_increment_exact_for_decay(self):
        k2 = np.arange(1.0, 40.0) ** 2
        before, after = k2 * np.exp(-2 * k2 * 0.1), k2 * np.exp(-2 * k2 * 0.15)
        exact = np.sum((np.exp(-2 * k2 * 0.1) - np.exp(-2 * k2 * 0.15)) / 2)
        assert dg.dissipation_increment(before, after, 0.05) == pytest.approx(exact, rel=1e-13)

    def test_increment_constant_and_zero(self):
        a = np.array([2.0, 0.0, 3.0])
        b = np.array([2.0, 5.0, 3.0 * (1 + 1e-9)])
        assert dg.dissipation_increment(a, b, 0.5) == pytest.approx(0.5 * (2.0 + 3.0), rel=1e-8)


class TestFrequencySplit:
    def test_initial_time_all_low(self, grid):
        s = state_of(random_solenoidal(grid, seed=1), random_solenoidal(grid, seed=2), grid)
        lo_u, hi_u, lo_B, hi_B = dg.frequency_split(s, "gaussian_t")
        assert lo_u == pytest.approx(1.0) and hi_u == 0.0
        assert lo_B == pytest.approx(1.0) and hi_B == 0.0

    def test_single_mode_fixed_weight(self, grid):
        s = sine_state(grid, t=0.7)
        norm = math.sqrt(dg.energy(s)[0])
        lo, hi, _, _ = dg.frequency_split(s, "gaussian_fixed")
        assert lo == pytest.approx(math.exp(-1) * norm, rel=1e-13)
        assert hi == pytest.approx((1 - math.exp(-1)) * norm, rel=1e-13)

    def test_unknown_weight(self, grid):
        with pytest.raises(ConfigurationError):
            dg.frequency_split(sine_state(grid), "box")

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31), t=st.floats(0.0, 5.0),
           weight=st.sampled_from(dg.SPLIT_WEIGHTS))
    def test_splitting_bounds(self, seed, t, weight):
        g = build_grid(2, 16, TWO_PI)
        s = state_of(random_solenoidal(g, seed=seed), random_solenoidal(g, seed=seed + 1), g, t=t)
        lo_u, hi_u, lo_B, hi_B = dg.frequency_split(s, weight)
        for lo, hi, E in ((lo_u, hi_u, dg.energy(s)[0]), (lo_B, hi_B, dg.energy(s)[1])):
            norm = math.sqrt(E)
            assert max(lo, hi) <= norm * (1 + 1e-12)
            assert lo + hi >= norm * (1 - 1e-12)
            assert lo**2 + hi**2 <= 2 * E * (1 + 1e-12)


class TestAmplitudeBound:
    def test_zero(self, grid):
        z = np.zeros((2, 32, 32), dtype=complex)
        assert dg.amplitude_bound_ratio(state_of(z, z, grid)) == 0.0

    def test_continuum_normalization(self, grid):
        # sin(x) e_2: continuum amplitude L^2 / 2 at |k| = 1
        assert dg.amplitude_bound_ratio(sine_state(grid)) == pytest.approx(TWO_PI**2 / 4)

    def test_heat_flow_non_increasing(self, grid):
        u = random_solenoidal(grid, seed=5)
        ratios = [dg.amplitude_bound_ratio(state_of(heat_multiplier(grid, t) * u, u, grid, t=t))
                  for t in np.linspace(0, 2, 9)]
        assert np.all(np.diff(ratios) <= 0)

    def test_modewise_amplitude_bound_initially_tight(self, grid):
        s = state_of(random_solenoidal(grid, seed=5), random_solenoidal(grid, seed=6), grid)
        assert dg.modewise_amplitude_bound_excess(s, s) == pytest.approx(1.0)


class TestSplittingSchedule:
    def test_polynomial_values(self):
        E, G = dg.splitting_schedule(0.0, dg.SplittingSchedule("polynomial", 4.0))
        assert (E, G) == (1.0, pytest.approx(math.sqrt(2)))

    def test_exponential_rate(self):
        sch = dg.SplittingSchedule("exponential", 0.5)
        for t in (0.0, 3.0, 50.0):
            assert dg.splitting_schedule(t, sch)[1] == pytest.approx(0.5)

    @pytest.mark.parametrize("variant,param", [("polynomial", 3.0), ("exponential", 0.0),
                                               ("linear", 1.0)])
    def test_invalid(self, variant, param):
        with pytest.raises(ConfigurationError):
            dg.SplittingSchedule(variant, param)

    @pytest.mark.parametrize("sch", [dg.SplittingSchedule("polynomial", 4.0),
                                     dg.SplittingSchedule("exponential", 0.05)])
    def test_defining_relation_second_order(self, sch):
        for t in (0.5, 1.0, 2.0, 40.0, 100.0):
            defects = []
            for h in (1e-2, 5e-3):
                Ep = dg.splitting_schedule(t + h, sch)[0]
                Em = dg.splitting_schedule(t - h, sch)[0]
                E, G = dg.splitting_schedule(t, sch)
                defects.append(abs((Ep - Em) / (2 * h) - 2 * E * G**2) / E)
            assert defects[1] <= defects[0] / 3.5


@pytest.fixture(scope="module")
def tg_series():
    g = build_grid(2, 64, TWO_PI)
    u = FieldSpec("taylor-green", 1.0).spectral(g)
    B = FieldSpec("shear-mode", 0.5, mode=2).spectral(g)
    cfg = SolverConfig(dt=1e-2, T=0.8, snapshot_every=2, record_every=10)
    return run(u, B, 1.0, cfg, g)


class TestMollifiedCheck:
    def test_linear_equality(self):
        g = build_grid(2, 32, TWO_PI)
        u = random_solenoidal(g, seed=1)
        cfg = SolverConfig(dt=0.05, T=0.5, snapshot_every=1, nonlinear=False)
        s = run(u, u, 1.0, cfg, g)
        chk = dg.mollified_energy_check(s, 0.1, 0.4, dg.gaussian_mollifier(0.5))
        assert chk.nonlinear_term == 0.0
        assert abs(chk.residual) <= 1e-8

    def test_same_time(self, tg_series):
        chk = dg.mollified_energy_check(tg_series, 0.4, 0.4, dg.unit_mollifier)
        assert chk.residual == 0.0

    def test_nonlinear_inequality(self, tg_series):
        chk = dg.mollified_energy_check(tg_series, 0.2, 0.8, dg.gaussian_mollifier(1.0))
        E0 = tg_series.records[0].E_u + tg_series.records[0].E_B
        assert chk.nonlinear_term > 0
        assert chk.residual <= 1e-4 * E0

    def test_missing_snapshot(self, tg_series):
        with pytest.raises(MissingSnapshotError):
            dg.mollified_energy_check(tg_series, 0.21, 0.8)


class TestLqAndKato:
    def test_l2_consistent(self, grid):
        u = random_solenoidal(grid, seed=8)
        assert dg.lq_norm(u, grid, 2) == pytest.approx(math.sqrt(dg.energy(state_of(u, u, grid))[0]),
                                                       rel=1e-10)

    @pytest.mark.parametrize("q", [1.5, math.inf])
    def test_invalid_exponent(self, grid, q):
        with pytest.raises(ConfigurationError):
            dg.lq_norm(np.zeros((2, 32, 32), dtype=complex), grid, q)

    def test_zero_field_observable(self, grid):
        z = np.zeros((2, 32, 32), dtype=complex)
        s = run(z, z, 1.0, SolverConfig(dt=0.5, T=3.0), grid, lq_orders=(4,))
        assert all(v == 0.0 for _, v in dg.kato_observable(s, 2, 4))

    def test_single_mode_heat_flow(self, grid):
        s = sine_state(grid)
        series = run(s.u, s.B, 1.0, SolverConfig(dt=0.25, T=3.0, nonlinear=False), grid,
                     lq_orders=(2,))
        obs = dg.kato_observable(series, 2, 2, t_min=1.0)
        u0 = math.sqrt(dg.energy(s)[0])
        for t, v in obs:
            assert v == pytest.approx(math.exp(-t) * u0, rel=1e-10)
        assert np.all(np.diff([v for _, v in obs]) < 0)

    def test_weight_one_when_p_equals_q(self, grid):
        u = random_solenoidal(grid, 0.1, seed=2)
        series = run(u, u, 1.0, SolverConfig(dt=0.1, T=2.0), grid, lq_orders=(4,))
        for (t, v), r in zip(dg.kato_observable(series, 4, 4, t_min=1.0),
                             [r for r in series.records if r.t >= 1.0]):
            assert v == pytest.approx(sum(r.lq[4.0]), rel=1e-14)

    def test_missing_norms(self, grid):
        u = random_solenoidal(grid, 0.1, seed=2)
        series = run(u, u, 1.0, SolverConfig(dt=0.5, T=2.0), grid)
        with pytest.raises(MissingSnapshotError):
            dg.kato_observable(series, 2, 4)


class TestCsv:
    def test_columns(self):
        assert dg.csv_columns((4, 3)) == list(dg.BASE_COLUMNS) + ["uq3", "Bq3", "uq4", "Bq4"]

    def test_series_csv_round_trip(self, grid):
        u = random_solenoidal(grid, 0.1, seed=2)
        series = run(u, u, 1.0, SolverConfig(dt=0.1, T=0.3), grid, lq_orders=(4,))
        rows = list(csv.reader(io.StringIO(dg.series_csv(series))))
        assert rows[0] == dg.csv_columns((4,))
        assert len(rows) == 1 + len(series.records)
        assert [float(x) for x in rows[2]] == series.records[1].row()
