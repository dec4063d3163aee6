import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdwave.data import compact_bump, gaussian, random_band_limited
from sdwave.dynamics import IntegratorConfig, ModelParams, integrate, mode_coefficients
from sdwave.energy import (
    EnergyReport,
    LyapunovParams,
    acceleration,
    calibrate_epsilon,
    decay_fit,
    dissipation_Phi,
    energy_equality_residual,
    energy_report,
    functional_H2,
    functional_H3,
    lyapunov_H,
    lyapunov_residual,
    phase_norm,
    small_time_exponent,
    smoothing_profile,
    smoothing_report,
    total_energy,
)
from sdwave.errors import FitError
from sdwave.nonlinearity import Nonlinearity
from sdwave.spectral import Field, Grid, State

# 30-digit quadrature of E for u = exp(-x^2/4), u_t = 0.5 exp(-x^2/4), g(s) = s^3
E_ORACLE = 2.3230846686996293836
# int f u with f the radius-3 bump and the same u
FU_ORACLE = 2.6953507417959401891


class TestEnergy:
    def test_frozen_value(self, cubic, gauss_state):
        assert total_energy(gauss_state, cubic) == pytest.approx(E_ORACLE, rel=1e-12)

    def test_forcing_term(self, grid1d, gauss_state):
        params = ModelParams(0.75, Nonlinearity(), grid1d, compact_bump(grid1d, 1.0, 3.0))
        # the bump's flat edge limits grid quadrature to about 1e-8 at h = 0.1
        assert total_energy(gauss_state, params) == pytest.approx(E_ORACLE - FU_ORACLE, abs=1e-7)

    def test_quadrature_oracle(self, grid1d, gauss_state):
        # independent finite-difference quadrature on a finer mesh
        x = np.linspace(-50, 50, 400001)
        u = np.exp(-(x**2) / 4)
        ux = -x / 2 * u
        dens = 0.5 * (0.25 * u**2 + ux**2 + u**2) + u**4 / 4
        ref = np.trapezoid(dens, x)
        params = ModelParams(0.75, Nonlinearity(), grid1d)
        assert total_energy(gauss_state, params) == pytest.approx(ref, rel=1e-9)

    def test_residual_small_and_second_order(self, small_grid):
        params = ModelParams(0.75, Nonlinearity(), small_grid)
        s0 = State(gaussian(small_grid, 1.0, 2.0), gaussian(small_grid, 0.5, 2.0))
        r = []
        for dt in (0.02, 0.01):
            traj = integrate(s0, params, IntegratorConfig(dt), 5.0)
            r.append(energy_equality_residual(traj, params, normalized=True).max())
        assert r[1] < 1e-4
        assert 3.0 < r[0] / r[1] < 5.0


class TestLyapunov:
    def test_eps_zero_gives_energy(self, cubic, gauss_state):
        assert lyapunov_H(gauss_state, cubic, LyapunovParams(0.0)) == pytest.approx(total_energy(gauss_state, cubic))

    def test_residual_along_trajectory(self, small_grid):
        params = ModelParams(0.75, Nonlinearity(), small_grid)
        s0 = State(gaussian(small_grid, 1.0, 2.0), gaussian(small_grid, 0.5, 2.0))
        traj = integrate(s0, params, IntegratorConfig(0.005), 2.0)
        lp = LyapunovParams(0.125)
        _, res = lyapunov_residual(traj, params, lp)
        H0 = lyapunov_H(s0, params, lp)
        assert np.max(np.abs(res)) < 1e-3 * H0

    def test_calibrate_epsilon(self, small_grid, rng):
        params = ModelParams(0.75, Nonlinearity(), small_grid)
        states = [State(random_band_limited(small_grid, rng, 3.0, a), random_band_limited(small_grid, rng, 3.0, a)) for a in (0.5, 1.0, 2.0)]
        lp = calibrate_epsilon(states, params)
        assert 0 < lp.eps <= 0.5 and lp.kappa > 0
        for s in states:
            assert dissipation_Phi(s, params, lp) >= lp.eps * lyapunov_H(s, params, lp)

    def test_calibrate_fails_without_range(self, small_grid, rng):
        params = ModelParams(0.75, Nonlinearity(), small_grid)
        s = State(random_band_limited(small_grid, rng, 3.0), random_band_limited(small_grid, rng, 3.0))
        with pytest.raises(FitError, match="no eps"):
            calibrate_epsilon([s], params, k_min=3, k_max=2)

    def test_negative_eps(self):
        with pytest.raises(ValueError):
            LyapunovParams(-0.1)


class TestHigherFunctionals:
    def test_H2_single_mode(self, small_grid):
        L = small_grid.box_length
        k = 2 * np.pi * 4 / L
        u = Field.from_function(small_grid, lambda x: np.cos(k * x))
        v = Field.from_function(small_grid, lambda x: 2 * np.cos(k * x))
        z = State(u, v)
        alpha = 0.7
        m = L / 2  # ||cos||^2
        expect = m * (4 * (1 + k**2) ** -alpha + (1 + k**2) ** (1 - alpha))
        assert functional_H2(z, alpha) == pytest.approx(expect, rel=1e-12)
        eps = 0.1
        extra = eps * m * (k ** (2 * alpha) + 1 + 2 * 2)
        assert functional_H2(z, alpha, eps=eps) == pytest.approx(expect + extra, rel=1e-12)

    def test_H3_single_mode(self, small_grid):
        L = small_grid.box_length
        k = 2 * np.pi * 3 / L
        u = Field.from_function(small_grid, lambda x: np.sin(k * x))
        alpha = 0.8
        expect = L / 2 * (k ** (2 + 2 * alpha) + k**2 + 1)
        assert functional_H3(u, alpha) == pytest.approx(expect, rel=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000), eps=st.floats(0, 0.25))
    def test_H2_small_eps_is_comparable(self, seed, eps):
        g = Grid(1, 40.0, 128)
        rng = np.random.default_rng(seed)
        z = State(random_band_limited(g, rng, 5.0), random_band_limited(g, rng, 5.0))
        a = 0.75
        h0 = functional_H2(z, a)
        he = functional_H2(z, a, eps=eps)
        # the eps part is bounded by 2 eps times a multiple of H2 on a band-limited field
        assert he >= (1 - 4 * eps) * h0 - 1e-12
        assert he <= (1 + 40 * eps) * h0 + 1e-12

    def test_acceleration_matches_time_derivative(self, small_grid):
        params = ModelParams(0.75, Nonlinearity(), small_grid)
        s0 = State(gaussian(small_grid, 1.0, 2.0), gaussian(small_grid, 0.5, 2.0))
        traj = integrate(s0, params, IntegratorConfig(1e-3, dealias=True), 0.002)
        fd = (traj.v[2] - traj.v[0]) / 0.002
        acc = acceleration(traj.state(1), params)
        assert np.max(np.abs(fd - acc.values)) < 1e-5


class TestReport:
    def test_finite_entries(self, cubic, gauss_state):
        rep = energy_report(gauss_state, cubic, LyapunovParams(0.125))
        row = rep.to_row()
        assert len(row) == len(EnergyReport.columns())
        assert np.isnan(rep.H4)
        assert all(np.isfinite(float(x)) for c, x in zip(EnergyReport.columns(), row) if c != "H4")
        assert rep.E == pytest.approx(E_ORACLE, rel=1e-12)

    def test_csv(self, cubic, gauss_state):
        rep = energy_report(gauss_state, cubic, LyapunovParams(0.125))
        head = EnergyReport.csv_header()
        assert head.startswith("# schema=sdwave.energy_report/1\n")
        assert rep.to_csv_row().count(",") == len(EnergyReport.columns()) - 1

    def test_phase_norm_switch(self, cubic, gauss_state):
        # N = 1, p = 3 is subcritical so the L^{p+1} part is dropped
        assert phase_norm(gauss_state, cubic) == pytest.approx(phase_norm(gauss_state))


class TestDecayFit:
    @settings(max_examples=30, deadline=None)
    @given(A=st.floats(0.5, 20), kappa=st.floats(0.05, 3), B=st.floats(0, 2))
    def test_synthetic(self, A, kappa, B):
        t = np.linspace(0, 5 / kappa, 60)
        fit = decay_fit(t, A * np.exp(-kappa * t) + B + 1e-9)
        assert fit.kappa == pytest.approx(kappa, rel=0.01)
        assert fit.residual < 1e-3

    def test_single_overdamped_mode(self):
        g = Grid(1, 2 * np.pi, 256)
        alpha = 0.75
        xi = 40.0
        a, b = mode_coefficients(xi, alpha)
        lam = -a / (0.5 * b + np.sqrt(0.25 * b * b - a))
        u0 = Field.from_function(g, lambda x: np.cos(xi * x))
        s0 = State(u0, Field(g, lam * u0.values))
        params = ModelParams(alpha, Nonlinearity.zero(), g)
        traj = integrate(s0, params, IntegratorConfig(0.05, save_every=4), 10.0)
        E = [total_energy(s, params) for s in traj.states()]
        fit = decay_fit(traj.times, E)
        assert fit.kappa == pytest.approx(2 * abs(lam), rel=0.05)

    def test_errors(self):
        t = np.linspace(0, 1, 20)
        with pytest.raises(FitError, match="fit failed"):
            decay_fit(t[:5], np.exp(-t[:5]))
        with pytest.raises(FitError, match="fit failed"):
            decay_fit(t, -np.exp(-t))
        with pytest.raises(FitError, match="fit failed"):
            decay_fit(t, 2 + np.sin(6 * t))


class TestSmoothing:
    def test_profile_and_report(self, small_grid):
        params = ModelParams(0.75, Nonlinearity(), small_grid)
        s0 = State(gaussian(small_grid, 1.0, 2.0), gaussian(small_grid, 0.5, 2.0))
        traj = integrate(s0, params, IntegratorConfig(0.01, save_every=10), 1.0)
        rows = smoothing_profile(traj, params)
        assert len(rows) == len(traj) - 1
        table = smoothing_report({256: rows, 512: rows})
        assert all(r["resolution_ratio"] == pytest.approx(1.0) for r in table)
        assert "weighted_ut_Halpha_M512" in table[0]

    def test_small_time_exponent(self):
        t = np.linspace(0.01, 1, 30)
        assert small_time_exponent(t, 3 * t**2) == pytest.approx(2.0)
