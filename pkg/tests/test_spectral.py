import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdwave.data import gaussian, random_band_limited
from sdwave.errors import DegenerateInput
from sdwave.spectral import (
    Field,
    Grid,
    SobolevIndex,
    State,
    apply_multiplier,
    bernstein_ratio,
    bessel_power,
    derivative,
    gradient,
    inner,
    lp_norm,
    project_band,
    resample,
    riesz_power,
    sobolev_norm,
    to_real,
    to_spectral,
)


class TestGrid:
    def test_shape_and_spacing(self):
        g = Grid(2, 10.0, 16)
        assert g.shape == (16, 16)
        assert g.spacing == pytest.approx(10.0 / 16)
        assert g.volume == pytest.approx(100.0)
        assert g.axis[0] == pytest.approx(-5.0)

    def test_nyquist(self):
        g = Grid(1, 100.0, 1024)
        assert g.nyquist == pytest.approx(np.pi * 1024 / 100.0)

    @pytest.mark.parametrize("kwargs", [dict(dim=4, box_length=1.0, modes=8), dict(dim=1, box_length=0.0, modes=8), dict(dim=1, box_length=1.0, modes=7)])
    def test_rejects_bad_parameters(self, kwargs):
        with pytest.raises(ValueError):
            Grid(**kwargs)

    def test_dealias_mask_keeps_two_thirds(self):
        g = Grid(1, 1.0, 96)
        kept = g.dealias_mask_r.sum()
        # modes 0..31 in the half spectrum
        assert kept == 32


class TestCoefficients:
    def test_constant_has_coefficient_at_zero(self, small_grid):
        f = Field(small_grid, np.full(small_grid.shape, 2.5))
        c = to_spectral(f).data
        assert c[0] == pytest.approx(2.5)
        assert np.max(np.abs(c[1:])) < 1e-14

    def test_cosine_has_half_at_plus_minus_one(self, small_grid):
        L = small_grid.box_length
        f = Field.from_function(small_grid, lambda x: np.cos(2 * np.pi * x / L))
        c = to_spectral(f).data
        assert c[1] == pytest.approx(0.5, abs=1e-14)
        assert c[-1] == pytest.approx(0.5, abs=1e-14)

    def test_round_trip(self, small_grid, rng):
        f = Field(small_grid, rng.standard_normal(small_grid.shape))
        back = to_real(to_spectral(f))
        assert np.allclose(back.values, f.values, atol=1e-13)

    def test_parseval_matches_quadrature(self, rng):
        g = Grid(2, 7.0, 32)
        f = Field(g, rng.standard_normal(g.shape))
        quad = np.sqrt(np.sum(f.values**2) * g.cell_volume)
        assert sobolev_norm(f) == pytest.approx(quad, rel=1e-12)
        assert lp_norm(f, 2) == pytest.approx(quad, rel=1e-12)


class TestSobolev:
    def test_single_mode_closed_form(self, small_grid):
        L = small_grid.box_length
        k = 2 * np.pi * 5 / L
        f = Field.from_function(small_grid, lambda x: 3.0 * np.cos(k * x))
        # ||f||^2 = L * 2 * (3/2)^2 (1 + k^2)^s
        for s in (0.0, 0.5, 1.0, -0.75):
            expect = np.sqrt(L * 2 * 1.5**2 * (1 + k**2) ** s)
            assert sobolev_norm(f, s) == pytest.approx(expect, rel=1e-12)
        assert sobolev_norm(f, 1.0, homogeneous=True) == pytest.approx(np.sqrt(L * 2 * 1.5**2) * k, rel=1e-12)

    def test_sobolev_index_object(self, small_grid, rng):
        f = random_band_limited(small_grid, rng, 2.0)
        assert sobolev_norm(f, SobolevIndex(1.0, 2, True)) == pytest.approx(sobolev_norm(f, 1.0, homogeneous=True))
        with pytest.raises(ValueError):
            sobolev_norm(f, SobolevIndex(1.0, 4, True))

    def test_riesz_power_of_cosine(self, small_grid):
        L = small_grid.box_length
        k = 2 * np.pi * 3 / L
        f = Field.from_function(small_grid, lambda x: np.cos(k * x))
        r = riesz_power(f, 0.6)
        assert np.allclose(r.values, k**0.6 * f.values, atol=1e-13)

    def test_riesz_kills_constants(self, small_grid):
        f = Field(small_grid, np.ones(small_grid.shape))
        assert np.max(np.abs(riesz_power(f, 0.5).values)) < 1e-15

    def test_bessel_inverse(self, small_grid, rng):
        f = random_band_limited(small_grid, rng, 3.0)
        back = bessel_power(bessel_power(f, 1.3), -1.3)
        assert np.allclose(back.values, f.values, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(s1=st.floats(-2, 2), s2=st.floats(-2, 2), seed=st.integers(0, 10_000))
    def test_norm_monotone_in_index(self, s1, s2, seed):
        g = Grid(1, 20.0, 64)
        f = Field(g, np.random.default_rng(seed).standard_normal(g.shape))
        lo, hi = sorted((s1, s2))
        assert sobolev_norm(f, lo) <= sobolev_norm(f, hi) * (1 + 1e-12)


class TestDerivatives:
    def test_derivative_of_gaussian(self, grid1d):
        f = gaussian(grid1d, 1.0, 2.0)
        x = grid1d.coords[0]
        exact = -2 * x / 4.0 * f.values
        assert np.max(np.abs(derivative(f, (1,)).values - exact)) < 1e-12

    def test_gradient_2d(self):
        g = Grid(2, 40.0, 128)
        f = gaussian(g, 1.0, 2.0)
        gx, gy = gradient(f)
        x, y = g.coords
        assert np.max(np.abs(gx.values + 2 * x / 4 * f.values)) < 1e-11
        assert np.max(np.abs(gy.values + 2 * y / 4 * f.values)) < 1e-11

    def test_inner_and_multiplier(self, small_grid, rng):
        f = random_band_limited(small_grid, rng, 2.0)
        g = apply_multiplier(f, np.full(small_grid.shape, 2.0))
        assert inner(f, g) == pytest.approx(2 * sobolev_norm(f) ** 2, rel=1e-12)


class TestBernstein:
    def test_zero_field_is_degenerate(self, small_grid):
        with pytest.raises(DegenerateInput, match="degenerate input"):
            bernstein_ratio(Field.zeros(small_grid), 1.0, 1, 2, 2)

    def test_l2_derivative_bound(self, grid1d, rng):
        # on |xi| <= 2 lam the L2 derivative ratio is at most 2
        f = random_band_limited(grid1d, rng, 3.0)
        r = bernstein_ratio(f, 2.0, 1, 2, 2)
        assert 0 < r <= 2.0 + 1e-12

    def test_projection(self, small_grid, rng):
        f = random_band_limited(small_grid, rng, 6.0)
        p = project_band(f, 2.0)
        c = to_spectral(p).data
        assert np.max(np.abs(c[small_grid.kabs > 2.0])) < 1e-15


class TestResample:
    def test_round_trip_band_limited(self, small_grid, rng):
        f = random_band_limited(small_grid, rng, 4.0)
        fine = Grid(1, small_grid.box_length, 512)
        back = resample(resample(f, fine), small_grid)
        assert np.allclose(back.values, f.values, atol=1e-13)
        assert sobolev_norm(resample(f, fine), 1.0) == pytest.approx(sobolev_norm(f, 1.0), rel=1e-12)

    def test_box_mismatch(self, small_grid):
        with pytest.raises(ValueError):
            resample(Field.zeros(small_grid), Grid(1, 50.0, 256))


class TestState:
    def test_fields_are_immutable(self, small_grid):
        f = Field.zeros(small_grid)
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_grid_mismatch(self, small_grid):
        other = Grid(1, 10.0, 256)
        with pytest.raises(ValueError):
            State(Field.zeros(small_grid), Field.zeros(other))
