import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdwave.data import random_band_limited, white_noise
from sdwave.errors import CutoffError
from sdwave.mollifier import (
    CutoffProfile,
    apply_Sl,
    phi0,
    phi_hat,
    sl_convergence_curve,
    sl_selfadjoint_defect,
    smooth_step,
)
from sdwave.spectral import Grid, lp_norm, sobolev_norm, to_spectral


class TestProfile:
    def test_plateaus(self):
        r = np.array([0.0, 0.5, 1.0, 2.0, 3.0])
        assert np.array_equal(phi_hat(r), [1.0, 1.0, 1.0, 0.0, 0.0])

    def test_monotone_between(self):
        r = np.linspace(1, 2, 201)
        v = phi_hat(r)
        assert np.all(np.diff(v) <= 0)
        assert phi_hat(1.5) == pytest.approx(0.5)

    def test_smooth_step_symmetry(self):
        t = np.linspace(0, 1, 51)
        assert np.allclose(smooth_step(t) + smooth_step(1 - t), 1.0)

    def test_scale(self):
        p = CutoffProfile(3)
        assert p.scale == 8.0
        assert p(np.array([8.0, 16.0])).tolist() == [1.0, 0.0]

    def test_cutoff_exceeds_nyquist(self):
        g = Grid(1, 100.0, 64)  # nyquist ~ 2.01
        with pytest.raises(CutoffError, match="cutoff exceeds Nyquist"):
            apply_Sl(white_noise(g, np.random.default_rng(0)), 1)


class TestOperator:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 100_000), l=st.integers(0, 4))
    def test_selfadjoint(self, seed, l):
        g = Grid(1, 100.0, 1024)
        rng = np.random.default_rng(seed)
        a, b = white_noise(g, rng), white_noise(g, rng)
        assert sl_selfadjoint_defect(a, b, l) <= 1e-12

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 100_000), l=st.integers(0, 4), m=st.floats(-1, 3))
    def test_hm_contraction(self, seed, l, m):
        g = Grid(1, 100.0, 1024)
        f = white_noise(g, np.random.default_rng(seed))
        assert sobolev_norm(apply_Sl(f, l), m) <= sobolev_norm(f, m) * (1 + 1e-14)

    def test_identity_on_low_band(self):
        g = Grid(1, 100.0, 1024)
        f = random_band_limited(g, np.random.default_rng(3), 4.0)
        assert np.allclose(apply_Sl(f, 2).values, f.values, atol=1e-14)

    def test_kills_high_band(self):
        g = Grid(1, 100.0, 1024)
        f = white_noise(g, np.random.default_rng(5))
        c = to_spectral(apply_Sl(f, 2)).data
        assert np.max(np.abs(c[g.kabs >= 8.0])) < 1e-16

    def test_lq_bound_by_kernel_norm(self):
        g = Grid(1, 100.0, 1024)
        rng = np.random.default_rng(7)
        for l in range(5):
            c = phi0(g, l)
            for q in (1, 2, 4, np.inf):
                f = white_noise(g, rng)
                assert lp_norm(apply_Sl(f, l), q) <= c * lp_norm(f, q) * (1 + 1e-12)


class TestConvergenceCurve:
    def test_hits_zero_at_band_limit(self):
        g = Grid(1, 100.0, 1024)
        f = random_band_limited(g, np.random.default_rng(2), 4.0)
        curve = sl_convergence_curve(f, 1.0, range(0, 6))
        assert all(b <= a for a, b in zip(curve, curve[1:]))
        assert curve[0] > 0
        assert max(curve[2:]) <= 1e-13 * sobolev_norm(f, 1.0)

    def test_rough_field_decays(self):
        g = Grid(1, 100.0, 1024)
        f = white_noise(g, np.random.default_rng(2))
        curve = sl_convergence_curve(f, 0.0, range(0, 5))
        assert all(b < a for a, b in zip(curve, curve[1:]))
