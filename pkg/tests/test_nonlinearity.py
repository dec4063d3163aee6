import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdwave.errors import StateBlowUp
from sdwave.nonlinearity import Nonlinearity, eval_G, eval_g, exponent_table, growth_switch
from sdwave.spectral import Field, Grid


class TestExponents:
    @pytest.mark.parametrize(
        "N, alpha, p_star, p_alpha",
        [
            (1, 0.75, math.inf, math.inf),
            (2, 0.75, math.inf, math.inf),
            (3, 0.75, 5.0, math.inf),
            (3, 0.6, 5.0, (3 + 2.4) / (3 - 2.4)),
            (5, 0.75, 7 / 3, 4.0),
        ],
    )
    def test_table(self, N, alpha, p_star, p_alpha):
        ex = exponent_table(N, alpha)
        assert ex.p_star == pytest.approx(p_star)
        assert ex.p_alpha == pytest.approx(p_alpha)

    def test_alpha_range(self):
        with pytest.raises(ValueError, match=r"dissipative index out of \(1/2,1\)"):
            exponent_table(1, 1.2)

    def test_switch(self):
        assert growth_switch(3, 3, 0.75) == 0
        assert growth_switch(6, 3, 0.75) == 1
        with pytest.raises(ValueError, match="p ≥ p_α = 4"):
            growth_switch(5, 5, 0.75)


FORMS = ["canonical", "power", "bounded"]


class TestFunctions:
    @pytest.mark.parametrize("form", FORMS)
    def test_G_is_antiderivative(self, form):
        nl = Nonlinearity(p=1.0 if form == "bounded" else 3.0, form=form)
        s = np.linspace(-3, 3, 61)
        h = 1e-5
        fd = (nl.G(s + h) - nl.G(s - h)) / (2 * h)
        assert np.allclose(fd, nl.g(s), atol=1e-7)
        assert nl.G(0.0) == 0.0

    @pytest.mark.parametrize("form", FORMS)
    def test_dg_is_derivative(self, form):
        nl = Nonlinearity(p=1.0 if form == "bounded" else 2.5, form=form)
        s = np.linspace(-3, 3, 61)
        h = 1e-6
        fd = (nl.g(s + h) - nl.g(s - h)) / (2 * h)
        assert np.allclose(fd, nl.dg(s), atol=1e-6)

    @settings(max_examples=200, deadline=None)
    @given(s=st.floats(-50, 50), p=st.floats(1, 6), C0=st.floats(0.01, 0.99), form=st.sampled_from(["canonical", "power"]))
    def test_structural_bounds(self, s, p, C0, form):
        nl = Nonlinearity(p=p, C0=C0, form=form)
        g, G = float(nl.g(s)), float(nl.G(s))
        # g(s)s - G(s) + C0/2 s^2 >= 0 and G(s) >= -C0/2 s^2
        assert g * s - G + 0.5 * C0 * s * s >= -1e-9 * (1 + abs(s) ** (p + 1))
        assert G >= -0.5 * C0 * s * s - 1e-12 * (1 + s * s)
        # g'(s) >= C1 |s|^{p-1} - C0
        assert float(nl.dg(s)) >= nl.C1 * abs(s) ** (p - 1) - C0 - 1e-9 * (1 + abs(s) ** (p - 1))

    def test_zero(self):
        nl = Nonlinearity.zero()
        assert nl.is_zero
        assert np.all(nl.g(np.ones(3)) == 0)

    @pytest.mark.parametrize("kw", [dict(C0=0.0), dict(C0=1.0), dict(C1=0.0), dict(p=0.5), dict(form="quartic")])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            Nonlinearity(**kw)


class TestFieldLevel:
    def test_eval_G_quadrature(self):
        g = Grid(1, 2 * np.pi, 64)
        f = Field(g, np.ones(g.shape) * 2.0)
        # G(2) = 2^4 / 4 = 4 on a box of length 2 pi
        assert eval_G(Nonlinearity(), f) == pytest.approx(8 * np.pi)

    def test_eval_g_dealias(self):
        g = Grid(1, 2 * np.pi, 64)
        f = Field.from_function(g, lambda x: np.cos(10 * x))
        raw = eval_g(Nonlinearity(), f, dealias=False)
        filt = eval_g(Nonlinearity(), f, dealias=True)
        # cos^3 = (3 cos x + cos 3x)/4: the mode 30 is removed by the 2/3 rule
        assert np.allclose(filt.values, 0.75 * np.cos(10 * g.coords[0]), atol=1e-13)
        assert not np.allclose(raw.values, filt.values)

    def test_blow_up(self):
        g = Grid(1, 1.0, 8)
        with pytest.raises(StateBlowUp, match="state blow-up"):
            eval_g(Nonlinearity(), Field(g, np.full(g.shape, 1e13)))
        with pytest.raises(StateBlowUp):
            eval_G(Nonlinearity(), Field(g, np.full(g.shape, np.nan)))
