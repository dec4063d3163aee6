"""Nonlinear term g(u), its antiderivative G and the critical exponents."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StateBlowUp
from .spectral import Field

BLOWUP_THRESHOLD = 1e12


@dataclass(frozen=True)
class CriticalExponents:
    p_star: float
    p_alpha: float


def exponent_table(N: int, alpha: float) -> CriticalExponents:
    """p* = (N+2)/(N-2)^+ and p_alpha = (N+4 alpha)/(N-4 alpha)^+, infinite when the denominator vanishes."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0.5 < alpha < 1:
        raise ValueError("dissipative index out of (1/2,1)")
    den_star = max(0.0, N - 2.0)
    den_alpha = max(0.0, N - 4.0 * alpha)
    p_star = math.inf if den_star == 0 else (N + 2.0) / den_star
    p_alpha = math.inf if den_alpha == 0 else (N + 4.0 * alpha) / den_alpha
    return CriticalExponents(p_star, p_alpha)


def growth_switch(p: float, N: int, alpha: float) -> int:
    """d0: 0 when p <= p*, 1 when p* < p < p_alpha."""
    ex = exponent_table(N, alpha)
    if p <= ex.p_star:
        return 0
    if p < ex.p_alpha:
        return 1
    raise ValueError(f"p ≥ p_α = {ex.p_alpha:g}")


@dataclass(frozen=True)
class Nonlinearity:
    """g with growth exponent p and structural constants C0, C1.

    ``form`` selects the concrete function:

    * ``"canonical"``: g(s) = C1 |s|^{p-1} s.  C0 enters only as the
      lower-bound constant of the growth assumption (satisfied for any C0 > 0).
    * ``"power"``: g(s) = C1 |s|^{p-1} s - C0 s, which attains the lower bound
      g'(s) >= C1 |s|^{p-1} - C0 with equality.
    * ``"bounded"``: g(s) = C1 s^3 / (1 + s^2), a subcritical variant with bounded
      derivative (use p = 1).
    * ``"zero"``: g = 0.
    """

    p: float = 3.0
    C0: float = 0.5
    C1: float = 1.0
    form: str = "canonical"

    def __post_init__(self):
        if self.form not in ("canonical", "power", "bounded", "zero"):
            raise ValueError(f"unknown nonlinearity form {self.form!r}")
        if self.p < 1:
            raise ValueError("growth exponent p must be >= 1")
        if not 0 < self.C0 < 1:
            raise ValueError("C0 must lie in (0, 1)")
        if self.C1 <= 0:
            raise ValueError("C1 must be positive")

    @classmethod
    def zero(cls):
        return cls(p=1.0, form="zero")

    @property
    def is_zero(self):
        return self.form == "zero"

    # scalar / array level -------------------------------------------------

    def g(self, s):
        s = np.asarray(s, dtype=float)
        if self.form == "zero":
            return np.zeros_like(s)
        if self.form == "bounded":
            return self.C1 * s**3 / (1.0 + s**2)
        out = self.C1 * np.abs(s) ** (self.p - 1) * s
        if self.form == "power":
            out = out - self.C0 * s
        return out

    def dg(self, s):
        s = np.asarray(s, dtype=float)
        if self.form == "zero":
            return np.zeros_like(s)
        if self.form == "bounded":
            s2 = s**2
            return self.C1 * (3 * s2 + s2**2) / (1.0 + s2) ** 2
        out = self.C1 * self.p * np.abs(s) ** (self.p - 1)
        if self.form == "power":
            out = out - self.C0
        return out

    def G(self, s):
        """Antiderivative G(s) = int_0^s g."""
        s = np.asarray(s, dtype=float)
        if self.form == "zero":
            return np.zeros_like(s)
        if self.form == "bounded":
            s2 = s**2
            return 0.5 * self.C1 * (s2 - np.log1p(s2))
        out = self.C1 * np.abs(s) ** (self.p + 1) / (self.p + 1)
        if self.form == "power":
            out = out - 0.5 * self.C0 * s**2
        return out

    def check_finite(self, values, time=None):
        m = np.max(np.abs(values))
        if not np.isfinite(m) or m > BLOWUP_THRESHOLD:
            raise StateBlowUp(time=time)


def eval_g(nl: Nonlinearity, f: Field, dealias=True) -> Field:
    """Pointwise g(f), optionally passed through the 2/3-rule mask."""
    vals = f.values
    nl.check_finite(vals)
    with np.errstate(over="raise", invalid="raise"):
        try:
            out = nl.g(vals)
        except FloatingPointError as exc:
            raise StateBlowUp() from exc
    nl.check_finite(out)
    if dealias:
        g = f.grid
        out = g.irfft(g.rfft(out) * g.dealias_mask_r)
    return Field(f.grid, out)


def eval_G(nl: Nonlinearity, f: Field) -> float:
    """Quadrature of int G(f(x)) dx."""
    vals = f.values
    nl.check_finite(vals)
    with np.errstate(over="raise", invalid="raise"):
        try:
            out = nl.G(vals)
        except FloatingPointError as exc:
            raise StateBlowUp() from exc
    return float(np.sum(out) * f.grid.cell_volume)
