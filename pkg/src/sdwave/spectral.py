"""Periodic-box grids, fields and Fourier multipliers.

The continuum problem lives on R^N; here it is realized on the torus
[-L/2, L/2)^N sampled with M points per direction.  Spectral coefficients use
the physical basis exp(i xi.x) with xi_k = 2 pi k / L, so that

    f(x_j) = sum_k c_k exp(i xi_k . x_j),      c_k = M^-N sum_j f(x_j) exp(-i xi_k . x_j).

A constant c therefore has coefficient c at mode 0 and cos(2 pi x / L) has
coefficients 1/2 at modes +-1.  Coefficient arrays are kept in numpy FFT
ordering.  L^2-type norms use Parseval, ||f||^2 = L^N sum_k |c_k|^2, which agrees
exactly with the rectangle-rule quadrature used by :func:`lp_norm`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateInput

__all__ = [
    "Grid",
    "Field",
    "State",
    "SobolevIndex",
    "to_spectral",
    "to_real",
    "apply_multiplier",
    "riesz_power",
    "bessel_power",
    "sobolev_norm",
    "lp_norm",
    "inner",
    "derivative",
    "gradient",
    "project_band",
    "bernstein_ratio",
    "resample",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L/2, L/2)^N.

    Parameters
    ----------
    dim : int
        Spatial dimension N in {1, 2, 3}.
    box_length : float
        Side length L of the box.
    modes : int
        Points per direction M; even and at least 8.
    """

    dim: int
    box_length: float
    modes: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")
        if self.modes < 8 or self.modes % 2:
            raise ValueError(f"modes must be even and >= 8, got {self.modes}")

    @property
    def shape(self):
        return (self.modes,) * self.dim

    @property
    def npoints(self):
        return self.modes**self.dim

    @property
    def spacing(self):
        return self.box_length / self.modes

    @property
    def cell_volume(self):
        return self.spacing**self.dim

    @property
    def volume(self):
        return self.box_length**self.dim

    @property
    def nyquist(self):
        """Largest resolved wavenumber, pi M / L."""
        return np.pi * self.modes / self.box_length

    @cached_property
    def axis(self):
        return -0.5 * self.box_length + self.spacing * np.arange(self.modes)

    @cached_property
    def coords(self):
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def radius(self):
        """|x| at every grid point."""
        return np.sqrt(sum(c**2 for c in self.coords))

    @cached_property
    def mode_index_1d(self):
        return np.rint(np.fft.fftfreq(self.modes, d=1.0 / self.modes)).astype(int)

    @cached_property
    def wavenumbers_1d(self):
        return 2 * np.pi * self.mode_index_1d / self.box_length

    @cached_property
    def wavevectors(self):
        """Array of shape (dim, M, ..., M) holding xi_k in FFT ordering."""
        return np.stack(np.meshgrid(*([self.wavenumbers_1d] * self.dim), indexing="ij"))

    @cached_property
    def kabs(self):
        return np.sqrt(np.sum(self.wavevectors**2, axis=0))

    @cached_property
    def kabs_r(self):
        """|xi| on the half-spectrum layout of ``numpy.fft.rfftn``."""
        ks = [self.wavenumbers_1d] * (self.dim - 1)
        ks.append(2 * np.pi * np.arange(self.modes // 2 + 1) / self.box_length)
        mesh = np.meshgrid(*ks, indexing="ij")
        return np.sqrt(sum(k**2 for k in mesh))

    @cached_property
    def rweight(self):
        # multiplicity of each half-spectrum mode in the full spectrum
        w = np.full(self.modes // 2 + 1, 2.0)
        w[0] = w[-1] = 1.0
        return np.broadcast_to(w, self.kabs_r.shape)

    @cached_property
    def phase(self):
        # exp(-i xi_k . x_0) with x_0 = -L/2 is (-1)^(sum k)
        idx = np.meshgrid(*([self.mode_index_1d] * self.dim), indexing="ij")
        return np.where(sum(idx) % 2 == 0, 1.0, -1.0)

    @cached_property
    def dealias_mask_r(self):
        """2/3-rule mask on the half spectrum: keep |k_i| < M/3 in every direction."""
        cut = self.modes / 3.0
        full = np.abs(self.mode_index_1d) < cut
        half = np.arange(self.modes // 2 + 1) < cut
        masks = [full] * (self.dim - 1) + [half]
        mesh = np.meshgrid(*masks, indexing="ij")
        return np.logical_and.reduce(mesh)

    # -- array level helpers used by the time integrators ------------------

    def rfft(self, values):
        return np.fft.rfftn(values, axes=tuple(range(-self.dim, 0)))

    def irfft(self, coeffs):
        return np.fft.irfftn(coeffs, s=self.shape, axes=tuple(range(-self.dim, 0)))

    def multiply(self, values, multiplier_r):
        """Apply a real half-spectrum multiplier to a real array."""
        return self.irfft(self.rfft(values) * multiplier_r)

    def weighted_square_norm(self, values, weight_r=None):
        """L^N sum_k w(xi_k) |c_k|^2 for a real array, via the half spectrum."""
        c = self.rfft(values)
        p = self.rweight * (c.real**2 + c.imag**2)
        if weight_r is not None:
            p = p * weight_r
        return float(np.sum(p)) * self.volume / self.npoints**2

    def weighted_inner(self, a, b, weight_r=None):
        ca, cb = self.rfft(a), self.rfft(b)
        p = self.rweight * (ca * cb.conj()).real
        if weight_r is not None:
            p = p * weight_r
        return float(np.sum(p)) * self.volume / self.npoints**2


@dataclass(frozen=True, eq=False)
class Field:
    """A scalar function sampled on a :class:`Grid`.

    ``data`` holds real samples when ``spectral`` is False and complex
    coefficients (FFT ordering, physical basis) when True.  Fields are
    immutable; the array is marked read-only.
    """

    grid: Grid
    data: np.ndarray
    spectral: bool = False

    def __post_init__(self):
        dtype = complex if self.spectral else float
        arr = np.array(self.data, dtype=dtype)
        if arr.shape != self.grid.shape:
            raise ValueError(f"data shape {arr.shape} does not match grid {self.grid.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, func(*grid.coords))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    @property
    def values(self):
        return self.data if not self.spectral else to_real(self).data

    @property
    def coefficients(self):
        return self.data if self.spectral else to_spectral(self).data

    def __add__(self, other):
        return Field(self.grid, self.values + _values(other))

    def __sub__(self, other):
        return Field(self.grid, self.values - _values(other))

    def __mul__(self, other):
        return Field(self.grid, self.values * _values(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)


def _values(x):
    return x.values if isinstance(x, Field) else x


@dataclass(frozen=True)
class State:
    """The pair (u, u_t) at time ``time``."""

    u: Field
    v: Field
    time: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ValueError("u and v must share one grid")
        if self.time < 0:
            raise ValueError("time must be nonnegative")

    @property
    def grid(self):
        return self.u.grid

    @classmethod
    def from_arrays(cls, grid, u, v, time=0.0):
        return cls(Field(grid, u), Field(grid, v), float(time))

    @classmethod
    def zeros(cls, grid):
        return cls(Field.zeros(grid), Field.zeros(grid), 0.0)


@dataclass(frozen=True)
class SobolevIndex:
    s: float = 0.0
    q: float = 2.0
    homogeneous: bool = False

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("integrability index q must be >= 1")


def to_spectral(f: Field) -> Field:
    if f.spectral:
        return f
    g = f.grid
    coeffs = np.fft.fftn(f.data) * g.phase / g.npoints
    return Field(g, coeffs, spectral=True)


def to_real(f: Field) -> Field:
    if not f.spectral:
        return f
    g = f.grid
    vals = np.fft.ifftn(f.data * g.phase) * g.npoints
    return Field(g, vals.real)


def apply_multiplier(f: Field, multiplier) -> Field:
    """Multiply every coefficient of ``f`` by ``multiplier`` (full FFT layout)."""
    c = to_spectral(f).data * multiplier
    out = Field(f.grid, c, spectral=True)
    return out if f.spectral else to_real(out)


def riesz_multiplier(kabs, s):
    """|xi|^s with the zero mode set to 0 for s != 0 (and to 1 for s == 0)."""
    if s == 0:
        return np.ones_like(kabs)
    m = np.zeros_like(kabs)
    nz = kabs > 0
    m[nz] = kabs[nz] ** s
    return m


def bessel_multiplier(kabs, s):
    return (1.0 + kabs**2) ** (0.5 * s)


def riesz_power(f: Field, s: float) -> Field:
    """(-Delta)^{s/2} f, i.e. the multiplier |xi|^s.

    The zero mode is annihilated for every s != 0; for s < 0 this is a
    convention, since |xi|^s is singular there.
    """
    return apply_multiplier(f, riesz_multiplier(f.grid.kabs, s))


def bessel_power(f: Field, s: float) -> Field:
    """(I - Delta)^{s/2} f, i.e. the multiplier (1 + |xi|^2)^{s/2}."""
    return apply_multiplier(f, bessel_multiplier(f.grid.kabs, s))


def sobolev_norm(f: Field, idx=0.0, homogeneous=False) -> float:
    """L^2-based Sobolev norm ||f||_{H^s} (or the homogeneous seminorm).

    ``idx`` is either the order s or a :class:`SobolevIndex` with q == 2.
    """
    if isinstance(idx, SobolevIndex):
        if idx.q != 2:
            raise ValueError("sobolev_norm only handles q = 2; use lp_norm on a potential")
        s, homogeneous = idx.s, idx.homogeneous
    else:
        s = float(idx)
    g = f.grid
    w = riesz_multiplier(g.kabs_r, 2 * s) if homogeneous else bessel_multiplier(g.kabs_r, 2 * s)
    return float(np.sqrt(g.weighted_square_norm(f.values, w)))


def lp_norm(f: Field, q: float) -> float:
    """Rectangle-rule L^q norm; ``q = np.inf`` gives the max norm."""
    vals = np.abs(f.values)
    if np.isinf(q):
        return float(vals.max())
    if q < 1:
        raise ValueError("q must be >= 1")
    return float((np.sum(vals**q) * f.grid.cell_volume) ** (1.0 / q))


def inner(f: Field, g: Field) -> float:
    """Discrete L^2 inner product (f, g)."""
    return float(np.sum(f.values * g.values) * f.grid.cell_volume)


def derivative(f: Field, order) -> Field:
    """Spectral partial derivative; ``order`` is a multi-index (one int per axis)."""
    g = f.grid
    order = tuple(order)
    if len(order) != g.dim:
        raise ValueError("multi-index length must equal grid dimension")
    mult = np.ones(g.shape, dtype=complex)
    nyq = np.abs(g.mode_index_1d) == g.modes // 2
    for axis, n in enumerate(order):
        if n == 0:
            continue
        k = g.wavevectors[axis]
        factor = (1j * k) ** n
        if n % 2:
            # odd derivatives of a real field have no Nyquist component
            sl = [None] * g.dim
            sl[axis] = slice(None)
            factor = np.where(nyq[tuple(sl)], 0.0, factor)
        mult = mult * factor
    return apply_multiplier(f, mult)


def gradient(f: Field):
    g = f.grid
    return [derivative(f, tuple(int(i == a) for i in range(g.dim))) for a in range(g.dim)]


def project_band(f: Field, radius: float) -> Field:
    """Sharp projection onto modes with |xi| <= radius."""
    return apply_multiplier(f, (f.grid.kabs <= radius).astype(float))


def _multi_indices(dim, k):
    return [m for m in itertools.product(range(k + 1), repeat=dim) if sum(m) == k]


def bernstein_ratio(f: Field, lam: float, k: int, a: float, b: float) -> float:
    """Measured constant in the Bernstein inequality for band-limited fields.

    Projects ``f`` onto |xi| <= 2 lam and returns
    sup_{|beta|=k} ||d^beta f||_b / (lam^{k + N(1/a - 1/b)} ||f||_a).
    """
    if not b >= a >= 1:
        raise ValueError("need b >= a >= 1")
    fb = project_band(f, 2 * lam)
    denom_norm = lp_norm(fb, a)
    if denom_norm == 0 or not np.isfinite(denom_norm):
        raise DegenerateInput("degenerate input")
    n = f.grid.dim
    inv_b = 0.0 if np.isinf(b) else 1.0 / b
    expo = k + n * (1.0 / a - inv_b)
    top = max(lp_norm(derivative(fb, m), b) for m in _multi_indices(n, k))
    return top / (lam**expo * denom_norm)


def resample(f: Field, grid: Grid) -> Field:
    """Spectral interpolation of ``f`` onto another grid over the same box.

    Modes present on both grids are copied (the Nyquist mode is dropped);
    finer grids are zero-padded, coarser ones truncated.
    """
    src = f.grid
    if grid.dim != src.dim or grid.box_length != src.box_length:
        raise ValueError("resample needs the same dimension and box")
    half = min(src.modes, grid.modes) // 2

    def idx(m):
        return np.concatenate([np.arange(0, half), np.arange(m - half + 1, m)])

    c = to_spectral(f).data
    out = np.zeros(grid.shape, dtype=complex)
    out[np.ix_(*([idx(grid.modes)] * grid.dim))] = c[np.ix_(*([idx(src.modes)] * src.dim))]
    return to_real(Field(grid, out, spectral=True))
