"""Initial data, forcing profiles and random test fields."""

from __future__ import annotations

import numpy as np

from .mollifier import phi_hat
from .spectral import Field, Grid, sobolev_norm


def _shifted_radius(grid, center):
    if np.isscalar(center):
        center = (float(center),) * grid.dim
    return np.sqrt(sum((c - x0) ** 2 for c, x0 in zip(grid.coords, center)))


def gaussian(grid: Grid, amplitude=1.0, width=1.0, center=0.0) -> Field:
    """a exp(-|x - x0|^2 / sigma^2)."""
    r = _shifted_radius(grid, center)
    return Field(grid, amplitude * np.exp(-(r**2) / width**2))


def compact_bump(grid: Grid, amplitude=1.0, radius=1.0, center=0.0) -> Field:
    """Smooth bump a exp(1 - 1/(1 - |x|^2/rho^2)) supported in |x - x0| < rho."""
    r = _shifted_radius(grid, center) / radius
    inside = r < 1
    vals = np.zeros(grid.shape)
    vals[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return Field(grid, vals)


def white_noise(grid: Grid, rng) -> Field:
    return Field(grid, rng.standard_normal(grid.shape))


def random_band_limited(grid: Grid, rng, kmax, amplitude=1.0) -> Field:
    """Random real field with modes |xi| <= kmax only, scaled to L^2 norm ``amplitude``."""
    c = np.fft.fftn(rng.standard_normal(grid.shape))
    keep = grid.kabs <= kmax
    nyq = np.zeros(grid.shape, dtype=bool)
    for axis in range(grid.dim):
        sl = [None] * grid.dim
        sl[axis] = slice(None)
        nyq |= (np.abs(grid.mode_index_1d) == grid.modes // 2)[tuple(sl)]
    c[~keep | nyq] = 0.0
    vals = np.fft.ifftn(c).real
    f = Field(grid, vals)
    n = sobolev_norm(f)
    if n == 0:
        return f
    return Field(grid, vals * (amplitude / n))


def localized_band_limited(grid: Grid, rng, lam, n_lumps=3, spread=2.0) -> Field:
    """Random real field with spectrum inside |xi| <= 2 lam, localized near the origin.

    The field is a random combination of translates of the profile whose
    Fourier transform is phi_hat(|xi| / lam); translates sit within ``spread / lam``
    of the origin so the whole field lives at spatial scale ~ 1 / lam.  Doubling
    ``lam`` while reusing the same rng seed gives the dilated field.
    """
    z = rng.standard_normal(n_lumps) + 1j * rng.standard_normal(n_lumps)
    shifts = rng.uniform(-spread, spread, size=(n_lumps, grid.dim)) / lam
    k = grid.wavevectors
    prof = phi_hat(grid.kabs / lam)
    d = np.zeros(grid.shape, dtype=complex)
    for zj, yj in zip(z, shifts):
        d += zj * np.exp(-1j * np.tensordot(yj, k, axes=1))
    d *= prof
    # physical coefficients -> real samples; Hermitian part keeps the field real
    vals = (np.fft.ifftn(d * grid.phase) * grid.npoints).real
    return Field(grid, vals / lam**grid.dim)


def rough_field(grid: Grid, seed, delta=0.1, amplitude=1.0, reference_modes=None) -> Field:
    """Random field whose coefficients decay like |xi|^{-(N + delta)/2}.

    Such a field lies in L^2 but in no H^s with s > delta / 2.  Phases are drawn
    on a reference grid with ``reference_modes`` points per direction and then
    restricted, so grids of different resolution over the same box share every
    common mode exactly.
    """
    ref_m = reference_modes or grid.modes
    if ref_m < grid.modes or ref_m % grid.modes:
        raise ValueError("reference_modes must be a multiple of the grid modes")
    ref = Grid(grid.dim, grid.box_length, ref_m)
    rng = np.random.default_rng(seed)
    w = np.fft.fftn(rng.standard_normal(ref.shape))
    phases = w / np.abs(w)

    # pick the reference modes that exist on the target grid (Nyquist dropped)
    half = grid.modes // 2
    idx1 = np.concatenate([np.arange(0, half), np.arange(ref_m - half + 1, ref_m)])
    tgt1 = np.concatenate([np.arange(0, half), np.arange(grid.modes - half + 1, grid.modes)])
    c = np.zeros(grid.shape, dtype=complex)
    c[np.ix_(*([tgt1] * grid.dim))] = phases[np.ix_(*([idx1] * grid.dim))]

    n = grid.dim
    scale = amplitude * (2 * np.pi) ** (n / 2) / grid.box_length**n
    c *= scale * (1.0 + grid.kabs**2) ** (-(n + delta) / 4)
    c.flat[0] = 0.0
    vals = (np.fft.ifftn(c * grid.phase) * grid.npoints).real
    return Field(grid, vals)
