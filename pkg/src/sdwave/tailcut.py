"""Spatial cut-off psi, commutator estimates and the tail energy.

psi(x) = K_delta(|x| / R) where K_delta is a mollified ramp.  The ramp is placed
on [1 + delta, 2 + delta] before mollification with a kernel supported in
[-delta, delta], so psi vanishes for |x| < R and equals 1 for |x| > 2R(1 + delta).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CutoffError, FitError
from .nonlinearity import growth_switch
from .spectral import (
    Field,
    Grid,
    State,
    gradient,
    lp_norm,
    riesz_power,
    sobolev_norm,
)

TAIL_SCHEMA = "sdwave.tail/1"


def _standard_mollifier(s, delta):
    out = np.zeros_like(s)
    inside = np.abs(s) < delta
    out[inside] = np.exp(-1.0 / (1.0 - (s[inside] / delta) ** 2))
    return out


def mollified_ramp(delta: float):
    """Tabulate K_delta on [0, 3 + 2 delta]; returns (s, K, K')."""
    h = delta / 200.0
    s = np.arange(0.0, 3.0 + 2 * delta + h / 2, h)
    ramp = np.clip(s - 1.0 - delta, 0.0, 1.0)
    ks = np.arange(-delta, delta + h / 2, h)
    rho = _standard_mollifier(ks, delta)
    rho /= rho.sum()
    pad = len(ks) // 2
    ext = np.concatenate([np.zeros(pad), ramp, np.ones(pad)])
    K = np.convolve(ext, rho, mode="valid")
    dK = np.gradient(K, h)
    return s, K, dK


@dataclass(frozen=True, eq=False)
class CutoffPsi:
    grid: Grid
    R: float
    delta: float

    @cached_property
    def _table(self):
        return mollified_ramp(self.delta)

    def profile(self, r):
        """psi as a function of the radius |x|."""
        s, K, _ = self._table
        return np.interp(np.asarray(r, dtype=float) / self.R, s, K, right=1.0)

    def profile_derivative(self, r):
        s, _, dK = self._table
        return np.interp(np.asarray(r, dtype=float) / self.R, s, dK, right=0.0) / self.R

    @cached_property
    def field(self) -> Field:
        return Field(self.grid, self.profile(self.grid.radius))

    @property
    def values(self):
        return self.field.values

    @property
    def outer_radius(self):
        return 2 * self.R * (1 + self.delta)

    def grad_sup(self):
        """max |grad psi| from the tabulated radial derivative."""
        return float(np.max(np.abs(self.profile_derivative(self.grid.radius))))


def build_psi(grid: Grid, R: float, delta: float = 0.1) -> CutoffPsi:
    if not R > 0:
        raise CutoffError("R must be positive")
    if not 0 < delta < 1:
        raise CutoffError("delta must lie in (0, 1)")
    if 2 * R * (1 + delta) >= grid.box_length / 2:
        raise CutoffError("cutoff does not fit box")
    return CutoffPsi(grid, float(R), float(delta))


def _psi_values(psi):
    if isinstance(psi, CutoffPsi):
        return psi.values
    if isinstance(psi, Field):
        return psi.values
    return np.asarray(psi, dtype=float)


def psi_riesz_norm_check(psi: CutoffPsi, s: float, q: float) -> float:
    """||Lambda^s (psi - psi_corner)||_q * R^{s - N/q}.

    The corner value is subtracted so that the periodic plateau at 1 does not
    count; for s = 0 and q = inf this is ||psi||_inf = 1.
    """
    n = psi.grid.dim
    inv_q = 0.0 if np.isinf(q) else 1.0 / q
    if s > 1 or q < 1 or s - n * inv_q < 0:
        raise ValueError("need s <= 1, q >= 1 and s - N/q >= 0")
    vals = psi.values
    corner = vals[(0,) * n]
    f = Field(psi.grid, vals - corner)
    if s != 0:
        f = riesz_power(f, s)
    return lp_norm(f, q) * psi.R ** (s - n * inv_q)


# ---------------------------------------------------------------------------
# commutators


@dataclass(frozen=True)
class CommutatorResult:
    defect_norm: float
    bound: float
    ratio: float


def commutator(a: Field, b: Field, s: float) -> Field:
    """Lambda^s(ab) - a Lambda^s b - b Lambda^s a with Lambda = (-Delta)^{1/2}."""
    return riesz_power(a * b, s) - a * riesz_power(b, s) - b * riesz_power(a, s)


def _lambda_norm(f: Field, s: float, q: float) -> float:
    return lp_norm(riesz_power(f, s) if s else f, q)


def commutator_defect(a: Field, b: Field, s: float, p=2.0, p1=4.0, p2=4.0, s1=None, s2=0.0) -> CommutatorResult:
    """Defect norm, right-hand side ||Lambda^{s1} a||_{p1} ||Lambda^{s2} b||_{p2} and their ratio.

    ``s1`` defaults to ``s - s2``.  The p1 = inf branch requires s1 = 0.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    s1 = s - s2 if s1 is None else s1
    if abs(s1 + s2 - s) > 1e-14 or not (0 <= s1 <= s and 0 <= s2 <= s):
        raise ValueError("need s = s1 + s2 with s1, s2 in [0, s]")
    inv = lambda q: 0.0 if np.isinf(q) else 1.0 / q
    if abs(1.0 / p - inv(p1) - inv(p2)) > 1e-14:
        raise ValueError("need 1/p = 1/p1 + 1/p2")
    if np.isinf(p1) and s1 != 0:
        raise ValueError("p1 = inf requires s1 = 0")
    d = commutator(a, b, s)
    num = lp_norm(d, p)
    bound = _lambda_norm(a, s1, p1) * _lambda_norm(b, s2, p2)
    ratio = num / bound if bound > 0 else (0.0 if num == 0 else np.inf)
    return CommutatorResult(num, bound, ratio)


# ---------------------------------------------------------------------------
# localized fractional estimate


@dataclass(frozen=True)
class Lemma33Terms:
    lhs: float
    local: float
    far: float

    def ratio(self):
        den = self.local + self.far
        return 0.0 if den == 0 else self.lhs / den


def lemma33_terms(u: Field, psi: CutoffPsi, alpha: float) -> Lemma33Terms:
    """||psi Lambda^alpha u||, ||psi u|| + ||psi grad u|| and R^{-alpha/2} ||u||_{H^1}."""
    pv = psi.values
    lhs = sobolev_norm(Field(u.grid, pv * riesz_power(u, alpha).values))
    grad = np.sqrt(sum(gi.values**2 for gi in gradient(u)))
    local = sobolev_norm(Field(u.grid, pv * u.values)) + sobolev_norm(Field(u.grid, pv * grad))
    far = psi.R ** (-alpha / 2) * sobolev_norm(u, 1.0)
    return Lemma33Terms(lhs, local, far)


def calibrate_lemma33(fields, psis, alpha, safety=1.5) -> float:
    """Constant C = safety * max lhs / (local + far) over a calibration ensemble."""
    worst = 0.0
    for u in fields:
        for psi in psis:
            worst = max(worst, lemma33_terms(u, psi, alpha).ratio())
    if worst == 0:
        raise FitError("fit failed: calibration ensemble is trivial")
    return safety * worst


def lemma33_check(u: Field, psi: CutoffPsi, alpha: float, C: float):
    """(lhs, rhs, margin) for ||psi Lambda^alpha u|| <= C(||psi u|| + ||psi grad u||) + C R^{-alpha/2} ||u||_{H^1}."""
    t = lemma33_terms(u, psi, alpha)
    rhs = C * (t.local + t.far)
    return t.lhs, rhs, rhs - t.lhs


# ---------------------------------------------------------------------------
# tail energy


def tail_energy_H4(s: State, psi, params, lp) -> float:
    """H4 = 1/2(||psi u_t||^2 + ||psi grad u||^2 + ||psi u||^2 + 2 int psi^2 (G(u) - f u))
    + eps((psi^2 u, u_t) + 1/2(||psi u||^2 + ||psi Lambda^alpha u||^2)).

    ``psi`` may be a :class:`CutoffPsi`, a Field or a plain array.
    """
    g = s.grid
    pv = _psi_values(psi)
    p2 = pv * pv
    u, v = s.u.values, s.v.values
    dv = g.cell_volume
    grad2 = sum(gi.values**2 for gi in gradient(s.u))
    lam = riesz_power(s.u, params.alpha).values
    G = params.nl.G(u)
    f = params.f_values
    base = 0.5 * np.sum(p2 * (v * v + grad2 + u * u)) + np.sum(p2 * (G - f * u))
    extra = lp.eps * (np.sum(p2 * u * v) + 0.5 * np.sum(p2 * (u * u + lam * lam)))
    return float((base + extra) * dv)


def tail_norm(s: State, radius: float, params=None) -> float:
    """||(u, u_t)|| in H^1 x L^2 restricted to |x| > radius (inside the box).

    With ``params`` on the supercritical branch the L^{p+1} part is included.
    """
    g = s.grid
    out = g.radius > radius
    grad2 = sum(gi.values**2 for gi in gradient(s.u))
    u, v = s.u.values, s.v.values
    sq = np.sum((grad2 + u * u + v * v)[out]) * g.cell_volume
    if params is not None and not params.nl.is_zero:
        if growth_switch(params.nl.p, g.dim, params.alpha):
            q = params.nl.p + 1
            sq += (np.sum(np.abs(u[out]) ** q) * g.cell_volume) ** (2.0 / q)
    return float(np.sqrt(sq))


def far_forcing_norm(params, radius: float) -> float:
    """||f||_{L^2(|x| > radius)}."""
    g = params.grid
    f = params.f_values
    return float(np.sqrt(np.sum((f * f)[g.radius > radius]) * g.cell_volume))


@dataclass(frozen=True)
class TailRow:
    R: float
    tail_norm: float
    predicted_bound: float


@dataclass(frozen=True)
class TailExperiment:
    rows: list
    fit_constant: float
    fit_residual: float
    decay_exponent: float

    def strictly_decreasing(self):
        t = [r.tail_norm for r in self.rows]
        return all(b < a for a, b in zip(t, t[1:]))

    def bounded(self):
        return all(r.tail_norm <= r.predicted_bound for r in self.rows)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema={TAIL_SCHEMA}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["R", "tail_norm", "predicted_bound"])
            for r in self.rows:
                w.writerow([repr(r.R), repr(r.tail_norm), repr(r.predicted_bound)])


def tail_shape(params, R):
    """R^{-alpha/2} + ||f||_{L^2(B_R^c)}^2, the shape of the residual floor."""
    return R ** (-params.alpha / 2) + far_forcing_norm(params, R) ** 2


def tail_table(final_state: State, params, radii) -> TailExperiment:
    """Tail norms outside B_{2R} of one terminal state for each R.

    The predicted bound is C_fit * shape(R) with C_fit the smallest constant
    dominating every measurement.  The fit residual is the rms log-distance
    between measurement and bound, and the decay exponent is the log-log slope
    of the measured tail against R (both reported, not asserted).
    """
    radii = sorted(float(r) for r in radii)
    tails = np.array([tail_norm(final_state, 2 * R, params) for R in radii])
    shapes = np.array([tail_shape(params, R) for R in radii])
    C = float(np.max(tails / shapes)) * (1 + 1e-12)
    bounds = C * shapes
    with np.errstate(divide="ignore"):
        resid = float(np.sqrt(np.mean(np.log(bounds / tails) ** 2))) if np.all(tails > 0) else float("inf")
        slope = float(np.polyfit(np.log(radii), np.log(tails), 1)[0]) if np.all(tails > 0) else float("nan")
    rows = [TailRow(R, float(t), float(b)) for R, t, b in zip(radii, tails, bounds)]
    return TailExperiment(rows, C, resid, slope)


def tail_smallness_experiment(s0: State, params, radii, T, cfg=None) -> TailExperiment:
    """Evolve ``s0`` to time T and tabulate the tail norms for each R."""
    from .dynamics import IntegratorConfig, integrate

    cfg = cfg or IntegratorConfig()
    for R in radii:
        build_psi(params.grid, R)
    n = max(1, int(round(T / cfg.dt)))
    cfg = IntegratorConfig(cfg.dt, cfg.scheme, cfg.dealias, cfg.l_trunc, save_every=n)
    traj = integrate(s0, params, cfg, T)
    return tail_table(traj.final, params, radii)
