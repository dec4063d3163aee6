"""Lipschitz stability, alpha-robustness and empirical attractor samples."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .dynamics import IntegratorConfig, ModelParams, integrate
from .errors import NotAbsorbed, StateBlowUp
from .nonlinearity import exponent_table, growth_switch
from .spectral import Field, Grid, State, bessel_multiplier

SWEEP_SCHEMA = "sdwave.alpha_sweep/1"


# ---------------------------------------------------------------------------
# norms on trajectory arrays


def _sq_norms(grid: Grid, arr, weight_r):
    """Weighted squared L^2 norms of a stack of real arrays (n, *grid.shape)."""
    c = grid.rfft(arr)
    p = grid.rweight * weight_r * (c.real**2 + c.imag**2)
    return np.sum(p, axis=tuple(range(-grid.dim, 0))) * grid.volume / grid.npoints**2


def pair_norm(grid: Grid, u, v, s_u, s_v):
    """sqrt(||u||_{H^{s_u}}^2 + ||v||_{H^{s_v}}^2), vectorized over leading axes."""
    k = grid.kabs_r
    return np.sqrt(_sq_norms(grid, u, bessel_multiplier(k, 2 * s_u)) + _sq_norms(grid, v, bessel_multiplier(k, 2 * s_v)))


def h_minus_half_distance(grid: Grid, du, dv):
    """||z||_{H^{1/2}} + ||z_t||_{H^{-1/2}}, vectorized over leading axes."""
    k = grid.kabs_r
    return np.sqrt(_sq_norms(grid, du, bessel_multiplier(k, 1.0))) + np.sqrt(_sq_norms(grid, dv, bessel_multiplier(k, -1.0)))


# ---------------------------------------------------------------------------
# stability


@dataclass(frozen=True)
class StabilityResult:
    C_of_T: float
    times: np.ndarray
    profile: np.ndarray
    distances: np.ndarray


def _run_pair(s_a, s_b, params, cfg, T):
    try:
        ta = integrate(s_a, params, cfg, T)
        tb = integrate(s_b, params, cfg, T)
    except StateBlowUp as exc:
        raise StateBlowUp("blow-up in one branch", time=exc.time) from exc
    return ta, tb


def stability_experiment(params: ModelParams, data_pair, T: float, cfg: IntegratorConfig | None = None) -> StabilityResult:
    """Evolve both data and measure z = u - v in H^alpha x H^-alpha.

    ``profile`` holds ||(z, z_t)(t)||^2 / ||(z, z_t)(0)||^2 and C(T) is its sup
    over [0, T].  Identical data give a zero profile and C(T) = 0.
    """
    cfg = cfg or IntegratorConfig()
    s_a, s_b = data_pair
    ta, tb = _run_pair(s_a, s_b, params, cfg, T)
    a = params.alpha
    d = pair_norm(params.grid, ta.u - tb.u, ta.v - tb.v, a, -a)
    d0 = d[0]
    prof = (d / d0) ** 2 if d0 > 0 else np.zeros_like(d)
    return StabilityResult(float(prof.max()), ta.times, prof, d)


def perturbation_linearity(params: ModelParams, s0: State, direction: State, lam: float, T: float, cfg=None):
    """Distance profiles for perturbations lam and lam/2 of ``s0`` along ``direction``.

    Returns (times, ratio) with ratio(t) = ||z_lam(t)|| / ||z_{lam/2}(t)||, which
    tends to 2 in the linearization limit.
    """
    cfg = cfg or IntegratorConfig()

    def shifted(scale):
        return State(s0.u + scale * direction.u, s0.v + scale * direction.v, s0.time)

    base = integrate(s0, params, cfg, T)
    out = []
    for scale in (lam, lam / 2):
        tr = integrate(shifted(scale), params, cfg, T)
        out.append(pair_norm(params.grid, tr.u - base.u, tr.v - base.v, params.alpha, -params.alpha))
    return base.times, out[0] / out[1]


def normalized_profile(params: ModelParams, s0: State, direction: State, lam: float, T: float, cfg=None):
    """||z(t)|| / lam for the perturbation lam * direction; converges as lam -> 0."""
    cfg = cfg or IntegratorConfig()
    s1 = State(s0.u + lam * direction.u, s0.v + lam * direction.v, s0.time)
    ta, tb = _run_pair(s1, s0, params, cfg, T)
    return ta.times, pair_norm(params.grid, ta.u - tb.u, ta.v - tb.v, params.alpha, -params.alpha) / lam


# ---------------------------------------------------------------------------
# multiplier gap


def gap_weight(kabs, a1, a2):
    """(1 + |xi|^2)^{-1} (|xi|^{2 a1} - |xi|^{2 a2})^2."""
    return (kabs ** (2 * a1) - kabs ** (2 * a2)) ** 2 / (1.0 + kabs**2)


def multiplier_gap(v: Field, a1: float, a2: float) -> float:
    """||[(-Delta)^{a1} - (-Delta)^{a2}] v||_{H^-1}, evaluated mode by mode."""
    g = v.grid
    if a1 == a2:
        return 0.0
    return float(np.sqrt(g.weighted_square_norm(v.values, gap_weight(g.kabs_r, a1, a2))))


def _gap_series(grid, vs, a1, a2):
    return np.sqrt(_sq_norms(grid, vs, gap_weight(grid.kabs_r, a1, a2)))


# ---------------------------------------------------------------------------
# attractor samples


@dataclass
class AttractorSample:
    alpha: float
    grid: Grid
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    norms: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def diameter(self, d0=0, p=None):
        if len(self) == 0:
            raise ValueError("empty attractor sample")
        return max(_cloud_distances(self, self.u[i], self.v[i], d0, p).max() for i in range(len(self)))


def _cloud_distances(sample, u, v, d0=0, p=None):
    """H-norm distances from one point (u, v) to every snapshot in ``sample``."""
    g = sample.grid
    sq = _sq_norms(g, sample.u - u, bessel_multiplier(g.kabs_r, 2.0)) + _sq_norms(g, sample.v - v, np.ones_like(g.kabs_r))
    if d0:
        q = p + 1
        lq = (np.sum(np.abs(sample.u - u) ** q, axis=tuple(range(-g.dim, 0))) * g.cell_volume) ** (1.0 / q)
        sq = sq + lq**2
    return np.sqrt(sq)


def attractor_sample(
    params: ModelParams,
    s0: State,
    burn: float,
    span: float,
    spacing: float,
    cfg: IntegratorConfig | None = None,
    rtol: float = 0.05,
    atol: float = 1e-3,
    cap: float = np.inf,
) -> AttractorSample:
    """Snapshots of the trajectory from ``s0`` on [burn, burn + span] every ``spacing``.

    The run counts as absorbed when the H-norm over [burn/2, burn] stays within
    ``rtol`` of its value at ``burn`` (absolute floor ``atol`` times the initial
    norm); otherwise :class:`NotAbsorbed` is raised.  Snapshots whose
    ||u||_{H^{1+alpha}} or ||u_t||_{H^alpha} exceed ``cap`` also raise it.
    """
    cfg = cfg or IntegratorConfig()
    every = max(1, int(round(spacing / cfg.dt)))
    run_cfg = IntegratorConfig(cfg.dt, cfg.scheme, cfg.dealias, cfg.l_trunc, save_every=every)
    tr = integrate(s0, params, run_cfg, burn + span)
    g = params.grid
    norm = pair_norm(g, tr.u, tr.v, 1.0, 0.0)
    t = tr.times - s0.time
    i_burn = int(np.argmin(np.abs(t - burn)))
    window = (t >= burn / 2 - 1e-12) & (t <= burn + 1e-12)
    ref = norm[i_burn]
    floor = max(ref, atol * norm[0])
    if np.max(np.abs(norm[window] - ref)) > rtol * floor:
        raise NotAbsorbed("not yet absorbed")
    keep = t >= burn - 1e-12
    a = params.alpha
    norms = {
        "u_H1alpha": np.sqrt(_sq_norms(g, tr.u[keep], bessel_multiplier(g.kabs_r, 2 * (1 + a)))),
        "ut_Halpha": np.sqrt(_sq_norms(g, tr.v[keep], bessel_multiplier(g.kabs_r, 2 * a))),
        "H": norm[keep],
    }
    if max(norms["u_H1alpha"].max(), norms["ut_Halpha"].max()) > cap:
        raise NotAbsorbed("not yet absorbed: snapshot above the H_alpha cap")
    return AttractorSample(a, g, tr.times[keep], tr.u[keep], tr.v[keep], norms)


def attractor_semidistance(A: AttractorSample, B: AttractorSample, params: ModelParams | None = None) -> float:
    """max over a in A of min over b in B of ||a - b||_H (one-sided)."""
    if len(A) == 0 or len(B) == 0:
        raise ValueError("empty attractor sample")
    if A.grid != B.grid:
        raise ValueError("samples live on different grids")
    d0, p = 0, None
    if params is not None and not params.nl.is_zero:
        p = params.nl.p
        d0 = growth_switch(p, A.grid.dim, min(A.alpha, B.alpha))
    return float(max(_cloud_distances(B, A.u[i], A.v[i], d0, p).min() for i in range(len(A))))


def elliptic_residual(u: Field, params: ModelParams) -> float:
    """||-Delta u + u + g(u) - f|| / ||f||, the stationary-equation residual."""
    g = u.grid
    lap = g.multiply(u.values, 1.0 + g.kabs_r**2)
    r = lap + params.nl.g(u.values) - params.f_values
    fn = np.sqrt(np.sum(params.f_values**2) * g.cell_volume)
    return float(np.sqrt(np.sum(r * r) * g.cell_volume) / (fn if fn > 0 else 1.0))


# ---------------------------------------------------------------------------
# alpha sweep


@dataclass(frozen=True)
class SweepConfig:
    """alpha-sweep setup; every run shares ``params.grid``, ``s0`` and ``dt``."""

    alpha0: float
    deltas: tuple
    params: ModelParams
    s0: State
    T: float = 10.0
    dt: float = 0.01
    gronwall_rate: float = 1.0
    safety: float = 2.0
    burn: float = 20.0
    span: float = 10.0
    spacing: float = 0.5

    def __post_init__(self):
        problems = []
        d = tuple(float(x) for x in self.deltas)
        object.__setattr__(self, "deltas", d)
        if not d or any(x <= 0 for x in d) or any(b >= a for a, b in zip(d, d[1:])):
            problems.append("deltas must be a strictly decreasing positive sequence")
        if not 0.5 < self.alpha0 < 1:
            problems.append("dissipative index out of (1/2,1)")
        elif d:
            dmax = max(d)
            eta_max = min(self.alpha0 - 0.5, self.alpha0 / 3, (1 - self.alpha0) / 3)
            if not (0.5 < self.alpha0 - dmax and self.alpha0 + dmax < 1):
                problems.append("alpha0 +- max delta leaves (1/2,1)")
            if dmax >= eta_max:
                problems.append(f"max delta {dmax:g} outside the eta window (< {eta_max:.4g})")
            nl = self.params.nl
            if not nl.is_zero and nl.p >= exponent_table(self.params.grid.dim, self.alpha0 - dmax).p_alpha:
                problems.append("p must stay below p_alpha over the whole sweep")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class SweepRow:
    delta: float
    sup_distance: float
    duhamel_bound: float
    semidistance: float


@dataclass
class SweepResult:
    rows: list
    times: np.ndarray
    distance_profiles: dict
    bound_profiles: dict
    fitted_constant: float

    def distances_decreasing(self):
        d = [r.sup_distance for r in self.rows]
        return all(b < a for a, b in zip(d, d[1:]))

    def semidistance_nonincreasing(self):
        d = [r.semidistance for r in self.rows]
        return all(b <= a for a, b in zip(d, d[1:]))

    def bound_holds(self):
        """distance^2 <= K * B(t) at every sampled t > 0, for every delta."""
        K = self.fitted_constant
        return all(
            np.all(self.distance_profiles[d][1:] ** 2 <= K * self.bound_profiles[d][1:] * (1 + 1e-12))
            for d in self.distance_profiles
        )

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema={SWEEP_SCHEMA}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["delta", "sup_distance", "duhamel_bound", "semidistance"])
            for r in self.rows:
                w.writerow([repr(r.delta), repr(r.sup_distance), repr(r.duhamel_bound), repr(r.semidistance)])


def duhamel_bound_profile(times, gaps, rate):
    """B(t) = int_0^t exp(rate (t - tau)) gap(tau)^2 dtau by the trapezoidal rule."""
    out = np.zeros_like(times, dtype=float)
    # B' = rate B + gap^2, integrated exactly for the exponential and by trapezoid for the source
    for i in range(1, len(times)):
        h = times[i] - times[i - 1]
        e = np.exp(rate * h)
        out[i] = e * out[i - 1] + 0.5 * h * (e * gaps[i - 1] ** 2 + gaps[i] ** 2)
    return out


def alpha_sweep(cfg: SweepConfig, sample_attractors: bool = True) -> SweepResult:
    """Run alpha0 and alpha0 + delta from the same data for every delta.

    For each delta the table holds sup_t ||(z, z_t)(t)||_{H_{-1/2}}, the value at
    T of sqrt(K B(t)) with B the Duhamel integral of the squared multiplier gap
    along the alpha0 velocity, and the semidistance of the alpha0 + delta
    attractor sample to the alpha0 one.  K is fitted on the largest delta as
    ``safety`` times the largest ratio distance^2 / B, then reused for all deltas.
    """
    grid = cfg.params.grid
    icfg = IntegratorConfig(cfg.dt)
    p0 = cfg.params.with_alpha(cfg.alpha0)
    ref = integrate(cfg.s0, p0, icfg, cfg.T)
    t = ref.times - ref.times[0]
    ref_sample = None
    if sample_attractors:
        ref_sample = attractor_sample(p0, cfg.s0, cfg.burn, cfg.span, cfg.spacing, icfg)

    dist, bounds = {}, {}
    samples = {}
    for d in cfg.deltas:
        pa = cfg.params.with_alpha(cfg.alpha0 + d)
        tr = integrate(cfg.s0, pa, icfg, cfg.T)
        dist[d] = h_minus_half_distance(grid, tr.u - ref.u, tr.v - ref.v)
        gaps = _gap_series(grid, ref.v, cfg.alpha0 + d, cfg.alpha0)
        bounds[d] = duhamel_bound_profile(t, gaps, cfg.gronwall_rate)
        if sample_attractors:
            samples[d] = attractor_sample(pa, cfg.s0, cfg.burn, cfg.span, cfg.spacing, icfg)

    d_fit = max(cfg.deltas)
    pos = bounds[d_fit] > 0
    K = cfg.safety * float(np.max(dist[d_fit][pos] ** 2 / bounds[d_fit][pos]))

    rows = []
    for d in cfg.deltas:
        semi = attractor_semidistance(samples[d], ref_sample, cfg.params) if sample_attractors else float("nan")
        rows.append(SweepRow(d, float(dist[d].max()), float(np.sqrt(K * bounds[d][-1])), semi))
    return SweepResult(rows, t, dist, bounds, K)
