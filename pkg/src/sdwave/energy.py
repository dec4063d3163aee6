"""Energy and Lyapunov functionals, decay fits and smoothing diagnostics."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .errors import FitError
from .mollifier import apply_Sl
from .nonlinearity import eval_G, growth_switch
from .spectral import (
    Field,
    State,
    bessel_multiplier,
    lp_norm,
    riesz_multiplier,
)

ENERGY_SCHEMA = "sdwave.energy_report/1"


@dataclass(frozen=True)
class LyapunovParams:
    eps: float
    kappa: float | None = None

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")


# ---------------------------------------------------------------------------
# small helpers working on real arrays


def _sq(grid, vals, weight=None):
    return grid.weighted_square_norm(vals, weight)


def _hdot(grid, vals, s):
    """||.||^2 in the homogeneous space with multiplier |xi|^s."""
    return _sq(grid, vals, riesz_multiplier(grid.kabs_r, 2 * s))


def _hs(grid, vals, s):
    return _sq(grid, vals, bessel_multiplier(grid.kabs_r, 2 * s))


def _ip(grid, a, b):
    return float(np.sum(a * b) * grid.cell_volume)


def _mollified(u: Field, l):
    return u if l is None else apply_Sl(u, l)


# ---------------------------------------------------------------------------
# energy


def total_energy(s: State, params) -> float:
    """E = 1/2 (||v||^2 + ||u||_{H1-dot}^2 + ||u||^2) + int G(u) - (f, u)."""
    g = s.grid
    u, v = s.u.values, s.v.values
    quad = 0.5 * (_sq(g, v) + _hdot(g, u, 1.0) + _sq(g, u))
    return quad + eval_G(params.nl, s.u) - _ip(g, params.f_values, u)


def dissipation_rate(s: State, params) -> float:
    """||u_t||_{H^alpha-dot}^2 + ||u_t||^2, the rate at which E decreases."""
    g = s.grid
    v = s.v.values
    return _hdot(g, v, params.alpha) + _sq(g, v)


def _trapezoid_cumulative(t, y):
    out = np.zeros_like(y, dtype=float)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def energy_equality_residual(traj, params, start=0, normalized=False):
    """|E(t_i) + int_{t_s}^{t_i} (||u_t||_{H^alpha-dot}^2 + ||u_t||^2) - E(t_s)| for i >= s.

    The time integral uses the trapezoidal rule on the saved snapshots, so the
    snapshots should be dense (every step).  With ``normalized`` the residuals
    are divided by |E(t_s)|.
    """
    states = [traj.state(i) for i in range(start, len(traj))]
    t = traj.times[start:]
    E = np.array([total_energy(s, params) for s in states])
    D = np.array([dissipation_rate(s, params) for s in states])
    res = np.abs(E + _trapezoid_cumulative(t, D) - E[0])
    if normalized:
        res = res / abs(E[0])
    return res


# ---------------------------------------------------------------------------
# Lyapunov functional H and its dissipation Phi


def lyapunov_H(s: State, params, lp: LyapunovParams, l=None) -> float:
    """H for the multiplier u_t + eps u; with ``l`` the mollified version (G and g act on S_l u)."""
    g = s.grid
    u, v = s.u.values, s.v.values
    f = params.f_values if l is None else apply_Sl(params.forcing or Field.zeros(g), l).values
    base = 0.5 * (_sq(g, v) + _hdot(g, u, 1.0) + _sq(g, u)) + eval_G(params.nl, _mollified(s.u, l)) - _ip(g, f, u)
    extra = lp.eps * (_ip(g, u, v) + 0.5 * (_hdot(g, u, params.alpha) + _sq(g, u)))
    return base + extra


def dissipation_Phi(s: State, params, lp: LyapunovParams, l=None) -> float:
    g = s.grid
    u, v = s.u.values, s.v.values
    f = params.f_values if l is None else apply_Sl(params.forcing or Field.zeros(g), l).values
    um = _mollified(s.u, l).values
    gu = params.nl.g(um)
    eps = lp.eps
    return (
        _hdot(g, v, params.alpha)
        + (1 - eps) * _sq(g, v)
        + eps * (_hdot(g, u, 1.0) + _sq(g, u) + _ip(g, gu, um) - _ip(g, f, u))
    )


def lyapunov_residual(traj, params, lp: LyapunovParams, l=None):
    """Central-difference dH/dt + Phi at interior snapshots (times, residuals)."""
    H = np.array([lyapunov_H(s, params, lp, l) for s in traj.states()])
    P = np.array([dissipation_Phi(s, params, lp, l) for s in traj.states()])
    t = traj.times
    dH = (H[2:] - H[:-2]) / (t[2:] - t[:-2])
    return t[1:-1], dH + P[1:-1]


def coercivity_kappa(states, params, eps, C=1.0):
    """min over states of (H + C||f||^2) / (||u_t||^2 + ||u||_{H^1}^2 + d0 ||u||_{p+1}^{p+1})."""
    lp = LyapunovParams(eps)
    d0 = 0 if params.nl.is_zero else growth_switch(params.nl.p, params.grid.dim, params.alpha)
    fn = _sq(params.grid, params.f_values)
    out = np.inf
    for s in states:
        g = s.grid
        u, v = s.u.values, s.v.values
        denom = _sq(g, v) + _hs(g, u, 1.0)
        if d0:
            denom += lp_norm(s.u, params.nl.p + 1) ** (params.nl.p + 1)
        if denom == 0:
            continue
        out = min(out, (lyapunov_H(s, params, lp) + C * fn) / denom)
    return out


def calibrate_epsilon(states, params, k_min=1, k_max=20):
    """Largest eps = 2^-k with H coercive and Phi - eps H >= 0 on every probe state.

    Returns ``LyapunovParams(eps, kappa)`` where kappa is the measured
    coercivity constant at the chosen eps.
    """
    for k in range(k_min, k_max + 1):
        eps = 2.0**-k
        lp = LyapunovParams(eps)
        kappa = coercivity_kappa(states, params, eps)
        if not kappa > 0:
            continue
        if all(dissipation_Phi(s, params, lp) - eps * lyapunov_H(s, params, lp) >= 0 for s in states):
            return LyapunovParams(eps, kappa)
    raise FitError("no eps in the dyadic range satisfies the Lyapunov conditions")


# ---------------------------------------------------------------------------
# difference and higher-order functionals


def functional_H2(z: State, alpha: float, gamma: float | None = None, eps: float = 0.0) -> float:
    """||z_t||_{H^-gamma}^2 + ||z||_{H^{1-gamma}}^2 + eps (||z||_{H^alpha-dot}^2 + ||z||^2 + 2 (z, z_t)).

    ``gamma`` defaults to ``alpha``.
    """
    gamma = alpha if gamma is None else gamma
    g = z.grid
    a, b = z.u.values, z.v.values
    val = _hs(g, b, -gamma) + _hs(g, a, 1.0 - gamma)
    if eps:
        val += eps * (_hdot(g, a, alpha) + _sq(g, a) + 2 * _ip(g, a, b))
    return val


def h2_reference_norm(z: State, alpha: float) -> float:
    """||z||_{H^alpha}^2 + ||z_t||_{H^-alpha}^2, the norm H2 is equivalent to."""
    g = z.grid
    return _hs(g, z.u.values, alpha) + _hs(g, z.v.values, -alpha)


def functional_H3(u: Field, alpha: float) -> float:
    g = u.grid
    vals = u.values
    return _hdot(g, vals, 1.0 + alpha) + _hdot(g, vals, 1.0) + _sq(g, vals)


def acceleration(s: State, params, dealias=True) -> Field:
    """u_tt read off the equation: Delta u - (-Delta)^alpha u_t - u_t - u - g(u) + f."""
    g = s.grid
    a = 1.0 + g.kabs_r**2
    b = 1.0 + g.kabs_r ** (2 * params.alpha)
    gu = g.rfft(params.nl.g(s.u.values))
    if dealias:
        gu = gu * g.dealias_mask_r
    acc = -a * g.rfft(s.u.values) - b * g.rfft(s.v.values) - gu + g.rfft(params.f_values)
    return Field(g, g.irfft(acc))


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class EnergyReport:
    t: float
    E: float
    H: float
    Phi: float
    H2: float
    H3: float
    H4: float
    u_H1: float
    u_Lp1: float
    ut_L2: float
    ut_Halpha: float
    u_H1alpha: float
    ut_Hminus_alpha: float

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def to_row(self):
        return [repr(float(v)) for v in asdict(self).values()]

    @classmethod
    def csv_header(cls):
        return f"# schema={ENERGY_SCHEMA}\n" + ",".join(cls.columns()) + "\n"

    def to_csv_row(self):
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow(self.to_row())
        return buf.getvalue()


def energy_report(s: State, params, lp: LyapunovParams, psi=None) -> EnergyReport:
    """Snapshot of every functional at one state.

    H2 is evaluated on the velocity pair (u_t, u_tt) with u_tt read off the
    equation; H4 is NaN unless a cut-off ``psi`` is supplied.
    """
    g = s.grid
    u, v = s.u.values, s.v.values
    acc = acceleration(s, params)
    h4 = float("nan")
    if psi is not None:
        from .tailcut import tail_energy_H4

        h4 = tail_energy_H4(s, psi, params, lp)
    rep = EnergyReport(
        t=s.time,
        E=total_energy(s, params),
        H=lyapunov_H(s, params, lp),
        Phi=dissipation_Phi(s, params, lp),
        H2=functional_H2(State(s.v, acc, s.time), params.alpha, eps=lp.eps),
        H3=functional_H3(s.u, params.alpha),
        H4=h4,
        u_H1=np.sqrt(_hs(g, u, 1.0)),
        u_Lp1=lp_norm(s.u, params.nl.p + 1),
        ut_L2=np.sqrt(_sq(g, v)),
        ut_Halpha=np.sqrt(_hs(g, v, params.alpha)),
        u_H1alpha=np.sqrt(_hs(g, u, 1.0 + params.alpha)),
        ut_Hminus_alpha=np.sqrt(_hs(g, v, -params.alpha)),
    )
    if not all(np.isfinite(x) for k, x in asdict(rep).items() if k != "H4" or psi is not None):
        raise FloatingPointError("non-finite entry in energy report")
    return rep


def phase_norm(s: State, params=None) -> float:
    """||(u, u_t)|| in the phase space: ||u||_{H^1}^2 + d0 ||u||_{p+1}^2 + ||u_t||^2.

    Without ``params`` (or with g = 0) the L^{p+1} part is dropped.
    """
    g = s.grid
    sq = _hs(g, s.u.values, 1.0) + _sq(g, s.v.values)
    if params is not None and not params.nl.is_zero:
        if growth_switch(params.nl.p, g.dim, params.alpha):
            sq += lp_norm(s.u, params.nl.p + 1) ** 2
    return float(np.sqrt(sq))


# ---------------------------------------------------------------------------
# decay fits


@dataclass(frozen=True)
class DecayFit:
    kappa: float
    A: float
    B: float
    residual: float


def _exp_model(t, A, kappa, B):
    return A * np.exp(-kappa * t) + B


def decay_fit(times, values, monotone_tol=0.05) -> DecayFit:
    """Least-squares fit of A exp(-kappa t) + B with relative residuals.

    Raises :class:`FitError` for fewer than 10 samples, nonpositive values, or
    when the series rises by more than ``monotone_tol`` of its range anywhere.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.size < 10:
        raise FitError("fit failed: need at least 10 samples")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise FitError("fit failed: values must be positive")
    span = y.max() - y.min()
    rises = np.max(y[1:] - np.minimum.accumulate(y)[:-1])
    if span > 0 and rises > monotone_tol * span:
        raise FitError("fit failed: series is not monotone")

    t0 = t - t[0]
    B0 = 0.5 * y.min()
    logy = np.log(y - B0)
    slope = np.polyfit(t0, logy, 1)[0]
    p0 = (y[0] - B0, max(-slope, 1e-6), B0)
    try:
        # the covariance is unused, so an exact fit is not worth a warning
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(_exp_model, t0, y, p0=p0, sigma=y, maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"fit failed: {exc}") from exc
    A, kappa, B = popt
    rel = (_exp_model(t0, *popt) - y) / y
    # A is reported at the absolute time origin
    return DecayFit(float(kappa), float(A * np.exp(kappa * t[0])), float(B), float(np.sqrt(np.mean(rel**2))))


# ---------------------------------------------------------------------------
# smoothing


@dataclass(frozen=True)
class SmoothingRow:
    t: float
    weighted_ut_Halpha: float
    weighted_utt_Hminus_alpha: float
    u_H1alpha_sq: float


def smoothing_profile(traj, params):
    """Per saved time: t^2 ||u_t||_{H^alpha}^2, t^2 ||u_tt||_{H^-alpha}^2, ||u||_{H^{1+alpha}}^2."""
    rows = []
    g = traj.grid
    for s in traj.states():
        t = s.time
        if t <= 0:
            continue
        acc = acceleration(s, params)
        rows.append(
            SmoothingRow(
                t,
                t**2 * _hs(g, s.v.values, params.alpha),
                t**2 * _hs(g, acc.values, -params.alpha),
                _hs(g, s.u.values, 1.0 + params.alpha),
            )
        )
    return rows


def smoothing_report(profiles: dict):
    """Compare smoothing profiles computed at several resolutions.

    ``profiles`` maps the number of modes to the output of
    :func:`smoothing_profile` on a common set of times.  Returns a list of dicts
    with the per-resolution values, the max/min ratio across resolutions and
    the sup over resolutions of t^2 ||u_t||_{H^alpha}^2.
    """
    keys = sorted(profiles)
    n = len(profiles[keys[0]])
    table = []
    for i in range(n):
        t = profiles[keys[0]][i].t
        w = [profiles[m][i].weighted_ut_Halpha for m in keys]
        h = [profiles[m][i].u_H1alpha_sq for m in keys]
        a = [profiles[m][i].weighted_utt_Hminus_alpha for m in keys]
        table.append(
            {
                "t": t,
                **{f"weighted_ut_Halpha_M{m}": x for m, x in zip(keys, w)},
                **{f"weighted_utt_Hminus_alpha_M{m}": x for m, x in zip(keys, a)},
                **{f"u_H1alpha_sq_M{m}": x for m, x in zip(keys, h)},
                "sup_weighted_ut_Halpha": max(w),
                "resolution_ratio": max(w) / min(w),
                "utt_resolution_ratio": max(a) / min(a),
                "H1alpha_resolution_ratio": max(h) / min(h),
            }
        )
    return table


def small_time_exponent(times, values):
    """Slope of log(values) against log(t); logged, not asserted."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    return float(np.polyfit(np.log(t), np.log(y), 1)[0])
