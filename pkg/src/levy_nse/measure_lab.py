"""Time-averaged empirical measures and the diagnostics built on them.

``mu_T`` is the uniform-in-time law of the recorded states on ``(burn_in, T]``.
A state is summarized by observables: ``|u|``, ``|u|_V``, ``|A^delta u|`` and the
first ``k`` coefficients.  Full states are kept so measures can be pushed
forward by the dynamics.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist

from .constants import MAX_BLOWUP_FRACTION
from .csvio import write_csv
from .errors import BlowUpError, CoverageError, ParameterError, SchemaError
from .integrator import integrate, noise_path, noise_paths_batch
from .stable_levy import RngStream

logger = logging.getLogger(__name__)


OBSERVABLES = ("norm_h", "norm_v", "norm_frac", "coeffs")


def _check_include(include):
    include = tuple(include)
    bad = [x for x in include if x not in OBSERVABLES]
    if bad or not include:
        raise ParameterError(f"unknown observables {bad}; choose from {OBSERVABLES}")
    if "norm_frac" not in include:
        raise ParameterError("observables must include norm_frac (tightness is measured in it)")
    return include


def schema(k, delta, include=OBSERVABLES):
    names = []
    for item in _check_include(include):
        if item == "norm_frac":
            names.append(f"norm_frac{delta:g}")
        elif item == "coeffs":
            names.extend(f"u{i}" for i in range(k))
        else:
            names.append(item)
    return tuple(names)


def observables(model, u, delta=0.25, k=8, include=OBSERVABLES):
    u = np.atleast_2d(u)
    h, v, frac = model.norms(u, delta)
    k = min(k, model.N)
    cols = []
    for item in _check_include(include):
        if item == "coeffs":
            cols.append(u[:, :k])
        else:
            cols.append({"norm_h": h, "norm_v": v, "norm_frac": frac}[item][:, None])
    return np.hstack(cols)


@dataclass(frozen=True)
class EmpiricalMeasure:
    samples: np.ndarray      # (n, d) observables
    weights: np.ndarray      # (n,), sums to 1
    T: float
    delta: float
    names: tuple
    times: np.ndarray = None
    states: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.samples.shape[0] != self.weights.size or self.samples.shape[0] == 0:
            raise ParameterError("empirical measure needs one weight per sample")
        if not math.isclose(float(self.weights.sum()), 1.0, rel_tol=1e-12):
            raise ParameterError("weights must sum to 1")

    def __len__(self):
        return self.weights.size

    def column(self, name):
        return self.samples[:, self.names.index(name)]

    @property
    def frac_norm(self):
        col = next(i for i, n in enumerate(self.names) if n.startswith("norm_frac"))
        return self.samples[:, col]

    @property
    def include(self):
        out = []
        for n in self.names:
            key = "coeffs" if n.startswith("u") else ("norm_frac" if n.startswith("norm_frac") else n)
            if key not in out:
                out.append(key)
        return tuple(out)

    @property
    def k(self):
        return sum(n.startswith("u") for n in self.names)

    def mean(self):
        return self.weights @ self.samples


def build_mu_T(records, model, T=None, burn_in=None, delta=0.25, k=8, include=OBSERVABLES):
    """Uniform-in-time empirical measure over recorded times in ``(burn_in, T]``.

    Several records are pooled with equal weight per record.
    """
    if not isinstance(records, (list, tuple)):
        records = [records]
    if not records:
        raise CoverageError("no trajectories to build a measure from")
    T = float(records[0].t[-1]) if T is None else float(T)
    burn_in = T / 10.0 if burn_in is None else float(burn_in)
    if not burn_in < T:
        raise ParameterError("burn_in must be smaller than T")
    obs, wts, times, states = [], [], [], []
    for rec in records:
        if rec.t[-1] < T - 1e-9 * max(T, 1.0):
            raise CoverageError(f"record ends at {rec.t[-1]:g} < T={T:g}")
        dt = rec.dt
        lo = int(math.floor(burn_in / dt + 1e-9)) + 1
        hi = int(math.floor(T / dt + 1e-9))
        if hi < lo:
            raise CoverageError("no recorded times in (burn_in, T]")
        u = rec.u[lo:hi + 1]
        obs.append(observables(model, u, delta, k, include))
        wts.append(np.full(hi - lo + 1, 1.0 / (hi - lo + 1) / len(records)))
        times.append(rec.t[lo:hi + 1])
        states.append(u)
    w = np.concatenate(wts)
    w /= w.sum()
    return EmpiricalMeasure(np.vstack(obs), w, T, delta, schema(min(k, model.N), delta, include),
                            np.concatenate(times), np.vstack(states))


# ---------------------------------------------------------------------------
# tightness


@dataclass(frozen=True)
class TightnessReport:
    radii: np.ndarray
    tail_mass: np.ndarray
    markov_bound: np.ndarray
    p: float
    moment: float               # E|A^delta u|^p under mu
    tail_exponent: float
    band: float                 # half-width of the 99% band on tail_exponent
    hill: float
    markov_ok: bool
    degenerate: bool = False

    @property
    def consistent(self):
        """Fitted tail exponent is at least ``p`` within its band."""
        return bool(self.tail_exponent + self.band >= self.p)


def tail_masses(x, w, radii):
    """``mu(|x| > R)`` for every ``R`` in ``radii``."""
    order = np.argsort(x)
    xs, cw = x[order], np.cumsum(w[order])
    idx = np.searchsorted(xs, radii, side="right")
    below = np.where(idx > 0, cw[np.maximum(idx - 1, 0)], 0.0)
    return np.clip(1.0 - below, 0.0, 1.0)


def tightness_report(mu, p, n_radii=40, fit_range=(0.2, None)):
    """Tail masses of ``|A^delta u|`` balls, the Markov envelope and a tail fit.

    The fit regresses ``log mu(B_R^c)`` on ``log R`` over radii with tail mass
    between ``20 / n`` and ``fit_range[0]``.
    """
    if not p > 0:
        raise ParameterError("moment order must be positive")
    x = mu.frac_norm
    w = mu.weights
    moment = float(w @ x ** p)
    n = x.size
    if np.all(x == x[0]):
        r = np.array([x[0] * 0.5, x[0] * 2.0]) if x[0] > 0 else np.array([0.5, 1.0])
        tm = tail_masses(x, w, r)
        mb = moment / r ** p
        return TightnessReport(r, tm, mb, p, moment, math.nan, math.nan, math.nan,
                               bool(np.all(tm <= mb * (1 + 1e-12))), True)
    pos = x[x > 0]
    lo = max(np.quantile(pos, 0.01), 1e-300)
    hi = float(x.max())
    radii = np.geomspace(lo, hi, n_radii)
    tm = tail_masses(x, w, radii)
    mb = moment / radii ** p
    markov_ok = bool(np.all(tm <= mb * (1 + 1e-12)))
    upper = fit_range[0]
    lower = fit_range[1] if fit_range[1] is not None else 20.0 / n
    sel = (tm <= upper) & (tm >= lower)
    if sel.sum() >= 3:
        fit = stats.linregress(np.log(radii[sel]), np.log(tm[sel]))
        tq = stats.t.ppf(0.995, sel.sum() - 2)
        expo, band = -fit.slope, tq * fit.stderr
    else:
        expo, band = math.nan, math.nan
    k = max(int(0.01 * n), 10)
    top = np.sort(x)[-k - 1:]
    hill = float(1.0 / np.mean(np.log(top[1:] / top[0]))) if top[0] > 0 else math.nan
    return TightnessReport(radii, tm, mb, p, moment, float(expo), float(band), hill, markov_ok)


# ---------------------------------------------------------------------------
# distances


def _mean_dist(x, wx, y, wy, exponent, chunk):
    total = 0.0
    for i in range(0, x.shape[0], chunk):
        d = cdist(x[i:i + chunk], y)
        if exponent != 1.0:
            d **= exponent
        total += wx[i:i + chunk] @ d @ wy
    return total


def energy_distance(x, y, wx=None, wy=None, exponent=1.0, chunk=2048):
    """``E|X - Y|^a - E|X - X'|^a / 2 - E|Y - Y'|^a / 2`` for weighted clouds.

    With this normalization two point masses at distance ``d`` are ``d**a`` apart.
    """
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    y = np.asarray(y, dtype=float).reshape(len(y), -1)
    if x.shape[1] != y.shape[1]:
        raise SchemaError("clouds have different dimensions")
    if not 0 < exponent < 2:
        raise ParameterError("exponent must lie in (0, 2)")
    wx = np.full(len(x), 1.0 / len(x)) if wx is None else np.asarray(wx, dtype=float)
    wy = np.full(len(y), 1.0 / len(y)) if wy is None else np.asarray(wy, dtype=float)
    xy = _mean_dist(x, wx, y, wy, exponent, chunk)
    xx = _mean_dist(x, wx, x, wx, exponent, chunk)
    yy = _mean_dist(y, wy, y, wy, exponent, chunk)
    return max(xy - 0.5 * xx - 0.5 * yy, 0.0)


def stabilization_distance(mu1, mu2, exponent=1.0):
    """Energy distance between the observable clouds of two measures."""
    if mu1.names != mu2.names:
        raise SchemaError(f"observable schemas differ: {mu1.names} vs {mu2.names}")
    return energy_distance(mu1.samples, mu2.samples, mu1.weights, mu2.weights, exponent)


# ---------------------------------------------------------------------------
# Feller probe and invariance


@dataclass(frozen=True)
class FellerReport:
    radius: float
    distances: np.ndarray
    n_blowup: int

    @property
    def max(self):
        return float(self.distances.max()) if self.distances.size else math.nan

    @property
    def median(self):
        return float(np.median(self.distances)) if self.distances.size else math.nan

    @property
    def ratio_max(self):
        return self.max / self.radius if self.radius > 0 else 0.0

    @property
    def ratio_median(self):
        return self.median / self.radius if self.radius > 0 else 0.0


def feller_probe(u0, radius, n_pairs, t_eval, cfg, model, params, seed, alpha=0.0):
    """Distances at ``t_eval`` between ``u0`` and perturbations of size ``radius``.

    All members share one noise path, so the distances isolate the dependence
    on the initial condition.
    """
    if radius < 0:
        raise ParameterError("radius must be non-negative")
    n_steps = int(round(t_eval / cfg.h))
    if n_steps < 1:
        raise ParameterError("t_eval shorter than one step")
    u0 = np.asarray(u0, dtype=float)
    dirs = RngStream(seed, 1).child(0).generator.standard_normal((n_pairs, model.N))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    z = noise_path(params, model, alpha, cfg.h, n_steps, seed, 0)
    v0 = np.vstack([u0, u0 + radius * dirs])
    v0[:, : params.m] -= z[0]
    rec, failed = integrate(v0, z, model, cfg.h, alpha, cfg.scheme, n_steps, cfg.theta)
    end = rec[-1]
    if failed[0] >= 0:
        raise BlowUpError(failed[0] * cfg.h)
    ok = failed[1:] < 0
    dist = np.linalg.norm(end[1:][ok] - end[0], axis=1)
    return FellerReport(float(radius), dist, int((~ok).sum()))


def feller_sweep(u0, radii, n_pairs, t_eval, cfg, model, params, seed, alpha=0.0):
    """Probe over ``radii``; returns the reports and the spread of median ratios."""
    reports = [feller_probe(u0, r, n_pairs, t_eval, cfg, model, params, seed, alpha)
               for r in radii]
    ratios = np.array([r.ratio_median for r in reports])
    spread = float(ratios.max() / ratios.min()) if np.all(ratios > 0) else math.inf
    return reports, spread


def pushforward(mu, s, cfg, model, params, seed, alpha=0.0):
    """Advance every state of ``mu`` by time ``s`` with fresh, independent noise."""
    if mu.states is None:
        raise ParameterError("measure carries no states to push forward")
    n_steps = int(round(s / cfg.h))
    if n_steps < 1 or abs(n_steps * cfg.h - s) > 1e-9 * max(s, 1.0):
        raise ParameterError("shift must be a positive multiple of the time step")
    n = len(mu)
    z = noise_paths_batch(params, model, alpha, cfg.h, n_steps, RngStream(seed, 2), n)
    v0 = mu.states.copy()
    v0[:, : params.m] -= z[0]
    rec, failed = integrate(v0, z, model, cfg.h, alpha, cfg.scheme, n_steps, cfg.theta)
    u = rec[-1]
    u[:, : params.m] += z[-1]
    ok = failed < 0
    n_bad = int((~ok).sum())
    if n_bad:
        logger.warning("pushforward: %d of %d members blew up", n_bad, n)
    if n_bad > MAX_BLOWUP_FRACTION * n:
        raise BlowUpError(s)
    w = mu.weights[ok] / mu.weights[ok].sum()
    obs = observables(model, u[ok], mu.delta, mu.k, mu.include)
    return EmpiricalMeasure(obs, w, mu.T + s, mu.delta,
                            mu.names, None, u[ok])


def invariance_residual(mu, s, cfg, model, params, seed, alpha=0.0):
    """Energy distance between ``mu`` and its pushforward by the dynamics over ``s``."""
    return stabilization_distance(mu, pushforward(mu, s, cfg, model, params, seed, alpha))


# ---------------------------------------------------------------------------
# output


def write_measure_csv(path, mu, meta=None):
    times = mu.times if mu.times is not None else np.full(len(mu), math.nan)
    rows = ([t] + list(x) for t, x in zip(times, mu.samples))
    write_csv(path, ("t",) + mu.names, rows, meta)


def write_tightness_csv(path, report, meta=None):
    rows = zip(report.radii, report.tail_mass, report.markov_bound)
    write_csv(path, ("R", "tail_mass", "markov_bound"), rows, meta)


def write_stabilization_csv(path, horizons, distances, residuals, meta=None):
    write_csv(path, ("T", "distance_to_2T", "invariance_residual"),
              zip(horizons, distances, residuals), meta)
