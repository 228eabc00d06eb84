"""Time stepping of the shifted equation and its energy bookkeeping.

The velocity is split as ``u = v + z`` where ``z`` is the stationary OU
process ``dz + (nu A + alpha) z dt = G dL`` on the driven modes.  Then ``v``
has no noise and solves

    dv/dt = -nu A v - C (v + z) - B(u, u) + f + alpha z.

The ``-C z`` term appears because the OU part carries no rotation.  ``v`` is
advanced on the grid where ``z`` is sampled exactly; ``A`` is treated
implicitly and everything else explicitly.

Energy ledger
-------------
With ``rho = (nu - 1/2) lam_1`` and ``eta`` the constant of
``|<B(w, e_l), w>| <= eta |w|**2``, every solution satisfies

    1/2 d|v|^2/dt + 1/2 |v|_V^2 <= 1/2 gamma |v|^2 + p,
    gamma = -rho + 4 eta sum_l |z_l|,
    p     = |f|^2 / rho + |(alpha - C) z|^2 / rho + 2 eta |z|^2 sum_l |z_l|.

Here ``|(alpha - C) z|^2 = alpha^2 |z|^2 + |C z|^2`` because ``C`` is skew.
The ledger evaluates both sides with the forward difference on the recording
grid.  The same bookkeeping gives the Gronwall envelope, the bound on
``int |v|_V^2``, and the ``|A^delta v|^2`` bound used by ``adelta_bound``.
"""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .errors import BlowUpError, CoverageError, ParameterError
from .ou_process import mode_streams, ou_path, ou_stationary_init
from .stable_levy import sample_standard_stable

logger = logging.getLogger(__name__)

SCHEMES = ("semi_implicit", "explicit_euler")
_BLOWUP = 1e150


@dataclass(frozen=True)
class IntegratorConfig:
    h: float
    T: float
    scheme: str = "semi_implicit"
    record_stride: int = 1
    theta: float = 0.0  # bound on h w^2 before a step is split; 0 disables

    def __post_init__(self):
        if not self.h > 0 or not math.isfinite(self.h):
            raise ParameterError(f"time step must be positive, got {self.h}")
        if not self.T >= self.h:
            raise ParameterError(f"horizon T={self.T} shorter than the step h={self.h}")
        if self.scheme not in SCHEMES:
            raise ParameterError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ParameterError("record_stride must be a positive integer")
        if not self.theta >= 0:
            raise ParameterError("theta must be non-negative")

    @property
    def n_steps(self):
        return int(round(self.T / self.h))

    def digest(self):
        text = repr(sorted(asdict(self).items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# kernel


@numba.njit(cache=True, nogil=True)
def _nonlinear(v, Z, s, zb, m, bj, bk, bl, bv, cr, cc, cv, u, out):
    """``out = -C u - B(u, u)`` with ``u = v + z``; returns ``|out| / max(|u|, 1)``."""
    n = v.size
    for i in range(n):
        u[i] = v[i]
        out[i] = 0.0
    for i in range(m):
        u[i] += Z[s, zb, i]
    for e in range(cv.size):
        out[cr[e]] -= cv[e] * u[cc[e]]
    for e in range(bv.size):
        out[bl[e]] -= bv[e] * u[bj[e]] * u[bk[e]]
    nu2 = 0.0
    no2 = 0.0
    for i in range(n):
        nu2 += u[i] * u[i]
        no2 += out[i] * out[i]
    return np.sqrt(no2) / max(np.sqrt(nu2), 1.0)


@numba.njit(cache=True, nogil=True)
def _kernel(V, Z, lam, nu, bj, bk, bl, bv, cr, cc, cv, f, alpha, h, stride, implicit,
            theta, max_sub):
    nb, n = V.shape
    n_steps = Z.shape[0] - 1
    shared = Z.shape[1] == 1
    m = Z.shape[2]
    n_rec = n_steps // stride + 1
    rec = np.empty((n_rec, nb, n))
    failed = np.full(nb, -1, dtype=np.int64)
    n_split = np.zeros(nb, dtype=np.int64)
    rec[0] = V
    u = np.empty(n)
    nl = np.empty(n)
    force = np.empty(n)
    for b in range(nb):
        zb = 0 if shared else b
        v = V[b].copy()
        r = 1
        for s in range(n_steps):
            for i in range(n):
                force[i] = f[i]
            for i in range(m):
                force[i] += alpha * Z[s, zb, i]
            rate = _nonlinear(v, Z, s, zb, m, bj, bk, bl, bv, cr, cc, cv, u, nl)
            q = 1
            if theta > 0.0 and h * rate * rate > theta:
                q = min(int(np.ceil(h * rate * rate / theta)), max_sub)
                n_split[b] += 1
            hh = h / q
            ok = True
            for sub in range(q):
                if sub > 0:
                    _nonlinear(v, Z, s, zb, m, bj, bk, bl, bv, cr, cc, cv, u, nl)
                for i in range(n):
                    if implicit:
                        v[i] = (v[i] + hh * (nl[i] + force[i])) / (1.0 + hh * nu * lam[i])
                    else:
                        v[i] = v[i] + hh * (nl[i] + force[i] - nu * lam[i] * v[i])
                    if not (abs(v[i]) < _BLOWUP):
                        ok = False
                if not ok:
                    break
            if not ok:
                failed[b] = s
                for q2 in range(r, n_rec):
                    for i in range(n):
                        rec[q2, b, i] = np.nan
                break
            if (s + 1) % stride == 0:
                rec[r, b] = v
                r += 1
    return rec, failed, n_split


def _coo(model):
    """COO arrays for ``B(u, u)`` and ``C``.

    Only the part of ``b[j, k, l]`` symmetric in ``(j, k)`` contributes to
    ``B(u, u)``, so pairs are folded onto ``j <= k``.
    """
    t = model.tensor
    lo, hi = np.minimum(t.j, t.k), np.maximum(t.j, t.k)
    key = (lo * t.N + hi) * t.N + t.l
    uniq, inv = np.unique(key, return_inverse=True)
    val = np.zeros(uniq.size)
    np.add.at(val, inv, t.val)
    keep = val != 0.0
    uniq, val = uniq[keep], val[keep]
    bl = uniq % t.N
    bk = (uniq // t.N) % t.N
    bj = uniq // (t.N * t.N)
    c = model.coriolis.skew
    cr, cc = np.nonzero(c)
    return (bj, bk, bl, val,
            cr.astype(np.int64), cc.astype(np.int64), np.ascontiguousarray(c[cr, cc]))


def integrate(v0, z_grid, model, h, alpha=0.0, scheme="semi_implicit", stride=1,
              theta=0.0, max_sub=100_000):
    """Advance a batch of ``v`` states along one shared ``z`` grid path.

    ``v0`` has shape ``(N,)`` or ``(batch, N)``; ``z_grid`` has shape
    ``(n_steps + 1, m)`` (shared by all members) or ``(n_steps + 1, batch, m)``
    (one path per member).  Returns recorded states of shape
    ``(n_rec, batch, N)`` and the failing step per member (``-1`` if finite).

    With ``theta > 0`` a step is split into ``q`` equal substeps when
    ``h w**2 > theta``, where ``w = |N(u)| / max(|u|, 1)`` and ``N`` is the
    explicit part.  Explicit Euler injects energy at rate about ``h w**2``
    into the conservative rotation; the guard keeps it below ``theta``.
    ``z`` stays frozen, so the noise path is unchanged.
    """
    if scheme not in SCHEMES:
        raise ParameterError(f"unknown scheme {scheme!r}")
    V = np.atleast_2d(np.asarray(v0, dtype=float)).copy()
    Z = np.asarray(z_grid, dtype=float)
    if Z.ndim == 2:
        Z = Z[:, None, :]
    Z = np.ascontiguousarray(Z)
    if (Z.ndim != 3 or Z.shape[2] > model.N or V.shape[1] != model.N
            or Z.shape[1] not in (1, V.shape[0])):
        raise ParameterError("state and noise shapes disagree with the model")
    bj, bk, bl, bv, cr, cc, cv = _coo(model)
    rec, failed, n_split = _kernel(
        V, Z, model.lam, float(model.nu), bj, bk, bl, bv, cr, cc, cv,
        np.asarray(model.forcing, dtype=float), float(alpha), float(h),
        int(stride), scheme == "semi_implicit", float(theta), int(max_sub))
    if n_split.any():
        logger.debug("split %d steps into substeps", int(n_split.sum()))
    return rec, failed


def step_v(v, z_now, h, model, alpha=0.0, scheme="semi_implicit"):
    """One step of the shifted equation, ``z`` frozen at ``z_now``.

    Semi-implicit: ``v' = (I + h nu A)^{-1} (v + h (-C u - B(u, u) + f + alpha z))``
    with ``u = v + z``.  Raises :class:`BlowUpError` on a non-finite result.
    """
    v = np.asarray(v, dtype=float)
    z = np.zeros(model.N)
    z[: np.size(z_now)] = z_now
    u = v + z
    rhs = -model.apply_C(u) - model.apply_B(u, u) + model.forcing + alpha * z
    if scheme == "semi_implicit":
        out = (v + h * rhs) / (1.0 + h * model.nu * model.lam)
    elif scheme == "explicit_euler":
        out = v + h * (rhs - model.nu * model.lam * v)
    else:
        raise ParameterError(f"unknown scheme {scheme!r}")
    if not np.all(np.isfinite(out)) or np.max(np.abs(out)) >= _BLOWUP:
        raise BlowUpError(math.nan)
    return out


# ---------------------------------------------------------------------------
# noise and trajectories


def noise_path(params, model, alpha, h, n_steps, seed, trajectory=0, refine=1):
    """Stationary exact OU grid path with damping ``nu lam + alpha``.

    The path is drawn on the grid ``h / refine`` and subsampled, so runs
    with ``(h, refine=2)`` and ``(h/2, refine=1)`` see the same noise.
    """
    if params.m > model.N:
        raise ParameterError(f"m={params.m} driven modes exceed N={model.N}")
    head = model.nu * model.lam[: params.m]
    streams = mode_streams(seed, trajectory, params.m)
    state = ou_stationary_init(params, head, streams, alpha)
    fine = ou_path(state, h / refine, n_steps * refine, params, streams)
    return fine[::refine]


def noise_paths_batch(params, model, alpha, h, n_steps, stream, n_paths):
    """Independent stationary OU grid paths, shape ``(n_steps + 1, n_paths, m)``.

    All draws come from one stream; each path uses its own draws.
    """
    head = model.nu * model.lam[: params.m]
    rates = head + alpha
    scale0 = params.sigma_array * (params.beta * rates) ** (-1.0 / params.beta)
    b = params.beta
    step = params.sigma_array * ((-np.expm1(-b * rates * h)) / (b * rates)) ** (1.0 / b)
    draws = sample_standard_stable(b, stream, (n_steps + 1, n_paths, params.m))
    out = np.empty_like(draws)
    out[0] = scale0 * draws[0]
    decay = np.exp(-rates * h)
    for n in range(n_steps):
        out[n + 1] = decay * out[n] + step * draws[n + 1]
    return out


@dataclass(frozen=True)
class TrajectoryRecord:
    """Recorded grid states of one path; ``u = v + z`` on the driven modes."""

    t: np.ndarray
    v: np.ndarray
    z: np.ndarray
    alpha: float
    h: float
    stride: int
    seed: int = 0
    trajectory: int = 0
    config_hash: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def u(self):
        out = self.v.copy()
        out[:, : self.z.shape[1]] += self.z
        return out

    @property
    def dt(self):
        return self.h * self.stride

    def __len__(self):
        return self.t.size

    def index(self, t):
        i = int(round(t / self.dt))
        if i < 0 or i >= self.t.size or abs(self.t[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise CoverageError(f"time {t} is not on the recording grid [0, {self.t[-1]}]")
        return i


def simulate(u0, cfg, model, params, seed, alpha=0.0, trajectory=0, refine=1,
             config_hash=None):
    """One trajectory from ``u0``; raises :class:`BlowUpError` with the partial record."""
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (model.N,) or not np.all(np.isfinite(u0)):
        raise ParameterError("initial field must be a finite vector of length N")
    n_steps = cfg.n_steps
    z = noise_path(params, model, alpha, cfg.h, n_steps, seed, trajectory, refine)
    v0 = u0.copy()
    v0[: params.m] -= z[0]
    rec, failed = integrate(v0, z, model, cfg.h, alpha, cfg.scheme, cfg.record_stride,
                            cfg.theta)
    stride = cfg.record_stride
    record = TrajectoryRecord(
        t=np.arange(rec.shape[0]) * (cfg.h * stride),
        v=rec[:, 0, :],
        z=z[::stride][: rec.shape[0]],
        alpha=float(alpha),
        h=cfg.h,
        stride=stride,
        seed=int(seed),
        trajectory=int(trajectory),
        config_hash=config_hash or cfg.digest(),
        meta={"scheme": cfg.scheme, "refine": refine},
    )
    if failed[0] >= 0:
        t_fail = failed[0] * cfg.h
        keep = int(failed[0] // stride) + 1
        partial = TrajectoryRecord(record.t[:keep], record.v[:keep], record.z[:keep],
                                   record.alpha, record.h, stride, record.seed,
                                   record.trajectory, record.config_hash, record.meta)
        logger.warning("blow-up at t=%g (seed %d, trajectory %d)", t_fail, seed, trajectory)
        raise BlowUpError(t_fail, partial)
    return record


# ---------------------------------------------------------------------------
# energy ledger


@dataclass(frozen=True)
class LedgerConstants:
    """Constants of the energy inequality for one run."""

    eta: float
    alpha: float
    rho: float
    delta: float = 0.25

    @property
    def c(self):
        return 1.0 / self.rho

    @property
    def c_prime(self):
        return self.rho / 4.0

    @classmethod
    def for_model(cls, model, eta, alpha, delta=0.25):
        rho = (model.nu - 0.5) * model.basis.lambda1
        if not rho > 0:
            raise ParameterError("the energy inequality needs nu > 1/2")
        return cls(float(eta), float(alpha), float(rho), float(delta))


@dataclass(frozen=True)
class EnergyLedger:
    t: np.ndarray
    v2: np.ndarray
    vV2: np.ndarray
    vdelta2: np.ndarray
    gamma: np.ndarray
    p: np.ndarray
    dplus: np.ndarray          # forward difference of |v|^2; last entry repeats the previous
    dineq_residual: np.ndarray  # lhs - rhs; nonpositive for the exact flow

    def __len__(self):
        return self.t.size


def _pad(z, n):
    out = np.zeros(z.shape[:-1] + (n,))
    out[..., : z.shape[-1]] = z
    return out


def gamma_p(model, z, const):
    """``gamma(t)`` and ``p(t)`` for OU values ``z`` of shape ``(..., m)``."""
    z = np.asarray(z, dtype=float)
    s = np.abs(z).sum(axis=-1)
    z2 = np.sum(z * z, axis=-1)
    cz2 = np.sum(model.apply_C(_pad(z, model.N)) ** 2, axis=-1)
    f2 = float(model.forcing @ model.forcing)
    gamma = -const.rho + 4.0 * const.eta * s
    p = (f2 + const.alpha ** 2 * z2 + cz2) / const.rho + 2.0 * const.eta * z2 * s
    return gamma, p


def energy_ledger_row(v, v_next, z, dt, model, const):
    """Both sides of the energy inequality at one grid time; returns ``(lhs, rhs)``."""
    v = np.asarray(v, dtype=float)
    v2 = float(v @ v)
    dplus = (float(np.dot(v_next, v_next)) - v2) / dt
    gamma, p = gamma_p(model, np.asarray(z, dtype=float), const)
    lhs = 0.5 * dplus + 0.5 * float(model.sq_norm(v, 0.5))
    rhs = 0.5 * float(gamma) * v2 + float(p)
    return lhs, rhs


def energy_ledger(record, model, const):
    """Vectorized ledger over a whole record."""
    v = record.v
    v2 = np.sum(v * v, axis=1)
    vV2 = model.sq_norm(v, 0.5)
    vd2 = model.sq_norm(v, const.delta)
    gamma, p = gamma_p(model, record.z, const)
    dplus = np.empty_like(v2)
    if v2.size > 1:
        dplus[:-1] = np.diff(v2) / record.dt
        dplus[-1] = dplus[-2]
    else:
        dplus[:] = 0.0
    resid = 0.5 * dplus + 0.5 * vV2 - (0.5 * gamma * v2 + p)
    return EnergyLedger(record.t, v2, vV2, vd2, gamma, p, dplus, resid)


def drift(model, v, z, alpha):
    """Right side ``-nu A v - C u - B(u, u) + f + alpha z`` of the shifted equation."""
    zf = _pad(np.asarray(z, dtype=float), model.N)
    u = v + zf
    return (-model.nu * model.lam * v - model.apply_C(u) - model.apply_B(u, u)
            + model.forcing + alpha * zf)


def energy_defect(record, model):
    """Forward difference of ``|v|^2 / 2`` minus the exact rate ``<F(v, z), v>``.

    Zero for the exact flow; ``O(h)`` for the time stepper.  Length ``len(record) - 1``.
    """
    v = record.v
    rate = np.sum(drift(model, v[:-1], record.z[:-1], record.alpha) * v[:-1], axis=1)
    v2 = np.sum(v * v, axis=1)
    return 0.5 * np.diff(v2) / record.dt - rate


def linear_solution(model, v0, t):
    """Exact ``e^{-nu A t} v0`` (the flow when ``B``, ``C``, ``f`` and ``z`` vanish)."""
    t = np.asarray(t, dtype=float)
    return np.exp(-model.nu * np.multiply.outer(t, model.lam)) * v0


def _trap_cum(y, dt):
    """Cumulative trapezoid integral starting at 0."""
    out = np.zeros_like(y, dtype=float)
    if y.size > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1])) * dt
    return out


def _window(record, tau, t):
    i0, i1 = record.index(tau), record.index(t)
    if i1 < i0:
        raise ParameterError("need tau <= t")
    return i0, i1


def gronwall_envelope(v2, gamma, p, dt):
    """``|v(t_0)|^2 e^{int gamma} + int e^{int_s^t gamma} 2 p ds`` at every grid time.

    Computed by integrating the linear comparison equation exactly over each
    cell with trapezoid weights, which equals the trapezoid rule on the
    integrals and stays finite for long windows.
    """
    G = _trap_cum(gamma, dt)
    out = np.empty_like(v2, dtype=float)
    out[0] = v2[0]
    for i in range(1, v2.size):
        dG = G[i] - G[i - 1]
        out[i] = out[i - 1] * math.exp(dG) + dt * (p[i - 1] * math.exp(dG) + p[i])
    return out


def gronwall_bound(record, ledger, tau, t):
    """``(bound, actual)`` for ``|v(t)|^2`` started at ``tau``."""
    i0, i1 = _window(record, tau, t)
    env = gronwall_envelope(ledger.v2[i0:i1 + 1], ledger.gamma[i0:i1 + 1],
                            ledger.p[i0:i1 + 1], record.dt)
    return float(env[-1]), float(ledger.v2[i1])


def gronwall_residuals(record, ledger, window=1.0, starts=None):
    """Relative excess ``actual / bound - 1`` for all ``t`` in windows ``[tau, tau + window]``."""
    per = int(round(window / record.dt))
    n = len(ledger)
    starts = range(0, max(n - 1, 1), per) if starts is None else starts
    worst = []
    for i0 in starts:
        i1 = min(i0 + per, n - 1)
        if i1 <= i0:
            continue
        env = gronwall_envelope(ledger.v2[i0:i1 + 1], ledger.gamma[i0:i1 + 1],
                                ledger.p[i0:i1 + 1], record.dt)
        act = ledger.v2[i0:i1 + 1]
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(env > 0, act / env - 1.0, np.where(act > 0, np.inf, 0.0))
        worst.append(rel[1:])
    return np.concatenate(worst) if worst else np.zeros(0)


@dataclass(frozen=True)
class TimeIntegral:
    value: float     # trapezoid of |v|_V^2 over [tau, t]
    bound: float     # |v(tau)|^2 + sup|v|^2 int gamma^+ + int 2 p
    residual: float  # value - bound


def v_norm_time_integral(record, ledger, tau, t):
    """``int_tau^t |v|_V^2`` and its a priori bound."""
    i0, i1 = _window(record, tau, t)
    sl = slice(i0, i1 + 1)
    dt = record.dt
    value = float(np.trapezoid(ledger.vV2[sl], dx=dt)) if i1 > i0 else 0.0
    if i1 == i0:
        return TimeIntegral(0.0, float(ledger.v2[i0]), -float(ledger.v2[i0]))
    gplus = np.trapezoid(np.maximum(ledger.gamma[sl], 0.0), dx=dt)
    bound = float(ledger.v2[i0] + ledger.v2[sl].max() * gplus + np.trapezoid(2 * ledger.p[sl], dx=dt))
    return TimeIntegral(value, bound, value - bound)


# ---------------------------------------------------------------------------
# |A^delta v| bound


def _adelta_terms(model, v, z, delta):
    zf = _pad(np.asarray(z, dtype=float), model.N)
    u = v + zf
    w = model.power(v, 2 * delta)
    nonlin = np.abs(np.sum(model.apply_B(u, u) * w, axis=-1))
    dissip = model.nu / 6.0 * model.sq_norm(v, delta + 0.5)
    growth = model.sq_norm(v, 0.0) * model.sq_norm(v, 0.5) * model.sq_norm(v, delta)
    zterm = model.sq_norm(zf, (1 + 2 * delta) / 4) ** 2
    return nonlin, dissip, growth, zterm


def fit_adelta_constant(records, model, delta, stride=1):
    """Smallest ``K`` with
    ``|b(u, u, A^{2 delta} v)| <= nu/6 |A^{delta+1/2} v|^2 + K (|v|^2 |v|_V^2 |A^delta v|^2 + |A^{(1+2 delta)/4} z|^4)``
    on every recorded state of ``records``.
    """
    K = 0.0
    for rec in records:
        nonlin, dissip, growth, zterm = _adelta_terms(model, rec.v[::stride], rec.z[::stride], delta)
        den = growth + zterm
        excess = nonlin - dissip
        mask = (excess > 0) & (den > 0)
        if np.any((excess > 0) & (den <= 0)):
            raise ParameterError("inequality cannot hold with a finite constant")
        if mask.any():
            K = max(K, float(np.max(excess[mask] / den[mask])))
    return K


@dataclass(frozen=True)
class AdeltaBound:
    t: np.ndarray
    log_bound: np.ndarray
    actual: np.ndarray

    @property
    def ratio(self):
        with np.errstate(divide="ignore"):
            return np.exp(np.log(np.maximum(self.actual, 1e-300)) - self.log_bound)


def adelta_bound(record, model, K, delta, tau, t, alpha=None):
    """Gronwall bound on ``|A^delta v|^2`` over ``[tau, t]``, in log form.

    ``|A^d v(t)|^2 <= e^{E(tau,t)} |A^d v(tau)|^2 + int_tau^t e^{E(s,t)} 2 g(s) ds`` with
    ``E(s, t) = 2 K int_s^t |v|^2 |v|_V^2`` and
    ``g = K |A^{(1+2d)/4} z|^4 + 3/(2 nu) (|A^{d-1/2}(alpha - C) z|^2 + |A^{d-1/2} f|^2)``.
    Valid for ``C`` commuting with ``A``.
    """
    alpha = record.alpha if alpha is None else alpha
    i0, i1 = _window(record, tau, t)
    sl = slice(i0, i1 + 1)
    v, z = record.v[sl], record.z[sl]
    zf = _pad(z, model.N)
    dt = record.dt
    a = 2.0 * K * model.sq_norm(v, 0.0) * model.sq_norm(v, 0.5)
    src = alpha * zf - model.apply_C(zf)
    g = (K * model.sq_norm(zf, (1 + 2 * delta) / 4) ** 2
         + 1.5 / model.nu * (model.sq_norm(src, delta - 0.5)
                             + float(model.sq_norm(model.forcing, delta - 0.5))))
    actual = model.sq_norm(v, delta)
    n = actual.size
    logb = np.empty(n)
    logb[0] = math.log(actual[0]) if actual[0] > 0 else -np.inf
    A = _trap_cum(a, dt)
    with np.errstate(divide="ignore"):
        logg = np.log(g)
    logdt = math.log(dt)
    for i in range(1, n):
        dE = A[i] - A[i - 1]
        inc = logdt + np.logaddexp(logg[i - 1] + dE, logg[i])
        logb[i] = np.logaddexp(logb[i - 1] + dE, inc)
    return AdeltaBound(record.t[sl], logb, actual)
