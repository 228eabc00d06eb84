"""Command-line front end: ``simulate``, ``invariant``, ``verify`` and ``plot``.

Exit status is 0 only when every requested operation ran and every requested
check passed; 1 for failed checks or discarded runs; 2 for configuration and
input errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import struct
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import config as configmod
from .csvio import read_csv, write_csv
from .errors import BlowUpError, ConfigError, LevyNSEError, ParameterError
from .integrator import IntegratorConfig, LedgerConstants, energy_ledger, simulate
from .measure_lab import (
    build_mu_T,
    feller_sweep,
    invariance_residual,
    schema,
    stabilization_distance,
    tightness_report,
    write_measure_csv,
    write_stabilization_csv,
    write_tightness_csv,
)
from .ou_process import calibrate_alpha
from .spectral_model import abstract_model, nse2d_model
from .stable_levy import StableParams
from . import constants as K
from . import verify_suite as vs

logger = logging.getLogger("levy_nse")

CHECKS = ("poincare", "antisymmetry", "bsum", "ou_moments", "energy_chain", "estz",
          "gamma_negativity", "adelta_bound", "feller")


class Run:
    """Everything a command needs, resolved from a configuration."""

    def __init__(self, cfg, seed=None, threads=1):
        self.cfg = cfg
        self.seed = cfg.get_int("noise.seed") if seed is None else int(seed)
        if self.seed < 0:
            raise cfg.error("seed must be non-negative", "noise.seed")
        self.threads = max(1, int(threads))
        self.hash = cfg.digest(self.seed)
        self.model = self._model()
        self.params = self._params()
        self.eta = self.model.eta_bound()[0]
        self.alpha = self._alpha()
        self.icfg = self._icfg()
        logger.info("noise regularity sum %.6g", self.params.regularity_sum(self.model.lam))

    @property
    def meta(self):
        return {"config_hash": self.hash, "seed": self.seed}

    def _model(self):
        cfg = self.cfg
        backend = cfg.get_str("model.backend")
        m = cfg.get_int("model.m")
        nu = cfg.get_float("model.nu")
        rate = cfg.get_float("model.coriolis")
        amp = cfg.get_float("model.forcing")
        try:
            if backend == "abstract":
                if not cfg.has("model.N"):
                    raise cfg.error("missing required key 'model.N' for the abstract backend")
                N = cfg.get_int("model.N")
                forcing = np.zeros(N)
                forcing[0] = amp
                return abstract_model(N, m, cfg.get_str("model.eigen"), cfg.get_float("model.density"),
                                      cfg.get_float("model.b_scale"), rate, nu=nu, forcing=forcing,
                                      seed=cfg.get_int("model.seed"))
            if backend == "nse2d":
                model = nse2d_model(cfg.get_int("model.grid"), m, rate, nu)
                if amp:
                    forcing = np.zeros(model.N)
                    forcing[0] = amp
                    model = nse2d_model(cfg.get_int("model.grid"), m, rate, nu, forcing)
                return model
        except ValueError as exc:
            raise cfg.error(str(exc), "model.backend") from None
        raise cfg.error(f"unknown backend '{backend}' (abstract | nse2d)", "model.backend")

    def _params(self):
        cfg = self.cfg
        m = cfg.get_int("model.m")
        sigma = cfg.get_floats("noise.sigma")
        if len(sigma) == 1:
            sigma = sigma * m
        if len(sigma) != m:
            raise cfg.error(f"noise.sigma needs 1 or {m} entries, got {len(sigma)}", "noise.sigma")
        try:
            return StableParams(cfg.get_float("noise.beta"), tuple(sigma))
        except ValueError as exc:
            raise cfg.error(str(exc), "noise.beta") from None

    def _alpha(self):
        text = self.cfg.get_str("ou.alpha")
        if text == "auto":
            cal = calibrate_alpha(self.model, self.params, self.eta, seed=self.seed)
            return cal.alpha
        alpha = self.cfg.get_float("ou.alpha")
        if alpha < 0:
            raise self.cfg.error("ou.alpha must be >= 0", "ou.alpha")
        return alpha

    def _icfg(self, T=None):
        cfg = self.cfg
        try:
            return IntegratorConfig(cfg.get_float("time.h"), cfg.get_float("time.T") if T is None else T,
                                    cfg.get_str("time.scheme"), cfg.get_int("time.record_stride"),
                                    cfg.get_float("time.theta"))
        except ValueError as exc:
            raise cfg.error(str(exc), "time.h") from None

    def trajectories(self, T, ids):
        icfg = self._icfg(T)
        u0 = np.zeros(self.model.N)

        def one(i):
            try:
                return simulate(u0, icfg, self.model, self.params, self.seed, self.alpha, i,
                                config_hash=self.hash)
            except BlowUpError as exc:
                return exc

        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                return list(pool.map(one, ids))
        return [one(i) for i in ids]


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(run, out):
    model = run.model
    const = LedgerConstants.for_model(model, run.eta, run.alpha, run.cfg.get_float("measure.delta"))
    res = run.trajectories(run.icfg.T, [0])[0]
    status = 0
    if isinstance(res, BlowUpError):
        logger.error("%s", res)
        rec, status = res.record, 1
    else:
        rec = res
    write_trajectory(os.path.join(out, "trajectory.csv"), rec, model, const, run.meta)
    meta = dict(run.meta, eta=run.eta, alpha=run.alpha, rho=const.rho, c=const.c,
                c_prime=const.c_prime, delta=const.delta, N=model.N, m=run.params.m,
                beta=run.params.beta, regularity_sum=run.params.regularity_sum(model.lam),
                h=run.icfg.h, T=run.icfg.T, records=len(rec),
                blowup=status == 1)
    with open(os.path.join(out, "metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if run.cfg.get_bool("output.dump_coefficients"):
        dump_coefficients(os.path.join(out, "coefficients.bin"), rec)
    print(f"simulate: {len(rec)} records written to {out}")
    return status


def write_trajectory(path, rec, model, const, meta):
    led = energy_ledger(rec, model, const)
    u = rec.u
    hu, vu, fu = model.norms(u, const.delta)
    hz = np.linalg.norm(rec.z, axis=1)
    rows = zip(rec.t, hu, vu, fu, np.sqrt(led.v2), hz, led.gamma, led.p, led.dineq_residual)
    write_csv(path, ("t", "norm_h_u", "norm_v_u", "norm_fracdelta_u", "norm_h_v", "norm_h_z",
                     "gamma", "p_t", "dineq_residual"), rows, meta)


def dump_coefficients(path, rec):
    """Little-endian int64 header ``N, m, count``, then ``u`` rows, then ``z`` rows."""
    u = np.ascontiguousarray(rec.u, dtype="<f8")
    z = np.ascontiguousarray(rec.z, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qqq", u.shape[1], z.shape[1], u.shape[0]))
        fh.write(u.tobytes())
        fh.write(z.tobytes())


# ---------------------------------------------------------------------------
# invariant


@dataclass
class InvariantResult:
    horizons: list
    distances: list       # d(mu_T, mu_2T) per horizon
    residuals: list       # invariance residual of mu_T per horizon
    measure: object       # mu at the largest horizon
    tightness: object
    n_blowup: int
    n_trajectories: int

    @property
    def failed(self):
        return self.measure is None


def invariant_pipeline(run, echo=print):
    """Pool trajectories to ``2 max(T)`` and measure ``mu_T`` at every horizon."""
    cfg = run.cfg
    model = run.model
    horizons = cfg.get_floats("measure.horizons") if cfg.has("measure.horizons") else [run.icfg.T]
    n_traj = cfg.get_int("measure.trajectories")
    delta = cfg.get_float("measure.delta")
    k = cfg.get_int("measure.k")
    include = cfg.get_list("measure.observables")
    try:
        schema(k, delta, include)
    except ParameterError as exc:
        raise cfg.error(str(exc), "measure.observables") from None
    p = cfg.get_float("measure.p")
    shift = cfg.get_float("measure.shift")
    burn = cfg.get_float("measure.burn_in") if cfg.has("measure.burn_in") else None
    results = run.trajectories(2 * max(horizons), range(n_traj))
    records = [r for r in results if not isinstance(r, BlowUpError)]
    n_bad = n_traj - len(records)
    if n_bad:
        logger.warning("discarded %d of %d trajectories after blow-up", n_bad, n_traj)
    if not records or n_bad > K.MAX_BLOWUP_FRACTION * n_traj:
        return InvariantResult(horizons, [], [], None, None, n_bad, n_traj)
    dists, resid = [], []
    for T in horizons:
        b1 = burn if burn is not None else T / 10
        b2 = burn if burn is not None else 2 * T / 10
        mu = build_mu_T(records, model, T, b1, delta, k, include)
        mu2 = build_mu_T(records, model, 2 * T, b2, delta, k, include)
        dists.append(stabilization_distance(mu, mu2))
        resid.append(invariance_residual(mu, shift, run.icfg, model, run.params, run.seed + 1,
                                         run.alpha))
        echo(f"T={T:g}: d(mu_T, mu_2T)={dists[-1]:.6g} invariance_residual={resid[-1]:.6g}")
    return InvariantResult(horizons, dists, resid, mu, tightness_report(mu, p), n_bad, n_traj)


def cmd_invariant(run, out):
    res = invariant_pipeline(run)
    if res.failed:
        print(f"invariant: {res.n_blowup} of {res.n_trajectories} trajectories blew up;"
              " experiment failed")
        return 1
    report = res.tightness
    write_measure_csv(os.path.join(out, "measure.csv"), res.measure, run.meta)
    write_tightness_csv(os.path.join(out, "tightness.csv"), report, run.meta)
    write_stabilization_csv(os.path.join(out, "stabilization.csv"), res.horizons, res.distances,
                            res.residuals, run.meta)
    print(f"tightness: markov_ok={report.markov_ok} tail_exponent={report.tail_exponent:.4g}"
          f" +- {report.band:.3g} (p={report.p:g})")
    return 0


# ---------------------------------------------------------------------------
# verify


def parse_checks(text):
    if text is None:
        return list(CHECKS)
    names = [x.strip() for x in text.split(",") if x.strip()]
    unknown = [n for n in names if n not in CHECKS]
    if unknown or not names:
        raise ConfigError(f"unknown check(s) {unknown}; available: {', '.join(CHECKS)}")
    return names


def run_check(name, run):
    cfg = run.cfg
    model, params, seed, alpha, eta = run.model, run.params, run.seed, run.alpha, run.eta
    h = run.icfg.h
    neg = cfg.get_bool("verify.negative_control")
    if name == "poincare":
        return [vs.check_poincare(model, seed=seed)]
    if name == "antisymmetry":
        return [vs.check_antisymmetry(model, seed=seed)]
    if name == "bsum":
        return [vs.check_bsum(model, seed=seed)]
    if name == "ou_moments":
        return [vs.check_ou_moments(params, model.basis, cfg.get_float("measure.p"),
                                    alpha=alpha, seed=seed)[0]]
    if name == "energy_chain":
        return [vs.check_energy_chain(model, params, eta, alpha, cfg.get_int("verify.runs"), h,
                                      run.icfg.T, seed, negative_control=neg)]
    if name == "estz":
        return [vs.check_estz(params, model, alpha, cfg.get_float("measure.p"),
                              cfg.get_int("verify.blocks"), seed=seed)]
    if name == "gamma_negativity":
        return [vs.check_gamma_negativity(params, model, eta, 0.0 if neg else alpha,
                                          cfg.get_float("verify.gamma_T"), seed=seed)]
    if name == "adelta_bound":
        return [vs.check_adelta_bound(model, params, alpha, d, cfg.get_int("verify.calibration_runs"),
                                      cfg.get_int("verify.adelta_runs"), h, run.icfg.T, seed)
                for d in (0.25, 0.5)]
    if name == "feller":
        icfg = IntegratorConfig(h, 1.0, run.icfg.scheme, 1, run.icfg.theta)
        reports, spread = feller_sweep(np.zeros(model.N), [1e-3, 1e-4, 1e-5, 1e-6], 16, 1.0,
                                       icfg, model, params, seed, alpha)
        stats_ = {f"ratio_median_{r.radius:g}": r.ratio_median for r in reports}
        stats_["spread"] = spread
        return [vs.CheckResult("feller", spread <= K.FELLER_SPREAD, stats_, (seed,),
                               {"max_spread": K.FELLER_SPREAD})]
    raise ConfigError(f"unknown check '{name}'")


def cmd_verify(run, out, checks):
    results = []
    for name in checks:
        for res in run_check(name, run):
            print(res.line())
            results.append(res)
    vs.verify_report(results, os.path.join(out, "verify_report.txt"),
                     os.path.join(out, "verify_report.csv"), run.meta)
    return 0 if all(r.passed for r in results) else 1


# ---------------------------------------------------------------------------
# plot


def cmd_plot(inputs, out):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    for path in inputs:
        meta, cols, rows = read_csv(path)
        if not cols or not rows:
            raise ConfigError(f"{path}: no data to plot")
        data = np.array([[float(x) for x in r] for r in rows])
        col = {c: data[:, i] for i, c in enumerate(cols)}
        fig, ax = plt.subplots(figsize=(6, 4))
        stem = os.path.splitext(os.path.basename(path))[0]
        if "norm_h_u" in col:
            ax.plot(col["t"], col["norm_h_u"] ** 2, label="|u|^2")
            ax.plot(col["t"], col["norm_h_v"] ** 2, label="|v|^2")
            ax.set_xlabel("t")
            ax.set_yscale("log")
            ax.set_ylabel("energy")
        elif "tail_mass" in col:
            pos = col["tail_mass"] > 0
            ax.loglog(col["R"][pos], col["tail_mass"][pos], "o-", label="tail mass")
            ax.loglog(col["R"], np.minimum(col["markov_bound"], 1.0), "--", label="Markov bound")
            ax.set_xlabel("R")
            ax.set_ylabel("mu(|A^d u| > R)")
        elif "distance_to_2T" in col:
            ax.loglog(col["T"], col["distance_to_2T"], "o-", label="d(mu_T, mu_2T)")
            ax.loglog(col["T"], col["invariance_residual"], "s-", label="invariance residual")
            ax.set_xlabel("T")
        elif "t" in col and len(cols) > 1:
            ax.hist(col[cols[1]], bins=60, weights=None, histtype="step", density=True,
                    label=cols[1])
            ax.set_yscale("log")
        else:
            plt.close(fig)
            raise ConfigError(f"{path}: unrecognized columns {cols}")
        ax.legend()
        tag = " ".join(f"{k}={v}" for k, v in meta.items())
        fig.text(0.01, 0.01, tag, fontsize=6)
        fig.tight_layout()
        target = os.path.join(out, stem + ".png")
        fig.savefig(target, metadata={"Description": tag, "Software": None})
        plt.close(fig)
        written.append(target)
    for w in written:
        print(f"plot: wrote {w}")
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="levy-nse", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "invariant", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--seed", type=int, help="noise seed (overrides the config)")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        if name == "verify":
            p.add_argument("--checks", help=f"comma-separated subset of {','.join(CHECKS)}")
    p = sub.add_parser("plot")
    p.add_argument("inputs", nargs="+", help="CSV files written by the other commands")
    p.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "plot":
            os.makedirs(args.out, exist_ok=True)
            return cmd_plot(args.inputs, args.out)
        checks = parse_checks(args.checks) if args.command == "verify" else None
        cfg = configmod.load(args.config)
        run = Run(cfg, args.seed, args.threads)
        out = args.out or cfg.get_str("output.dir")
        os.makedirs(out, exist_ok=True)
        if args.command == "simulate":
            return cmd_simulate(run, out)
        if args.command == "invariant":
            return cmd_invariant(run, out)
        return cmd_verify(run, out, checks)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (LevyNSEError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
