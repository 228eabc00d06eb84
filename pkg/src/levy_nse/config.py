"""Flat, commented ``key = value`` run configuration.

Keys live in sections ``model``, ``noise``, ``ou``, ``time``, ``measure``,
``verify`` and ``output``, written either under a ``[section]`` header or as
dotted keys (``time.h = 0.001``).  ``#`` starts a comment.  Environment
variables ``LEVY_NSE_<SECTION>_<KEY>`` override the file, and command-line
flags override both.

Schema (defaults in parentheses; ``*`` marks required keys)::

    model.backend*   abstract | nse2d
    model.m*         number of driven modes
    model.N          abstract dimension (required for abstract)
    model.grid       nse2d grid size (16)
    model.eigen      sphere | torus (sphere)
    model.density    abstract tensor fill fraction (0.3)
    model.b_scale    abstract tensor scale (1.0)
    model.coriolis   rotation rate (1.0)
    model.nu         viscosity (1.0)
    model.forcing    amplitude of f on the first mode (0.0)
    model.seed       seed of the random abstract tensor (0)
    noise.beta*      stability index in (0, 2]
    noise.sigma*     one scale, or m comma-separated scales
    noise.seed       noise seed (0)
    ou.alpha         damping shift or "auto" for calibration (auto)
    time.h*          time step
    time.T*          horizon
    time.scheme      semi_implicit | explicit_euler (semi_implicit)
    time.record_stride  (1)
    time.theta       step-splitting threshold, 0 disables (0.05)
    measure.delta    (0.25)
    measure.burn_in  (T/10)
    measure.k        leading coefficients in the observables (8)
    measure.observables  subset of norm_h,norm_v,norm_frac,coeffs (all)
    measure.p        moment order for tightness (1.2)
    measure.horizons comma-separated T values (T)
    measure.trajectories  pooled trajectories (1)
    measure.shift    time shift of the invariance residual (1.0)
    verify.runs      energy-chain ensemble size (100)
    verify.adelta_runs  (50)
    verify.calibration_runs  (10)
    verify.blocks    unit blocks for the growth check (1000)
    verify.gamma_T   horizon of the gamma check (1000)
    verify.negative_control  run the checks with broken constants (false)
    output.dir       output directory (out)
    output.dump_coefficients  binary coefficient dump (false)
"""
from __future__ import annotations

import hashlib
import os
import re
from dataclasses import dataclass

from .errors import ConfigError

ENV_PREFIX = "LEVY_NSE_"
SECTIONS = ("model", "noise", "ou", "time", "measure", "verify", "output")
REQUIRED = ("model.backend", "model.m", "noise.beta", "noise.sigma", "time.h", "time.T")

DEFAULTS = {
    "model.grid": "16",
    "model.eigen": "sphere",
    "model.density": "0.3",
    "model.b_scale": "1.0",
    "model.coriolis": "1.0",
    "model.nu": "1.0",
    "model.forcing": "0.0",
    "model.seed": "0",
    "noise.seed": "0",
    "ou.alpha": "auto",
    "time.scheme": "semi_implicit",
    "time.record_stride": "1",
    "time.theta": "0.05",
    "measure.delta": "0.25",
    "measure.k": "8",
    "measure.observables": "norm_h,norm_v,norm_frac,coeffs",
    "measure.p": "1.2",
    "measure.trajectories": "1",
    "measure.shift": "1.0",
    "verify.runs": "100",
    "verify.adelta_runs": "50",
    "verify.calibration_runs": "10",
    "verify.blocks": "1000",
    "verify.gamma_T": "1000",
    "verify.negative_control": "false",
    "output.dir": "out",
    "output.dump_coefficients": "false",
}

KNOWN = set(DEFAULTS) | set(REQUIRED) | {"model.N", "measure.burn_in", "measure.horizons"}

_LINE = re.compile(r"^([A-Za-z_][\w.]*)\s*=\s*(.*)$")


@dataclass
class Config:
    values: dict
    path: str = None
    lines: dict = None

    def raw(self, key):
        if key in self.values:
            return self.values[key]
        if key in DEFAULTS:
            return DEFAULTS[key]
        raise self.error(f"missing required key '{key}'", key)

    def has(self, key):
        return key in self.values

    def error(self, message, key=None):
        line = (self.lines or {}).get(key)
        return ConfigError(message, line, self.path)

    def _convert(self, key, fn, kind):
        text = self.raw(key)
        try:
            return fn(text)
        except ValueError:
            raise self.error(f"'{key}' must be {kind}, got '{text}'", key) from None

    def get_str(self, key):
        return self.raw(key)

    def get_int(self, key):
        return self._convert(key, int, "an integer")

    def get_float(self, key):
        return self._convert(key, float, "a number")

    def get_bool(self, key):
        text = self.raw(key).lower()
        if text in ("true", "yes", "1", "on"):
            return True
        if text in ("false", "no", "0", "off"):
            return False
        raise self.error(f"'{key}' must be true or false, got '{text}'", key)

    def get_floats(self, key):
        return self._convert(key, lambda t: [float(x) for x in t.split(",") if x.strip()],
                             "a comma-separated list of numbers")

    def get_list(self, key):
        return [x.strip() for x in self.raw(key).split(",") if x.strip()]

    def digest(self, seed=None):
        """Hash of the resolved configuration (defaults included) and the seed."""
        items = dict(DEFAULTS)
        items.update(self.values)
        if seed is not None:
            items["noise.seed"] = str(seed)
        text = "\n".join(f"{k}={items[k]}" for k in sorted(items))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_overrides(self, **kv):
        values = dict(self.values)
        values.update({k: str(v) for k, v in kv.items()})
        return Config(values, self.path, self.lines)


def parse_text(text, path=None):
    values, lines = {}, {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", no, path)
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"expected 'key = value', got '{raw.strip()}'", no, path)
        key, value = m.group(1), m.group(2).strip()
        if "." not in key:
            if section is None:
                raise ConfigError(f"key '{key}' outside a section", no, path)
            key = f"{section}.{key}"
        if key not in KNOWN:
            raise ConfigError(f"unknown key '{key}'", no, path)
        if key in values:
            raise ConfigError(f"duplicate key '{key}' (first set on line {lines[key]})", no, path)
        if value == "":
            raise ConfigError(f"empty value for '{key}'", no, path)
        values[key] = value
        lines[key] = no
    return Config(values, path, lines)


def env_overrides(environ=None):
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        section, _, key = rest.partition("_")
        if section not in SECTIONS or not key:
            continue
        dotted = f"{section}.{key}"
        match = next((k for k in KNOWN if k.lower() == dotted), None)
        if match is None:
            raise ConfigError(f"environment variable {name} names unknown key '{dotted}'")
        out[match] = value
    return out


def load(path, environ=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=path) from None
    cfg = parse_text(text, path)
    cfg.values.update(env_overrides(environ))
    for key in REQUIRED:
        if key not in cfg.values:
            raise ConfigError(f"missing required key '{key}'", path=path)
    return cfg
