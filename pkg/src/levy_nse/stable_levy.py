"""Symmetric beta-stable sampling with reproducible, independent streams.

Draws use the Chambers-Mallows-Stuck construction for the standard symmetric
law with characteristic function ``exp(-|t|**beta)``.  At ``beta = 2`` this is
the centered Gaussian with variance 2, at ``beta = 1`` the standard Cauchy law.

Every random quantity in the package is drawn from an :class:`RngStream`.  A
stream is a Philox counter-based generator keyed by ``(seed, stream_id)``
through :class:`numpy.random.SeedSequence`, so streams with different ids are
statistically independent and need no coordination between workers.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DiagnosticError, ParameterError

logger = logging.getLogger(__name__)

__all__ = [
    "StableParams",
    "RngStream",
    "check_beta",
    "sample_standard_stable",
    "levy_increment",
    "TailEstimate",
    "tail_index_estimate",
    "abs_moment",
]


def check_beta(beta):
    beta = float(beta)
    if not (0.0 < beta <= 2.0) or math.isnan(beta):
        raise ParameterError(f"stability index must lie in (0, 2], got {beta}")
    return beta


@dataclass(frozen=True)
class StableParams:
    """Noise specification: index ``beta`` and one scale per driven mode.

    Modes beyond ``m`` carry no noise.
    """

    beta: float
    sigma: tuple

    def __post_init__(self):
        check_beta(self.beta)
        sigma = tuple(float(s) for s in np.atleast_1d(self.sigma))
        if len(sigma) < 1:
            raise ParameterError("at least one driven mode is required")
        if any(not math.isfinite(s) or s < 0 for s in sigma):
            raise ParameterError(f"noise scales must be finite and >= 0, got {sigma}")
        object.__setattr__(self, "sigma", sigma)

    @property
    def m(self):
        return len(self.sigma)

    @property
    def sigma_array(self):
        return np.asarray(self.sigma, dtype=float)

    def regularity_sum(self, lam):
        """``sum_l |sigma_l|**beta * lam_l**(beta/2)`` over the driven modes.

        Always finite for finite ``m``; computed so runs can log it.
        """
        lam = np.asarray(lam, dtype=float)[: self.m]
        if lam.size < self.m:
            raise ParameterError(f"need {self.m} eigenvalues, got {lam.size}")
        value = float(np.sum(np.abs(self.sigma_array) ** self.beta * lam ** (self.beta / 2)))
        logger.debug("noise regularity sum = %g", value)
        return value


@dataclass
class RngStream:
    """Independent random stream identified by ``(seed, stream_id)``.

    Two streams built from the same pair produce bit-identical sequences.
    A stream is stateful and must be owned by a single worker.
    """

    seed: int
    stream_id: int = 0
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ParameterError("seed and stream_id must be non-negative")
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        self.generator = np.random.Generator(np.random.Philox(seq))

    def child(self, index):
        """Deterministic sub-stream; distinct ``index`` values are independent."""
        return RngStream(self.seed, _pair(self.stream_id, index))


def _pair(a, b):
    # Cantor pairing keeps child ids unique across nesting levels.
    a, b = int(a), int(b)
    return (a + b) * (a + b + 1) // 2 + b + 1


def _cms(beta, v, w):
    if beta == 1.0:
        return np.tan(v)
    return (
        np.sin(beta * v)
        / np.cos(v) ** (1.0 / beta)
        * (np.cos((1.0 - beta) * v) / w) ** ((1.0 - beta) / beta)
    )


def sample_standard_stable(beta, stream, size=None):
    """Draw from the standard symmetric ``beta``-stable law.

    Returns a float when ``size`` is None, otherwise an array of that shape.
    """
    beta = check_beta(beta)
    gen = stream.generator
    shape = 1 if size is None else size
    v = np.pi * (gen.random(shape) - 0.5)
    w = gen.standard_exponential(shape)
    x = _cms(beta, v, w)
    if size is None:
        return float(x[0])
    return x


def levy_increment(beta, scale, dt, stream, size=None):
    """Increment ``L(t + dt) - L(t)`` of a symmetric stable Levy process.

    By self-similarity this is ``scale * dt**(1/beta)`` times a standard draw.
    A zero scale returns exact zeros without consuming randomness.
    """
    beta = check_beta(beta)
    if not dt > 0:
        raise ParameterError(f"time step must be positive, got {dt}")
    if scale < 0:
        raise ParameterError(f"scale must be non-negative, got {scale}")
    if scale == 0:
        return 0.0 if size is None else np.zeros(size)
    return scale * dt ** (1.0 / beta) * sample_standard_stable(beta, stream, size)


@dataclass(frozen=True)
class TailEstimate:
    index: float
    light_tail: bool
    n_tail: int
    stderr: float


def tail_index_estimate(samples, tail_fraction=0.002, min_samples=10_000):
    """Hill estimate of the tail exponent of ``|samples|``.

    Uses the top ``tail_fraction`` order statistics.  The Hill estimator is
    inconsistent for light tails; estimates of 2 or more are returned with
    ``light_tail=True`` rather than interpreted as a stability index.
    """
    x = np.abs(np.asarray(samples, dtype=float).ravel())
    if x.size < min_samples:
        raise DiagnosticError(f"need at least {min_samples} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DiagnosticError("samples contain non-finite values")
    k = max(int(tail_fraction * x.size), 10)
    top = np.partition(x, x.size - k - 1)[x.size - k - 1:]
    top.sort()
    threshold = top[0]
    if threshold <= 0 or top[-1] == threshold:
        raise DiagnosticError("degenerate sample: no spread in the upper tail")
    logs = np.log(top[1:] / threshold)
    mean_log = logs.mean()
    if mean_log <= 0:
        raise DiagnosticError("degenerate sample: no spread in the upper tail")
    index = 1.0 / mean_log
    return TailEstimate(
        index=float(index),
        light_tail=bool(index >= 2.0),
        n_tail=k,
        stderr=float(index / math.sqrt(k)),
    )


def abs_moment(beta, p):
    """Closed form of ``E|X|**p`` for the standard symmetric stable law.

    Finite only for ``p < beta`` (any ``p > -1`` when ``beta = 2``).
    """
    beta = check_beta(beta)
    if beta < 2 and not p < beta:
        return math.inf
    return (
        2.0 ** p
        * math.gamma((1 + p) / 2)
        * math.gamma(1 - p / beta)
        / (math.sqrt(math.pi) * math.gamma(1 - p / 2))
    )
