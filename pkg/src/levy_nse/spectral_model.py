"""Galerkin realization of the Stokes, bilinear and Coriolis operators.

A field is a plain float array of ``N`` coefficients in an orthonormal
eigenbasis of the Stokes operator ``A`` (trailing axis; leading axes are
treated as a batch).  ``A`` acts diagonally, ``B`` through a trilinear tensor
``b[j, k, l] = <B(e_j, e_k), e_l>`` that is antisymmetric in its last two
slots, and ``C`` through a skew-symmetric matrix.

Two backends build these objects:

``abstract``
    eigenvalues from a rule (``sphere``, ``torus`` or an explicit list) and a
    random sparse tensor, antisymmetrized in its last two slots.
``nse2d``
    the incompressible Navier-Stokes nonlinearity on the 2-torus
    ``[0, 2*pi]**2`` in a divergence-free Fourier basis, truncated by the 2/3
    rule of an ``n x n`` collocation grid.  Tensor entries are computed by
    exact quadrature, so the truncated system has no aliasing error.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ParameterError
from .stable_levy import RngStream

logger = logging.getLogger(__name__)

_DROP_TOL = 1e-13


# ---------------------------------------------------------------------------
# eigenvalue rules


def sphere_eigenvalues(n):
    """``l(l+1)`` repeated ``2l+1`` times, truncated to ``n`` values."""
    out = []
    deg = 1
    while len(out) < n:
        out.extend([deg * (deg + 1.0)] * (2 * deg + 1))
        deg += 1
    return np.array(out[:n])


def torus_wavevectors(kmax):
    """Half-plane of nonzero wavevectors with ``|k_x|, |k_y| <= kmax``."""
    ks = [
        (kx, ky)
        for kx in range(0, kmax + 1)
        for ky in range(-kmax, kmax + 1)
        if kx > 0 or ky > 0
    ]
    return sorted(ks, key=lambda k: (k[0] ** 2 + k[1] ** 2, k[0], k[1]))


def torus_eigenvalues(n):
    """Sorted ``|k|**2`` over the real Fourier modes of the 2-torus."""
    kmax = int(math.sqrt(n)) + 2  # disc of radius kmax holds > n lattice points
    lam = []
    for kx, ky in torus_wavevectors(kmax):
        lam += [float(kx * kx + ky * ky)] * 2
    lam.sort()
    return np.array(lam[:n])


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenvalues of ``A`` (nondecreasing, positive) and noise-mode count."""

    lam: np.ndarray
    m: int
    wavevectors: tuple = None  # nse2d only: ((kx, ky), kind) per mode

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise ParameterError("eigenvalues must be a non-empty 1-d sequence")
        if lam[0] <= 0 or np.any(np.diff(lam) < 0):
            raise ParameterError("eigenvalues must be positive and nondecreasing")
        if not 1 <= self.m <= lam.size:
            raise ParameterError(f"noise modes m={self.m} must satisfy 1 <= m <= N={lam.size}")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    @property
    def N(self):
        return self.lam.size

    @property
    def lambda1(self):
        return float(self.lam[0])


@dataclass(frozen=True)
class BilinearTensor:
    """Sparse trilinear coefficients ``b[j, k, l]`` in coordinate form."""

    N: int
    j: np.ndarray
    k: np.ndarray
    l: np.ndarray
    val: np.ndarray
    backend: str = "abstract"
    _matrix: object = field(default=None, repr=False, compare=False)

    @classmethod
    def from_dense(cls, b, backend="abstract"):
        b = np.asarray(b, dtype=float)
        n = b.shape[0]
        if b.shape != (n, n, n):
            raise ParameterError("dense tensor must have shape (N, N, N)")
        b = 0.5 * (b - b.transpose(0, 2, 1))
        scale = np.abs(b).max() if b.size else 0.0
        b[np.abs(b) <= _DROP_TOL * scale] = 0.0
        j, k, l = np.nonzero(b)
        return cls(n, j.astype(np.int64), k.astype(np.int64), l.astype(np.int64), b[j, k, l], backend)

    @classmethod
    def zero(cls, n):
        empty = np.zeros(0, dtype=np.int64)
        return cls(n, empty, empty, empty, np.zeros(0), "abstract")

    @property
    def nnz(self):
        return self.val.size

    def dense(self):
        b = np.zeros((self.N, self.N, self.N))
        b[self.j, self.k, self.l] = self.val
        return b

    @property
    def matrix(self):
        """CSR matrix ``M`` with ``B(u, v) = M @ kron(u, v)``."""
        if self._matrix is None:
            mat = sparse.csr_matrix(
                (self.val, (self.l, self.j * self.N + self.k)), shape=(self.N, self.N * self.N)
            )
            object.__setattr__(self, "_matrix", mat)
        return self._matrix

    def frobenius(self):
        return float(np.sqrt(np.sum(self.val ** 2)))


@dataclass(frozen=True)
class CoriolisOperator:
    """Skew-symmetric matrix; ``commutes`` records whether it commutes with ``A``."""

    skew: np.ndarray
    commutes: bool = True

    def __post_init__(self):
        s = np.asarray(self.skew, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ParameterError("Coriolis matrix must be square")
        if not np.array_equal(s, -s.T):
            raise ParameterError("Coriolis matrix must be exactly skew-symmetric")
        s.setflags(write=False)
        object.__setattr__(self, "skew", s)

    @classmethod
    def zero(cls, n):
        return cls(np.zeros((n, n)), True)

    @classmethod
    def rotation_blocks(cls, lam, rate):
        """2x2 rotations pairing consecutive modes that share an eigenvalue.

        ``C e_a = rate * e_b`` and ``C e_b = -rate * e_a`` for each pair
        ``(a, b)``; unpaired modes are left fixed.
        """
        lam = np.asarray(lam)
        n = lam.size
        s = np.zeros((n, n))
        a = 0
        while a + 1 < n:
            if lam[a] == lam[a + 1]:
                s[a + 1, a] = rate
                s[a, a + 1] = -rate
                a += 2
            else:
                a += 1
        return cls(s, True)

    @classmethod
    def random_skew(cls, n, rate, stream):
        g = stream.generator.standard_normal((n, n)) * rate
        s = np.triu(g, 1)
        return cls(s - s.T, False)


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class EtaEstimate:
    eta: float
    lower_bound: float
    per_mode: tuple


@dataclass(frozen=True)
class SpectralModel:
    """Immutable bundle of basis, operators, viscosity and forcing."""

    basis: SpectralBasis
    tensor: BilinearTensor
    coriolis: CoriolisOperator
    nu: float = 1.0
    forcing: np.ndarray = None

    def __post_init__(self):
        n = self.basis.N
        if self.tensor.N != n or self.coriolis.skew.shape != (n, n):
            raise ParameterError("operator dimensions disagree with the basis")
        if not self.nu > 0:
            raise ParameterError(f"viscosity must be positive, got {self.nu}")
        f = np.zeros(n) if self.forcing is None else np.array(self.forcing, dtype=float)
        if f.shape != (n,) or not np.all(np.isfinite(f)):
            raise ParameterError("forcing must be a finite vector of length N")
        f.setflags(write=False)
        object.__setattr__(self, "forcing", f)

    @property
    def N(self):
        return self.basis.N

    @property
    def lam(self):
        return self.basis.lam

    # operators -------------------------------------------------------------

    def apply_A(self, u):
        return self.lam * u

    def apply_frac_A(self, u, delta):
        if not 0.0 <= delta <= 1.0:
            raise ParameterError(f"fractional power must lie in [0, 1], got {delta}")
        if delta == 0:
            return np.array(u, dtype=float, copy=True)
        if delta == 1:
            return self.apply_A(u)
        return self.lam ** delta * u

    def power(self, u, s):
        """``A**s u`` for any real ``s`` (A is positive definite)."""
        return self.lam ** s * u

    def apply_B(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        n = self.N
        batch = np.broadcast_shapes(u.shape[:-1], v.shape[:-1])
        uu = np.broadcast_to(u, batch + (n,)).reshape(-1, n)
        vv = np.broadcast_to(v, batch + (n,)).reshape(-1, n)
        outer = (uu[:, :, None] * vv[:, None, :]).reshape(-1, n * n)
        out = (self.tensor.matrix @ outer.T).T
        return np.asarray(out).reshape(batch + (n,))

    def apply_C(self, u):
        return np.asarray(u, dtype=float) @ self.coriolis.skew.T

    def trilinear(self, u, v, w):
        """``b(u, v, w) = <B(u, v), w>``."""
        return np.sum(self.apply_B(u, v) * w, axis=-1)

    # norms -----------------------------------------------------------------

    def norms(self, u, delta=0.25):
        """``(|u|, |u|_V, |A**delta u|)`` along the trailing axis."""
        u2 = np.asarray(u, dtype=float) ** 2
        h = np.sqrt(np.sum(u2, axis=-1))
        v = np.sqrt(np.sum(self.lam * u2, axis=-1))
        frac = np.sqrt(np.sum(self.lam ** (2 * delta) * u2, axis=-1))
        return h, v, frac

    def sq_norm(self, u, s=0.0):
        """``|A**s u|**2``."""
        return np.sum(self.lam ** (2 * s) * np.asarray(u, dtype=float) ** 2, axis=-1)

    # constants -------------------------------------------------------------

    def mode_form(self, l):
        """Matrix ``M`` with ``<B(u, e_l), u> = u @ M @ u``."""
        n = self.N
        sel = self.tensor.k == l
        mat = np.zeros((n, n))
        np.add.at(mat, (self.tensor.j[sel], self.tensor.l[sel]), self.tensor.val[sel])
        return mat

    def eta_bound(self, m=None):
        """Certified ``eta`` with ``|<B(u, e_l), u>| <= eta |u|**2`` for ``l < m``.

        The supremum of the quadratic form on the unit sphere is the largest
        absolute eigenvalue of its symmetric part; this is exact, not sampled.
        """
        m = self.basis.m if m is None else m
        per_mode = []
        for l in range(m):
            mat = self.mode_form(l)
            sym = 0.5 * (mat + mat.T)
            per_mode.append(float(np.max(np.abs(np.linalg.eigvalsh(sym)))) if sym.any() else 0.0)
        return max(per_mode), tuple(per_mode)

    def c_B(self):
        """Constant of the trilinear bound
        ``|b(u,v,w)| <= c_B |u|^.5 |u|_V^.5 |v|^.5 |v|_V^.5 |w|_V``.

        Follows from Cauchy-Schwarz on the tensor and Poincare.
        """
        return self.tensor.frobenius() / self.basis.lambda1


def estimate_eta(model, trials=1000, stream=None):
    """Certified ``eta`` plus a Monte-Carlo lower bound over random unit fields."""
    if trials < 1000:
        raise ParameterError("estimate_eta needs at least 1000 trials")
    stream = stream or RngStream(0, 0)
    eta, per_mode = model.eta_bound()
    u = stream.generator.standard_normal((trials, model.N))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    lower = 0.0
    for l in range(model.basis.m):
        mat = model.mode_form(l)
        vals = np.abs(np.einsum("ij,jk,ik->i", u, mat, u))
        lower = max(lower, float(vals.max()) if vals.size else 0.0)
    logger.info("eta: certified %.6g, sampled lower bound %.6g", eta, lower)
    return EtaEstimate(eta, lower, per_mode)


# ---------------------------------------------------------------------------
# backends


def abstract_model(
    N,
    m,
    eigen="sphere",
    density=0.3,
    b_scale=1.0,
    coriolis_rate=1.0,
    arbitrary_coriolis=False,
    nu=1.0,
    forcing=None,
    seed=0,
):
    """Random finite-dimensional model with the abstract operator structure."""
    if isinstance(eigen, str):
        rules = {"sphere": sphere_eigenvalues, "torus": torus_eigenvalues}
        if eigen not in rules:
            raise ParameterError(f"unknown eigenvalue rule {eigen!r}")
        lam = rules[eigen](N)
    else:
        lam = np.asarray(eigen, dtype=float)
        if lam.size != N:
            raise ParameterError("explicit eigenvalue list must have N entries")
    basis = SpectralBasis(lam, m)
    stream = RngStream(seed, 0)
    gen = stream.generator
    b = np.zeros((N, N, N))
    if b_scale != 0 and density > 0:
        iu = np.triu_indices(N, 1)
        vals = gen.standard_normal((N, iu[0].size)) * b_scale
        mask = gen.random((N, iu[0].size)) < density
        vals *= mask
        for j in range(N):
            b[j][iu] = vals[j]
            b[j][iu[1], iu[0]] = -vals[j]
    tensor = BilinearTensor.from_dense(b, "abstract")
    if arbitrary_coriolis:
        cor = CoriolisOperator.random_skew(N, coriolis_rate, stream.child(1))
    elif coriolis_rate:
        cor = CoriolisOperator.rotation_blocks(lam, coriolis_rate)
    else:
        cor = CoriolisOperator.zero(N)
    return SpectralModel(basis, tensor, cor, nu, forcing)


def nse2d_modes(n_grid):
    """Real divergence-free Fourier modes kept by the 2/3 rule on ``n_grid``."""
    kmax = math.ceil(n_grid / 3) - 1
    if kmax < 1:
        raise ParameterError("grid too coarse: no modes survive dealiasing")
    modes = []
    for k in torus_wavevectors(kmax):
        modes.append((k, "cos"))
        modes.append((k, "sin"))
    return modes


def _mode_fields(modes, M):
    """Values and gradients of the velocity basis on an ``M x M`` grid."""
    x = 2 * np.pi * np.arange(M) / M
    X, Y = np.meshgrid(x, x, indexing="ij")
    n = len(modes)
    E = np.zeros((n, 2, M, M))
    G = np.zeros((n, 2, 2, M, M))  # G[q, c, i] = d_i (e_q)_c
    for q, ((kx, ky), kind) in enumerate(modes):
        kn = math.hypot(kx, ky)
        perp = np.array([-ky, kx]) * math.sqrt(2.0) / kn
        phase = kx * X + ky * Y
        c, s = np.cos(phase), np.sin(phase)
        val, der = (c, -s) if kind == "cos" else (s, c)
        for comp in range(2):
            E[q, comp] = perp[comp] * val
            G[q, comp, 0] = perp[comp] * kx * der
            G[q, comp, 1] = perp[comp] * ky * der
    return E, G


def nse2d_tensor(modes):
    """Exact ``b[j,k,l] = <(e_j . grad) e_k, e_l>`` for the given torus modes."""
    kmax = max(max(abs(kx), abs(ky)) for (kx, ky), _ in modes)
    M = 3 * kmax + 1  # products of three modes are integrated exactly
    E, G = _mode_fields(modes, M)
    n = len(modes)
    Ef = E.reshape(n, -1)
    b = np.empty((n, n, n))
    for j in range(n):
        adv = np.einsum("ixy,kcixy->kcxy", E[j], G)
        b[j] = adv.reshape(n, -1) @ Ef.T / (M * M)
    return BilinearTensor.from_dense(b, "nse2d")


def nse2d_model(n_grid, m, coriolis_rate=1.0, nu=1.0, forcing=None):
    modes = nse2d_modes(n_grid)
    lam = np.array([float(kx * kx + ky * ky) for (kx, ky), _ in modes])
    basis = SpectralBasis(lam, m, tuple(modes))
    tensor = nse2d_tensor(modes)
    cor = CoriolisOperator.rotation_blocks(lam, coriolis_rate) if coriolis_rate else CoriolisOperator.zero(lam.size)
    logger.info("nse2d: %d modes, %d tensor entries", lam.size, tensor.nnz)
    return SpectralModel(basis, tensor, cor, nu, forcing)


def nse2d_velocity(model, coeffs, n_grid):
    """Velocity field of ``coeffs`` on an ``n_grid x n_grid`` grid, shape ``(2, n, n)``."""
    E, _ = _mode_fields(list(model.basis.wavevectors), n_grid)
    return np.tensordot(coeffs, E, axes=(0, 0))
