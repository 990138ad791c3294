"""Least-squares Monte Carlo engine.

Conditional expectations at layer ``m`` are projections onto polynomials of the
path state ``W_m``. The class :class:`MonteCarloEngine` exposes the same engine
contract as :class:`rbsde.lattice.Lattice` (``size``, ``states``, ``cond_exp``,
``cond_z``, ``expectation``), with one row per path at every layer.
"""

import itertools
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import qr

from .errors import InvalidInput, RegressionError

RANK_RTOL = 1e-10
_HEADER = struct.Struct("<qqqqd")


@dataclass(frozen=True)
class RegressionBasis:
    """Monomials of total degree ``<= degree`` in ``d`` variables (constant first)."""

    d: int
    degree: int = 3

    @property
    def exponents(self):
        out = []
        for total in range(self.degree + 1):
            for e in itertools.product(range(total + 1), repeat=self.d):
                if sum(e) == total:
                    out.append(e)
        return out

    @property
    def size(self):
        return len(self.exponents)

    def names(self):
        names = []
        for e in self.exponents:
            terms = [f"w{r}" + (f"^{p}" if p > 1 else "") for r, p in enumerate(e) if p]
            names.append("*".join(terms) or "1")
        return names

    def design(self, w):
        w = np.atleast_2d(np.asarray(w, dtype=float))
        powers = [[np.ones(w.shape[0])] for _ in range(self.d)]
        for r in range(self.d):
            for _ in range(self.degree):
                powers[r].append(powers[r][-1] * w[:, r])
        X = np.ones((w.shape[0], self.size))
        for col, e in enumerate(self.exponents):
            for r, p in enumerate(e):
                if p:
                    X[:, col] *= powers[r][p]
        return X


@dataclass(frozen=True, eq=False)
class PathBundle:
    seed: int
    N: int
    M: int
    d: int
    T: float
    dW: np.ndarray
    W: np.ndarray

    @property
    def dt(self):
        return self.T / self.M

    def dump(self, path):
        """Binary dump: ``<qqqqd`` header (seed, N, M, d, T) then row-major float64 increments."""
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(self.seed, self.N, self.M, self.d, self.T))
            fh.write(np.ascontiguousarray(self.dW, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path):
        raw = Path(path).read_bytes()
        seed, N, M, d, T = _HEADER.unpack_from(raw)
        dW = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(N, M, d).astype(float)
        return cls._from_increments(seed, N, M, d, T, dW)

    @classmethod
    def _from_increments(cls, seed, N, M, d, T, dW):
        W = np.zeros((N, M + 1, d))
        np.cumsum(dW, axis=1, out=W[:, 1:, :])
        dW.setflags(write=False)
        W.setflags(write=False)
        return cls(int(seed), int(N), int(M), int(d), float(T), dW, W)


def simulate_paths(seed, N, M, d, T, basis=None):
    """Simulate ``N`` Brownian paths on ``M`` uniform steps.

    ``N`` must be at least twice the regression basis size.
    """
    basis = basis or RegressionBasis(d)
    if N < 2 * basis.size:
        raise InvalidInput(f"N={N} paths is too few for a basis of size {basis.size} (need >= {2 * basis.size})")
    if M < 1 or d < 1 or not T > 0:
        raise InvalidInput("simulate_paths needs M >= 1, d >= 1, T > 0")
    rng = np.random.default_rng(seed)
    dW = rng.standard_normal((N, M, d)) * np.sqrt(T / M)
    return PathBundle._from_increments(seed, N, M, d, T, dW)


def _projector(bundle, m, basis):
    """Orthonormal basis ``Q`` of the regression span at layer ``m``."""
    if m == 0:
        # W_0 = 0 on every path: only the constant feature is informative.
        return np.full((bundle.N, 1), 1.0 / np.sqrt(bundle.N))
    scale = np.sqrt(m * bundle.dt)
    X = basis.design(bundle.W[:, m, :] / scale)
    Q, R, piv = qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > RANK_RTOL * diag[0]))
    if rank < X.shape[1]:
        bad = basis.names()[piv[rank]]
        raise RegressionError(f"design matrix at layer {m} is rank deficient (degenerate feature {bad!r})",
                              feature=bad)
    return Q


def cond_exp_regress(bundle, m, values, basis=None, Q=None):
    """Least-squares projection of per-path ``values`` onto ``basis(W_m)``."""
    basis = basis or RegressionBasis(bundle.d)
    values = np.asarray(values, dtype=float)
    if values.shape[:1] != (bundle.N,):
        raise InvalidInput(f"values must have {bundle.N} rows, got shape {values.shape}")
    if Q is None:
        Q = _projector(bundle, m, basis)
    flat = values.reshape(bundle.N, -1)
    fitted = Q @ (Q.T @ flat)
    return fitted.reshape(values.shape)


def cond_z_regress(bundle, m, values, basis=None, Q=None):
    """Regression estimate of ``E_m[V dW_m^r] / dt``; trailing axis of length d."""
    basis = basis or RegressionBasis(bundle.d)
    values = np.asarray(values, dtype=float)
    if Q is None:
        Q = _projector(bundle, m, basis)
    inc = bundle.dW[:, m, :] / bundle.dt
    shape = (bundle.N,) + (1,) * (values.ndim - 1) + (bundle.d,)
    prod = values[..., None] * inc.reshape(shape)
    return cond_exp_regress(bundle, m, prod, basis, Q=Q)


class MonteCarloEngine:
    """Engine-contract adapter over a :class:`PathBundle`.

    The projector of the most recent layer is cached, since the solver asks for
    ``cond_exp`` and ``cond_z`` of the same layer back to back.
    """

    kind = "mc"

    def __init__(self, bundle, basis=None):
        self.bundle = bundle
        self.basis = basis or RegressionBasis(bundle.d)
        self._cache = (None, None)

    @classmethod
    def simulate(cls, seed, N, M, d, T, degree=3):
        basis = RegressionBasis(d, degree)
        return cls(simulate_paths(seed, N, M, d, T, basis), basis)

    @property
    def d(self):
        return self.bundle.d

    @property
    def T(self):
        return self.bundle.T

    @property
    def steps(self):
        return self.bundle.M

    @property
    def dt(self):
        return self.bundle.dt

    def time(self, m):
        return m * self.dt

    def size(self, m):
        return self.bundle.N

    def states(self, m):
        return self.bundle.W[:, m, :]

    def _Q(self, m):
        if self._cache[0] != m:
            self._cache = (m, _projector(self.bundle, m, self.basis))
        return self._cache[1]

    def cond_exp(self, m, values):
        return cond_exp_regress(self.bundle, m, values, self.basis, Q=self._Q(m))

    def cond_z(self, m, values):
        return cond_z_regress(self.bundle, m, values, self.basis, Q=self._Q(m))

    def expectation(self, m, values):
        return np.mean(np.asarray(values, dtype=float), axis=0)
