"""Recombining product lattice for d-dimensional Brownian motion.

Layer ``m`` holds the nodes ``w = (j_1, ..., j_d) sqrt(dt)`` with ``|j_r| <= m`` and
``j_r = m (mod 2)``. Each node branches to ``2^d`` children (each coordinate moves
by ``+-sqrt(dt)``) with probability ``2^-d``. Nodes are stored in C order of the
multi-index ``a_r = (j_r + m) / 2`` in ``{0..m}``, so a layer-``m`` field with
trailing shape ``s`` is an array of shape ``((m+1)^d, *s)``.
"""

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import binom

from .errors import InvalidInput, ResourceError

DEFAULT_NODE_BUDGET = 2_000_000


@dataclass(frozen=True)
class Lattice:
    d: int
    T: float
    steps: int

    kind = "lattice"

    @property
    def dt(self):
        return self.T / self.steps

    @property
    def sqrt_dt(self):
        return np.sqrt(self.dt)

    def size(self, m):
        return (m + 1) ** self.d

    def time(self, m):
        return m * self.dt

    def states(self, m):
        """Node states at layer ``m`` as an ``((m+1)^d, d)`` array."""
        j = 2 * np.arange(m + 1) - m
        grids = np.meshgrid(*([j] * self.d), indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=-1) * self.sqrt_dt

    def children(self, m):
        """Flat indices of the ``2^d`` children of each layer-``m`` node.

        Column ``s`` corresponds to the sign pattern ``itertools.product((0, 1), repeat=d)``
        (``1`` = up move in that coordinate).
        """
        idx = np.indices((m + 1,) * self.d).reshape(self.d, -1)
        out = np.empty((self.size(m), 2**self.d), dtype=np.int64)
        for s, shift in enumerate(itertools.product((0, 1), repeat=self.d)):
            out[:, s] = np.ravel_multi_index(idx + np.array(shift)[:, None], (m + 2,) * self.d)
        return out

    def parents(self, m):
        """Parent indices of each layer-``m`` node (``m >= 1``), padded with ``-1``."""
        if m < 1:
            raise InvalidInput("layer 0 has no parents")
        out = np.full((self.size(m), 2**self.d), -1, dtype=np.int64)
        for s, child in enumerate(self.children(m - 1).T):
            out[child, s] = np.arange(self.size(m - 1))
        return out

    def weights(self, m):
        """Probability of each node at layer ``m``."""
        return _weights(self.d, m)

    # -- engine contract ----------------------------------------------------

    def _check(self, m, values):
        values = np.asarray(values, dtype=float)
        if not 0 <= m < self.steps:
            raise InvalidInput(f"layer {m} out of range 0..{self.steps - 1}")
        if values.shape[:1] != (self.size(m + 1),):
            raise InvalidInput(
                f"field at layer {m + 1} must have {self.size(m + 1)} rows, got shape {values.shape}"
            )
        return values.reshape((m + 2,) * self.d + values.shape[1:])

    def cond_exp(self, m, values):
        """Average over the ``2^d`` children: maps a layer ``m+1`` field to layer ``m``."""
        v = self._check(m, values)
        for ax in range(self.d):
            v = 0.5 * (_take(v, ax, 0, m + 1) + _take(v, ax, 1, m + 2))
        return v.reshape((self.size(m),) + v.shape[self.d:])

    def cond_z(self, m, values):
        """``E_m[V_{m+1} dW^r] / dt`` for each coordinate ``r``; trailing axis of length d."""
        v = self._check(m, values)
        out = []
        for r in range(self.d):
            u = v
            for ax in range(self.d):
                lo = _take(u, ax, 0, m + 1)
                hi = _take(u, ax, 1, m + 2)
                u = (0.5 / self.sqrt_dt) * (hi - lo) if ax == r else 0.5 * (lo + hi)
            out.append(u.reshape((self.size(m),) + u.shape[self.d:]))
        return np.stack(out, axis=-1)

    def expectation(self, m, values):
        """Time-zero expectation of a layer-``m`` field (weighted sum over nodes)."""
        values = np.asarray(values, dtype=float)
        if values.shape[:1] != (self.size(m),):
            raise InvalidInput(f"field at layer {m} must have {self.size(m)} rows")
        return np.tensordot(self.weights(m), values, axes=(0, 0))


@lru_cache(maxsize=4096)
def _weights(d, m):
    p = binom.pmf(np.arange(m + 1), m, 0.5)
    w = p
    for _ in range(d - 1):
        w = np.multiply.outer(w, p)
    w = w.reshape(-1)
    w.setflags(write=False)
    return w


def _take(v, axis, start, stop):
    sl = [slice(None)] * v.ndim
    sl[axis] = slice(start, stop)
    return v[tuple(sl)]


def build_lattice(d, T, steps, node_budget=DEFAULT_NODE_BUDGET):
    """Construct a :class:`Lattice`, refusing grids whose last layer exceeds ``node_budget``."""
    if d < 1 or steps < 1 or not T > 0:
        raise InvalidInput("build_lattice needs d >= 1, steps >= 1, T > 0")
    if (steps + 1) ** d > node_budget:
        raise ResourceError(
            f"lattice with d={d}, steps={steps} has {(steps + 1) ** d} terminal nodes, "
            f"budget is {node_budget}"
        )
    return Lattice(d=int(d), T=float(T), steps=int(steps))
