"""Backward induction for the penalized and the directly reflected schemes.

On each layer ``m`` (going backwards) the solver forms

    a   = E_m[Y_{m+1}],          Z_m = E_m[Y_{m+1} dW^T] / dt,

and then solves the n-dimensional implicit problem

    y^i = a^i + dt f^i(t_m, y, Z^i_m) + dt k (y^i - S^i_m)^-

by Picard iteration on the driver with the penalty handled in closed form
(:func:`implicit_penalty_step`). ``Z`` is explicit; ``y`` inside ``f`` is the
current iterate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence
from .lattice import build_lattice
from .mc import MonteCarloEngine

log = logging.getLogger(__name__)


def implicit_penalty_step(a, S, k, dt):
    """Unique root of ``y = a + dt k (y - S)^-``.

    Vectorised over array inputs. For ``a >= S`` the penalty is inactive and
    ``y = a``; otherwise ``y = (a + dt k S) / (1 + dt k)``.
    """
    a = np.asarray(a, dtype=float)
    S = np.asarray(S, dtype=float)
    lam = dt * k
    return np.where(a >= S, a, (a + lam * S) / (1.0 + lam))


def picard_step(gen, t, a, Z, S, k, dt, tol=1e-12, max_iter=50, y0=None):
    """Solve ``y^i = implicit_penalty_step(a^i + dt f^i(t, y, Z^i), S^i, k, dt)``.

    Parameters
    ----------
    a, S : array (..., n)
    Z : array (..., n, d)
    y0 : array, optional
        Starting iterate; defaults to ``a``.

    Returns
    -------
    y : array (..., n)
    iters : int
        Number of sweeps until the sup-change dropped to ``tol``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    Z = np.asarray(Z, dtype=float).reshape(a.shape + (-1,))
    y = a.copy() if y0 is None else np.broadcast_to(np.asarray(y0, dtype=float), a.shape).copy()
    residual = np.inf
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(1, max_iter + 1):
            y_new = implicit_penalty_step(a + dt * gen(t, y, Z), S, k, dt)
            residual = float(np.max(np.abs(y_new - y))) if y.size else 0.0
            y = y_new
            if residual <= tol:
                return y, it
            if not np.isfinite(residual):
                break
    raise NonConvergence(residual, max_iter)


def _project_step(gen, t, a, Z, S, dt, tol, max_iter, y0=None):
    """Picard solve of ``y = max(S, a + dt f(t, y, Z))``; returns (y, unreflected part, iters)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    y = a.copy() if y0 is None else np.broadcast_to(np.asarray(y0, dtype=float), a.shape).copy()
    residual = np.inf
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(1, max_iter + 1):
            free = a + dt * gen(t, y, Z)
            y_new = np.maximum(S, free)
            residual = float(np.max(np.abs(y_new - y))) if y.size else 0.0
            y = y_new
            if residual <= tol:
                return y, a + dt * gen(t, y, Z), it
            if not np.isfinite(residual):
                break
    raise NonConvergence(residual, max_iter)


@dataclass(frozen=True, eq=False)
class DiscreteSolution:
    """Per-layer arrays of one backward solve.

    ``Y[m]`` has shape ``(N_m, n)`` for ``m = 0..M``; ``Z[m]`` is ``(N_m, n, d)`` and
    ``dK[m]`` is ``(N_m, n)`` for ``m = 0..M-1``. ``k`` is the penalty level or the
    tag ``"direct"`` / ``"limit"``.
    """

    k: float | str
    Y: list
    Z: list
    dK: list
    S: list
    engine_kind: str
    picard_max: int = 0
    picard_mean: float = 0.0
    clamp_count: int = 0
    source_k: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for arrs in (self.Y, self.Z, self.dK, self.S):
            for arr in arrs:
                arr.setflags(write=False)

    @property
    def steps(self):
        return len(self.Y) - 1

    @property
    def n(self):
        return self.Y[0].shape[1]

    @property
    def Y0(self):
        return self.Y[0].mean(axis=0)

    @property
    def is_penalized(self):
        return not isinstance(self.k, str)

    def sup_norm(self):
        return float(max(np.max(np.abs(y)) for y in self.Y))

    def relabel(self, tag):
        return DiscreteSolution(tag, self.Y, self.Z, self.dK, self.S, self.engine_kind, self.picard_max,
                                self.picard_mean, self.clamp_count,
                                source_k=self.k if not isinstance(self.k, str) else self.source_k,
                                meta=dict(self.meta))


def build_engine(scenario, seed=None):
    """Engine selected by ``scenario.engine_config``."""
    cfg = scenario.engine_config
    if cfg.engine == "lattice":
        return build_lattice(scenario.d, scenario.T, scenario.steps, cfg.node_budget)
    return MonteCarloEngine.simulate(cfg.seed if seed is None else seed, cfg.paths, scenario.steps,
                                     scenario.d, scenario.T, cfg.basis_degree)


def _check_engine(scenario, engine):
    from .errors import InvalidInput

    if engine.d != scenario.d or engine.steps != scenario.steps or not np.isclose(engine.T, scenario.T):
        raise InvalidInput(
            f"engine grid (d={engine.d}, steps={engine.steps}, T={engine.T}) does not match "
            f"scenario (d={scenario.d}, steps={scenario.steps}, T={scenario.T})"
        )


def _layer_order(cfg, size, m):
    if cfg.order == "reversed":
        return np.arange(size)[::-1]
    if cfg.order == "permuted":
        return np.random.default_rng([cfg.seed, m]).permutation(size)
    return None


def _solve(scenario, engine, k, direct):
    scenario.check()
    _check_engine(scenario, engine)
    cfg = scenario.engine_config
    gen, dt, M, n, d = scenario.generator, scenario.dt, scenario.steps, scenario.n, scenario.d
    bound = scenario.clamp_bound

    Y = [None] * (M + 1)
    Z = [None] * M
    dK = [None] * M
    S = [None] * (M + 1)
    S[M] = scenario.barrier(scenario.T, engine.states(M))
    Y[M] = np.asarray(scenario.terminal(engine.states(M)), dtype=float)
    iters_all = []
    clamp_count = 0
    for m in range(M - 1, -1, -1):
        t = scenario.time(m)
        a = engine.cond_exp(m, Y[m + 1])
        z = engine.cond_z(m, Y[m + 1]).reshape(-1, n, d)
        s = scenario.barrier(t, engine.states(m))
        size = a.shape[0]
        perm = _layer_order(cfg, size, m)
        if perm is not None:
            a_, z_, s_ = a[perm], z[perm], s[perm]
        else:
            a_, z_, s_ = a, z, s
        if cfg.picard_start == "upper":
            y0 = np.full_like(a_, bound)
        elif cfg.picard_start == "lower":
            y0 = np.full_like(a_, -bound)
        else:
            y0 = None
        grain = cfg.grain or size
        y_ = np.empty_like(a_)
        k_ = np.empty_like(a_)
        layer_iters = 0
        for lo in range(0, size, grain):
            sl = slice(lo, lo + grain)
            start = None if y0 is None else y0[sl]
            try:
                if direct:
                    y_c, free, it = _project_step(gen, t, a_[sl], z_[sl], s_[sl], dt, cfg.picard_tol,
                                                  cfg.picard_max_iter, start)
                    k_[sl] = np.maximum(y_c - free, 0.0)
                else:
                    y_c, it = picard_step(gen, t, a_[sl], z_[sl], s_[sl], k, dt, cfg.picard_tol,
                                          cfg.picard_max_iter, start)
            except NonConvergence as exc:
                raise NonConvergence(exc.residual, exc.iters, layer=m,
                                     k=None if direct else k) from None
            y_[sl] = y_c
            layer_iters = max(layer_iters, it)
        if perm is not None:
            inv = np.empty_like(perm)
            inv[perm] = np.arange(size)
            y_ = y_[inv]
            k_ = k_[inv]
        clipped = np.abs(y_) > bound
        if np.any(clipped):
            clamp_count += int(clipped.sum())
            y_ = np.clip(y_, -bound, bound)
        Y[m] = y_
        Z[m] = z
        S[m] = s
        if direct:
            dK[m] = k_
        else:
            dK[m] = dt * k * np.maximum(s - y_, 0.0)
        iters_all.append(layer_iters)
    if clamp_count:
        log.warning("clamped %d node values to +-%g (k=%s)", clamp_count, bound, "direct" if direct else k)
    return DiscreteSolution(
        k="direct" if direct else float(k),
        Y=Y,
        Z=Z,
        dK=dK,
        S=S,
        engine_kind=engine.kind,
        picard_max=int(max(iters_all)),
        picard_mean=float(np.mean(iters_all)),
        clamp_count=clamp_count,
    )


def solve_penalized(scenario, k, engine=None):
    """Backward solve of the penalized system at penalty level ``k >= 0``."""
    if not k >= 0:
        raise ValueError("penalty level k must be nonnegative")
    engine = engine or build_engine(scenario)
    return _solve(scenario, engine, k, direct=False)


def solve_direct_reflected(scenario, engine=None):
    """Same recursion with exact projection onto the barrier (the ``k = inf`` scheme)."""
    engine = engine or build_engine(scenario)
    return _solve(scenario, engine, None, direct=True)
