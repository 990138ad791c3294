"""Problem data for multi-dimensional reflected BSDEs and sample-based validators.

A :class:`Scenario` bundles everything needed to pose the system

    Y^i_t = g^i(W_T) + int_t^T f^i(s, Y_s, Z^i_s) ds + K^i_T - K^i_t - int_t^T Z^i_s dW_s,
    Y^i_t >= h^i(t, W_t),   int (Y^i - h^i) dK^i = 0,

with Markovian barrier ``h`` and terminal map ``g``. Structural conditions on the
driver and data cannot be proved for arbitrary callables, so they are checked on
deterministic sample sets (``validate_*``); the built-in families also carry
closed-form coefficient checks.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable

import numpy as np

from .errors import AssumptionError, ConfigError, InvalidInput

# Barriers may be unbounded below; lattice arithmetic works with a finite floor.
BARRIER_FLOOR = -1.0e6


def _frozen(x, shape=None, name="array"):
    arr = np.array(x, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ConfigError(f"{name}: expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearQuadratic:
    r"""Driver ``f^i(t, y, z^i) = a_i + sum_j c_ij y^j + b_i . z^i + gamma_i/2 |z^i|^2``.

    Parameters
    ----------
    a : (n,) array
        Constant drift term.
    c : (n, n) array
        Coupling matrix in ``y``; off-diagonal entries must be nonnegative.
    b : (n, d) array
        Linear coefficient of each component's own row of ``Z``.
    gamma : (n,) array
        Nonnegative quadratic coefficients.
    growth_constant : float, optional
        Declared constant ``C`` in ``|f^i| <= C (1 + |y| + |z^i|^2)``. Defaults to
        the constant implied by the coefficients.
    """

    a: Any
    c: Any
    b: Any
    gamma: Any
    growth_constant: float | None = None
    family = "linear_quadratic"

    def __post_init__(self):
        a = np.atleast_1d(np.array(self.a, dtype=float))
        n = a.shape[0]
        c = np.array(self.c, dtype=float).reshape(n, n) if np.size(self.c) else np.zeros((n, n))
        b = np.array(self.b, dtype=float)
        if b.ndim == 1:
            b = b.reshape(n, -1)
        gamma = np.atleast_1d(np.array(self.gamma, dtype=float))
        if gamma.shape != (n,):
            raise ConfigError(f"gamma: expected {n} entries, got {gamma.shape}")
        if np.any(gamma < 0):
            raise ConfigError("gamma must be nonnegative")
        for name, arr in (("a", a), ("c", c), ("b", b), ("gamma", gamma)):
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"generator coefficient {name} must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def zero(cls, n, d):
        return cls(a=np.zeros(n), c=np.zeros((n, n)), b=np.zeros((n, d)), gamma=np.zeros(n))

    @classmethod
    def quadratic(cls, gamma, d=1):
        gamma = np.atleast_1d(np.array(gamma, dtype=float))
        n = gamma.shape[0]
        return cls(a=np.zeros(n), c=np.zeros((n, n)), b=np.zeros((n, d)), gamma=gamma)

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def d(self):
        return self.b.shape[1]

    def __call__(self, t, y, z):
        """Evaluate all components; ``y`` is ``(N, n)``, ``z`` is ``(N, n, d)``."""
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        out = self.a + y @ self.c.T
        out = out + np.einsum("id,...id->...i", self.b, z)
        out = out + 0.5 * self.gamma * np.sum(z * z, axis=-1)
        return out

    def implied_constant(self):
        # |b.z| <= |b| (1 + |z|^2) / 2
        bn = np.linalg.norm(self.b, axis=1)
        cn = np.linalg.norm(self.c, axis=1)
        per = np.maximum.reduce([np.abs(self.a) + 0.5 * bn, cn, 0.5 * (bn + self.gamma)])
        return float(np.max(per))

    def lipschitz_y(self):
        return float(np.max(np.linalg.norm(self.c, axis=1)))

    def off_diagonal_witness(self):
        """Closed-form check: return ``(i, j)`` of a negative off-diagonal entry, or None."""
        off = self.c.copy()
        np.fill_diagonal(off, 0.0)
        if np.all(off >= 0):
            return None
        i, j = np.unravel_index(np.argmin(off), off.shape)
        return int(i), int(j)

    def is_pure_quadratic(self):
        return (
            not np.any(self.a)
            and not np.any(self.c)
            and not np.any(self.b)
            and bool(np.all(self.gamma > 0))
        )

    def to_dict(self):
        return {
            "family": self.family,
            "a": self.a.tolist(),
            "c": self.c.tolist(),
            "b": self.b.tolist(),
            "gamma": self.gamma.tolist(),
            "growth_constant": self.growth_constant,
        }

    def bumped(self, da):
        return LinearQuadratic(self.a + np.asarray(da, dtype=float), self.c, self.b, self.gamma,
                               self.growth_constant)


@dataclass(frozen=True, eq=False)
class CallableGenerator:
    """User-supplied driver ``func(t, y, z) -> (N, n)`` with a declared growth constant."""

    func: Callable
    n: int
    d: int
    growth_constant: float
    lipschitz: float | None = None
    family = "callable"

    def __call__(self, t, y, z):
        return np.asarray(self.func(t, np.asarray(y, float), np.asarray(z, float)), dtype=float)

    def implied_constant(self):
        return float(self.growth_constant)

    def lipschitz_y(self):
        return self.lipschitz

    def off_diagonal_witness(self):
        return None

    def is_pure_quadratic(self):
        return False

    def to_dict(self):
        return {"family": self.family, "name": getattr(self.func, "__qualname__", repr(self.func)),
                "growth_constant": self.growth_constant}


# ---------------------------------------------------------------------------
# Barrier and terminal maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClampedAffineBarrier:
    """``h^i(t, w) = min(cap_i, alpha_i + beta_i . w + delta_i t)``.

    ``cap`` entries may be ``None``/``inf`` (no cap). ``s_plus_max`` is the declared
    bound on the positive part of the barrier.
    """

    alpha: Any
    beta: Any
    delta: Any = None
    cap: Any = None
    s_plus_max: float | None = None
    family = "clamped_affine"

    def __post_init__(self):
        alpha = np.atleast_1d(np.array(self.alpha, dtype=float))
        n = alpha.shape[0]
        beta = np.array(self.beta, dtype=float)
        if beta.ndim <= 1:
            beta = beta.reshape(n, -1)
        delta = np.zeros(n) if self.delta is None else np.atleast_1d(np.array(self.delta, float))
        if self.cap is None:
            cap = np.full(n, np.inf)
        else:
            cap = np.array([np.inf if v is None else v for v in np.atleast_1d(self.cap)], float)
        for name, arr in (("alpha", alpha), ("beta", beta), ("delta", delta), ("cap", cap)):
            if arr.shape[0] != n:
                raise ConfigError(f"barrier {name}: expected {n} rows, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def constant(cls, values, d=1):
        v = np.atleast_1d(np.array(values, dtype=float))
        return cls(alpha=v, beta=np.zeros((v.shape[0], d)), cap=v, s_plus_max=float(max(v.max(), 0.0)))

    @property
    def n(self):
        return self.alpha.shape[0]

    @property
    def d(self):
        return self.beta.shape[1]

    def __call__(self, t, w):
        w = np.atleast_2d(np.asarray(w, dtype=float))
        raw = self.alpha + w @ self.beta.T + self.delta * t
        return np.maximum(np.minimum(raw, self.cap), BARRIER_FLOOR)

    def upper(self, T):
        if self.s_plus_max is not None:
            return float(self.s_plus_max)
        tops = []
        for i in range(self.n):
            if np.isfinite(self.cap[i]):
                top = self.cap[i]
                if not np.any(self.beta[i]):
                    top = min(top, self.alpha[i] + max(0.0, self.delta[i] * T))
            elif not np.any(self.beta[i]):
                top = self.alpha[i] + max(0.0, self.delta[i] * T)
            else:
                return np.inf
            tops.append(top)
        return float(max(max(tops), 0.0))

    def bumped(self, shift):
        shift = np.broadcast_to(np.asarray(shift, dtype=float), (self.n,))
        sp = None if self.s_plus_max is None else self.s_plus_max + float(max(shift.max(), 0.0))
        return ClampedAffineBarrier(self.alpha + shift, self.beta, self.delta, self.cap + shift, sp)

    def to_dict(self):
        return {
            "family": self.family,
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "delta": self.delta.tolist(),
            "cap": [None if not np.isfinite(v) else float(v) for v in self.cap],
            "s_plus_max": self.s_plus_max,
        }


@dataclass(frozen=True, eq=False)
class ClampedAffineTerminal:
    """``g^i(w) = clamp(alpha_i + beta_i . w, lower_i, upper_i)``.

    ``lower``/``upper`` default to ``-xi_max``/``xi_max``.
    """

    alpha: Any
    beta: Any
    xi_max: float | None = None
    lower: Any = None
    upper: Any = None
    family = "clamped_affine"

    def __post_init__(self):
        alpha = np.atleast_1d(np.array(self.alpha, dtype=float))
        n = alpha.shape[0]
        beta = np.array(self.beta, dtype=float)
        if beta.ndim <= 1:
            beta = beta.reshape(n, -1)
        if self.xi_max is None and (self.lower is None or self.upper is None):
            raise ConfigError("terminal: need xi_max or both lower and upper")
        xi = self.xi_max
        lower = np.full(n, -xi) if self.lower is None else np.atleast_1d(np.array(self.lower, float))
        upper = np.full(n, xi) if self.upper is None else np.atleast_1d(np.array(self.upper, float))
        if np.any(lower > upper):
            raise ConfigError("terminal: lower clamp exceeds upper clamp")
        if xi is None:
            xi = float(max(np.abs(lower).max(), np.abs(upper).max()))
            object.__setattr__(self, "xi_max", xi)
        for name, arr in (("alpha", alpha), ("beta", beta), ("lower", lower), ("upper", upper)):
            if arr.shape[0] != n:
                raise ConfigError(f"terminal {name}: expected {n} rows, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def constant(cls, values, d=1):
        v = np.atleast_1d(np.array(values, dtype=float))
        return cls(alpha=v, beta=np.zeros((v.shape[0], d)), xi_max=float(np.abs(v).max()), lower=v, upper=v)

    @property
    def n(self):
        return self.alpha.shape[0]

    @property
    def d(self):
        return self.beta.shape[1]

    def __call__(self, w):
        w = np.atleast_2d(np.asarray(w, dtype=float))
        return np.clip(self.alpha + w @ self.beta.T, self.lower, self.upper)

    def bumped(self, shift):
        shift = np.broadcast_to(np.asarray(shift, dtype=float), (self.n,))
        lo, hi = self.lower + shift, self.upper + shift
        xi = float(max(self.xi_max, np.abs(lo).max(), np.abs(hi).max()))
        return ClampedAffineTerminal(self.alpha + shift, self.beta, xi, lo, hi)

    def to_dict(self):
        return {
            "family": self.family,
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "xi_max": self.xi_max,
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
        }


@dataclass(frozen=True, eq=False)
class CallableBarrier:
    func: Callable
    n: int
    s_plus_max: float
    family = "callable"

    def __call__(self, t, w):
        w = np.atleast_2d(np.asarray(w, dtype=float))
        return np.maximum(np.asarray(self.func(t, w), dtype=float).reshape(w.shape[0], self.n), BARRIER_FLOOR)

    def upper(self, T):
        return float(self.s_plus_max)

    def to_dict(self):
        return {"family": self.family, "name": getattr(self.func, "__qualname__", repr(self.func)),
                "s_plus_max": self.s_plus_max}


@dataclass(frozen=True, eq=False)
class CallableTerminal:
    func: Callable
    n: int
    xi_max: float
    family = "callable"

    def __call__(self, w):
        w = np.atleast_2d(np.asarray(w, dtype=float))
        return np.asarray(self.func(w), dtype=float).reshape(w.shape[0], self.n)

    def to_dict(self):
        return {"family": self.family, "name": getattr(self.func, "__qualname__", repr(self.func)),
                "xi_max": self.xi_max}


# ---------------------------------------------------------------------------
# Schedule, engine knobs, scenario
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PenaltySchedule:
    k0: float = 1.0
    growth: float = 2.0
    count: int = 13

    def __post_init__(self):
        if not (self.k0 > 0 and np.isfinite(self.k0)):
            raise ConfigError("penalty_schedule.k0 must be positive and finite")
        if not self.growth > 1:
            raise ConfigError("penalty_schedule.growth must exceed 1")
        if self.count < 1:
            raise ConfigError("penalty_schedule.count must be >= 1")
        if not np.isfinite(self.k0 * self.growth ** (self.count - 1)):
            raise ConfigError("penalty_schedule overflows")

    def levels(self):
        return [self.k0 * self.growth**j for j in range(self.count)]

    @property
    def k_max(self):
        return self.levels()[-1]


ENGINES = ("lattice", "mc")
PICARD_STARTS = ("a", "upper", "lower")
ORDERS = ("natural", "reversed", "permuted")


@dataclass(frozen=True)
class EngineConfig:
    """Engine selection plus solver knobs.

    ``clamp=None`` means ``10 (xi_max + s_plus_max + 1)``. ``grain`` chunks the
    per-layer node solves; ``order``/``picard_start`` exist for uniqueness probes.
    """

    engine: str = "lattice"
    node_budget: int = 2_000_000
    seed: int = 0
    paths: int = 50_000
    basis_degree: int = 3
    picard_tol: float = 1e-12
    picard_max_iter: int = 50
    clamp: float | None = None
    picard_start: str = "a"
    order: str = "natural"
    grain: int | None = None

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.picard_start not in PICARD_STARTS:
            raise ConfigError(f"picard_start must be one of {PICARD_STARTS}")
        if self.order not in ORDERS:
            raise ConfigError(f"order must be one of {ORDERS}")
        if not self.picard_tol > 0:
            raise ConfigError("picard_tol must be positive")
        if self.picard_max_iter < 1:
            raise ConfigError("picard_max_iter must be >= 1")
        if self.clamp is not None and not self.clamp > 0:
            raise ConfigError("clamp must be positive")
        if self.grain is not None and self.grain < 1:
            raise ConfigError("grain must be >= 1")
        if self.basis_degree < 0 or self.paths < 1 or self.node_budget < 1:
            raise ConfigError("basis_degree, paths and node_budget must be positive")


@dataclass(frozen=True, eq=False)
class Scenario:
    n: int
    d: int
    T: float
    steps: int
    generator: Any
    barrier: Any
    terminal: Any
    penalty_schedule: PenaltySchedule = field(default_factory=PenaltySchedule)
    engine_config: EngineConfig = field(default_factory=EngineConfig)

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ConfigError("n must be a positive integer")
        if not (isinstance(self.d, (int, np.integer)) and self.d >= 1):
            raise ConfigError("d must be a positive integer")
        if not (self.T > 0 and np.isfinite(self.T)):
            raise ConfigError("T must be positive")
        if not (isinstance(self.steps, (int, np.integer)) and self.steps >= 1):
            raise ConfigError("steps must be a positive integer")
        for name in ("generator", "barrier", "terminal"):
            part = getattr(self, name)
            if part.n != self.n:
                raise ConfigError(f"{name} has {part.n} components, scenario has n={self.n}")
        for name in ("generator", "barrier", "terminal"):
            part = getattr(self, name)
            if hasattr(part, "beta") and part.d != self.d:
                raise ConfigError(f"{name} has dimension {part.d}, scenario has d={self.d}")
        if isinstance(self.generator, LinearQuadratic) and self.generator.d != self.d:
            raise ConfigError(f"generator has dimension {self.generator.d}, scenario has d={self.d}")

    @property
    def dt(self):
        return self.T / self.steps

    def time(self, m):
        return m * self.dt

    @property
    def xi_max(self):
        return float(self.terminal.xi_max)

    @property
    def s_plus_max(self):
        return self.barrier.upper(self.T)

    @property
    def clamp_bound(self):
        if self.engine_config.clamp is not None:
            return float(self.engine_config.clamp)
        return 10.0 * (self.xi_max + self.s_plus_max + 1.0)

    def replace(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)

    def with_engine(self, **changes):
        from dataclasses import replace

        return self.replace(engine_config=replace(self.engine_config, **changes))

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        from dataclasses import asdict

        return {
            "n": int(self.n),
            "d": int(self.d),
            "T": float(self.T),
            "steps": int(self.steps),
            "generator": self.generator.to_dict(),
            "barrier": self.barrier.to_dict(),
            "terminal": self.terminal.to_dict(),
            "penalty_schedule": asdict(self.penalty_schedule),
            "engine_config": asdict(self.engine_config),
        }

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("scenario must be a JSON object")
        missing = [k for k in ("n", "d", "T", "steps", "generator", "barrier", "terminal") if k not in data]
        if missing:
            raise ConfigError(f"scenario is missing field(s): {', '.join(missing)}")
        known = {"n", "d", "T", "steps", "generator", "barrier", "terminal", "penalty_schedule",
                 "engine_config", "name", "description"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scenario field(s): {', '.join(sorted(unknown))}")
        n, d = data["n"], data["d"]
        try:
            generator = _generator_from_dict(data["generator"], n, d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"generator: {exc}") from exc
        try:
            barrier = _barrier_from_dict(data["barrier"], n, d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"barrier: {exc}") from exc
        try:
            terminal = _terminal_from_dict(data["terminal"], n, d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"terminal: {exc}") from exc
        try:
            schedule = PenaltySchedule(**data.get("penalty_schedule", {}))
        except TypeError as exc:
            raise ConfigError(f"penalty_schedule: {exc}") from exc
        try:
            engine = EngineConfig(**data.get("engine_config", {}))
        except TypeError as exc:
            raise ConfigError(f"engine_config: {exc}") from exc
        return cls(n=n, d=d, T=float(data["T"]), steps=data["steps"], generator=generator,
                   barrier=barrier, terminal=terminal, penalty_schedule=schedule, engine_config=engine)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def fingerprint(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # -- validation ---------------------------------------------------------

    @cached_property
    def assumptions(self):
        samples = default_samples(self)
        return [
            validate_growth(self.generator, samples["growth"]),
            validate_off_diagonal_monotonicity(self.generator, samples["pairs"]),
            validate_bounds(self.barrier, self.terminal, samples["states"], self.T),
        ]

    def check(self):
        """Raise :class:`AssumptionError` on the first failing validator."""
        for report in self.assumptions:
            if not report.passed:
                raise AssumptionError(report)
        return self


def _generator_from_dict(g, n, d):
    g = dict(g)
    family = g.pop("family", "linear_quadratic")
    if family != "linear_quadratic":
        raise ConfigError(f"generator.family {family!r} cannot be loaded from JSON")
    a = g.pop("a", [0.0] * n)
    c = g.pop("c", [[0.0] * n for _ in range(n)])
    b = g.pop("b", [[0.0] * d for _ in range(n)])
    gamma = g.pop("gamma", [0.0] * n)
    gc = g.pop("growth_constant", None)
    if g:
        raise ConfigError(f"generator: unknown field(s) {', '.join(sorted(g))}")
    if np.shape(c) != (n, n):
        raise ConfigError(f"generator.c must be {n}x{n}")
    if np.shape(b) != (n, d):
        raise ConfigError(f"generator.b must be {n}x{d}")
    return LinearQuadratic(a, c, b, gamma, gc)


def _barrier_from_dict(h, n, d):
    h = dict(h)
    family = h.pop("family", "clamped_affine")
    if family != "clamped_affine":
        raise ConfigError(f"barrier.family {family!r} cannot be loaded from JSON")
    out = ClampedAffineBarrier(
        alpha=h.pop("alpha"),
        beta=h.pop("beta", [[0.0] * d for _ in range(n)]),
        delta=h.pop("delta", None),
        cap=h.pop("cap", None),
        s_plus_max=h.pop("s_plus_max", None),
    )
    if h:
        raise ConfigError(f"barrier: unknown field(s) {', '.join(sorted(h))}")
    return out


def _terminal_from_dict(g, n, d):
    g = dict(g)
    family = g.pop("family", "clamped_affine")
    if family != "clamped_affine":
        raise ConfigError(f"terminal.family {family!r} cannot be loaded from JSON")
    out = ClampedAffineTerminal(
        alpha=g.pop("alpha"),
        beta=g.pop("beta", [[0.0] * d for _ in range(n)]),
        xi_max=g.pop("xi_max", None),
        lower=g.pop("lower", None),
        upper=g.pop("upper", None),
    )
    if g:
        raise ConfigError(f"terminal: unknown field(s) {', '.join(sorted(g))}")
    return out


# ---------------------------------------------------------------------------
# Validators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of one validator.

    ``constant`` is the estimated structural constant (growth check) and
    ``worst`` the worst margin found (negative = violated). A failing report
    always carries a ``witness``.
    """

    name: str
    passed: bool
    constant: float | None = None
    worst: float | None = None
    witness: Any = None
    message: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.passed and self.witness is None:
            raise ValueError("failing AssumptionReport must carry a witness")

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "constant": self.constant,
            "worst": self.worst,
            "witness": _jsonable(self.witness),
            "message": self.message,
            "details": _jsonable(self.details),
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return x


def validate_growth(gen, samples, declared=None, rtol=1e-12):
    """Estimate ``C`` with ``|f^i(t,y,z^i)| <= C(1+|y|+|z^i|^2)`` over samples.

    ``samples`` is a sequence of ``(t, y, z)`` with ``y`` of shape ``(n,)`` and
    ``z`` of shape ``(n, d)``. The check fails if the sampled ratio exceeds the
    declared constant (or the coefficient-implied one when none is declared).
    """
    samples = list(samples)
    if not samples:
        raise InvalidInput("validate_growth needs at least one sample")
    bound = declared if declared is not None else gen.growth_constant
    if bound is None:
        bound = gen.implied_constant()
    worst_ratio, witness = 0.0, None
    by_time = {}
    for idx, (t, y, z) in enumerate(samples):
        y = np.asarray(y, dtype=float).reshape(-1)
        z = np.asarray(z, dtype=float)
        if y.shape != (gen.n,) or z.ndim != 2 or z.shape[0] != gen.n:
            raise InvalidInput(f"sample {idx}: y must have shape ({gen.n},), z ({gen.n}, d)")
        if hasattr(gen, "d") and z.shape[1] != gen.d:
            raise InvalidInput(f"sample {idx}: z must have {gen.d} columns")
        by_time.setdefault(float(t), []).append((idx, y, z))
    for t, group in by_time.items():
        idxs = [g[0] for g in group]
        Y = np.stack([g[1] for g in group])
        Z = np.stack([g[2] for g in group])
        F = gen(t, Y, Z)
        denom = 1.0 + np.linalg.norm(Y, axis=1)[:, None] + np.sum(Z * Z, axis=-1)
        ratio = np.abs(F) / denom
        ratio = np.where(np.isfinite(ratio), ratio, np.inf)
        r, i = np.unravel_index(np.argmax(ratio), ratio.shape)
        if ratio[r, i] > worst_ratio or witness is None:
            if ratio[r, i] >= worst_ratio:
                worst_ratio = float(ratio[r, i])
                witness = {"t": t, "y": Y[r], "z": Z[r], "component": int(i), "f": float(F[r, i]),
                           "sample": idxs[r]}
    passed = bool(np.isfinite(worst_ratio) and worst_ratio <= bound * (1 + rtol) + 1e-300)
    msg = f"sampled growth ratio {worst_ratio:.6g} vs bound {bound:.6g}"
    return AssumptionReport(
        name="growth",
        passed=passed,
        constant=worst_ratio,
        worst=float(bound - worst_ratio),
        witness=None if passed else witness,
        message=msg,
        details={"bound": float(bound), "samples": len(samples)},
    )


def validate_off_diagonal_monotonicity(gen, samples, tol=1e-12):
    """Check ``f^i(t,y,z^i) <= f^i(t,ybar,z^i)`` when ``y^i = ybar^i``, ``y^j <= ybar^j``.

    ``samples`` is a sequence of ``(t, i, y, ybar, z)``. Pairs that do not satisfy
    the partial order are rejected with :class:`InvalidInput`.
    """
    name = "off_diagonal_monotonicity"
    if gen.n == 1:
        return AssumptionReport(name, True, worst=0.0, message="n=1: no off-diagonal components")
    worst, witness = np.inf, None
    for idx, (t, i, y, ybar, z) in enumerate(samples):
        y = np.asarray(y, dtype=float).reshape(-1)
        ybar = np.asarray(ybar, dtype=float).reshape(-1)
        z = np.asarray(z, dtype=float)
        if y[i] != ybar[i]:
            raise InvalidInput(f"pair {idx}: y[{i}] != ybar[{i}]")
        if np.any(np.delete(y, i) > np.delete(ybar, i)):
            raise InvalidInput(f"pair {idx}: y is not below ybar off the diagonal")
        f = gen(t, y[None], z[None])[0, i]
        fbar = gen(t, ybar[None], z[None])[0, i]
        margin = float(fbar - f)
        if margin < worst:
            worst = margin
            witness = {"t": t, "component": int(i), "y": y, "ybar": ybar, "f": float(f), "fbar": float(fbar)}
    passed = bool(worst >= -tol) if np.isfinite(worst) else True
    message = f"worst margin {worst:.6g}" if np.isfinite(worst) else "no samples"
    closed = gen.off_diagonal_witness()
    if closed is not None:
        i, j = closed
        y = np.zeros(gen.n)
        ybar = np.zeros(gen.n)
        ybar[j] = 1.0
        z = np.zeros((gen.n, getattr(gen, "d", 1)))
        f = float(gen(0.0, y[None], z[None])[0, i])
        fbar = float(gen(0.0, ybar[None], z[None])[0, i])
        if passed:
            witness = {"t": 0.0, "component": i, "y": y, "ybar": ybar, "f": f, "fbar": fbar}
        passed = False
        worst = min(worst, fbar - f)
        message = f"coupling c[{i}][{j}] = {gen.c[i, j]:g} < 0; {message}"
    return AssumptionReport(name, passed, worst=float(worst) if np.isfinite(worst) else None,
                            witness=None if passed else witness, message=message)


def validate_bounds(barrier, terminal, samples, T, tol=1e-12):
    """Check ``h^+ <= s_plus_max``, ``|g| <= xi_max`` and ``g >= h(T, .)`` on samples.

    ``samples`` is a sequence of ``(t, w)``; the terminal checks use every sampled
    state ``w`` regardless of its time stamp.
    """
    samples = list(samples)
    if not samples:
        raise InvalidInput("validate_bounds needs at least one sample")
    ts = np.array([float(t) for t, _ in samples])
    W = np.stack([np.atleast_1d(np.asarray(w, dtype=float)) for _, w in samples])
    s_plus = barrier.upper(T)
    xi_max = float(terminal.xi_max)

    H = np.empty((len(samples), barrier.n))
    for t in np.unique(ts):
        sel = ts == t
        H[sel] = barrier(t, W[sel])
    G = terminal(W)
    HT = barrier(T, W)

    checks = {}
    hp = np.maximum(H, 0.0)
    r, i = np.unravel_index(np.argmax(hp), hp.shape)
    checks["barrier_upper"] = (s_plus - hp[r, i], {"t": ts[r], "w": W[r], "component": int(i), "h": H[r, i],
                                                   "s_plus_max": s_plus})
    ag = np.abs(G)
    r, i = np.unravel_index(np.argmax(ag), ag.shape)
    checks["terminal_bound"] = (xi_max - ag[r, i], {"w": W[r], "component": int(i), "g": G[r, i],
                                                    "xi_max": xi_max})
    gap = G - HT
    r, i = np.unravel_index(np.argmin(gap), gap.shape)
    checks["terminal_dominates_barrier"] = (gap[r, i], {"w": W[r], "component": int(i), "g": G[r, i],
                                                        "h_T": HT[r, i]})
    failing = [k for k, (margin, _) in checks.items() if not margin >= -tol]
    worst = min(float(m) for m, _ in checks.values())
    details = {k: float(m) for k, (m, _) in checks.items()}
    if failing:
        first = failing[0]
        return AssumptionReport("bounds", False, worst=worst, witness={"check": first, **checks[first][1]},
                                message=f"failed: {', '.join(failing)}", details=details)
    return AssumptionReport("bounds", True, worst=worst, message="ok", details=details)


def default_samples(scenario, seed=0, n_growth=512, n_pairs=128):
    """Deterministic sample sets covering the scenario's time grid and lattice reach."""
    rng = np.random.default_rng(seed)
    n, d, T = scenario.n, scenario.d, scenario.T
    grid = np.arange(scenario.steps + 1) * scenario.dt
    if grid.size > 64:
        grid = grid[np.linspace(0, grid.size - 1, 64).round().astype(int)]
    R = scenario.clamp_bound

    growth = []
    for _ in range(n_growth):
        t = float(rng.choice(grid))
        y = rng.uniform(-R, R, size=n) * rng.choice([1e-3, 1e-1, 1.0])
        z = rng.standard_normal((n, d)) * 10.0 ** rng.uniform(-2, 2)
        growth.append((t, y, z))
    growth.append((0.0, np.zeros(n), np.zeros((n, d))))

    pairs = []
    if n > 1:
        for i in range(n):
            for _ in range(n_pairs):
                t = float(rng.choice(grid))
                y = rng.uniform(-R, R, size=n)
                bump = np.abs(rng.standard_normal(n)) * rng.choice([1e-2, 1.0, R])
                bump[i] = 0.0
                z = rng.standard_normal((n, d)) * 10.0 ** rng.uniform(-2, 1)
                pairs.append((t, i, y, y + bump, z))

    reach = np.sqrt(T * scenario.steps)
    if d == 1:
        pts = np.linspace(-reach, reach, 2001)[:, None]
    else:
        per = max(3, int(round(40000 ** (1.0 / d))))
        axes = [np.linspace(-reach, reach, per)] * d
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        pts = np.vstack([pts, rng.uniform(-reach, reach, size=(2000, d))])
    pts = np.vstack([pts, np.zeros((1, d))])
    states = [(float(t), w) for t in np.append(grid, T) for w in pts[:: max(1, len(pts) // 200)]]
    states += [(float(T), w) for w in pts]
    return {"growth": growth, "pairs": pairs, "states": states}
