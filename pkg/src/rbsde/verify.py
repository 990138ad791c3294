"""Independent oracles and property checks for computed solutions.

The exponential-transform oracle (:func:`cole_hopf_oracle`) deliberately builds
its own binomial grid and log-space dynamic program; it never touches the
solver or the :class:`~rbsde.lattice.Lattice` class.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.special import logsumexp
from scipy.stats import binom

from .errors import InvalidInput, UnsupportedEngine
from .model import LinearQuadratic, default_samples


# ---------------------------------------------------------------------------
# Report types
# ---------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    status: str
    value: float | list | None = None
    tol: float | None = None
    location: dict | None = None
    note: str = ""

    @property
    def passed(self):
        return self.status != "fail"

    @property
    def skipped(self):
        return self.status.startswith("skipped")

    def to_dict(self):
        return {"name": self.name, "status": self.status, "value": self.value, "tol": self.tol,
                "location": self.location, "note": self.note}


def make_check(name, value, tol, location=None, note="", ok=None, advisory=False):
    """``ok`` defaults to ``value <= tol`` (componentwise max for vectors).

    Advisory checks report ``"warn"`` instead of ``"fail"`` and never fail a report.
    """
    v = np.max(value) if np.ndim(value) else value
    if ok is None:
        ok = bool(np.isfinite(v) and v <= tol)
    val = np.asarray(value).tolist() if np.ndim(value) else float(value)
    status = "pass" if ok else ("warn" if advisory else "fail")
    return Check(name, status, val, tol, None if ok else location, note)


def skipped(name, why):
    return Check(name, f"skipped: {why}")


@dataclass
class VerificationReport:
    fingerprint: str
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"fingerprint": self.fingerprint, "passed": self.passed,
                "checks": [c.to_dict() for c in self.checks]}


def _worst(layers, signed=False):
    """Location and value of the largest entry over a list of per-layer arrays."""
    best = (-np.inf, None)
    for m, arr in enumerate(layers):
        arr = np.asarray(arr)
        if arr.size == 0:
            continue
        flat = arr.reshape(arr.shape[0], -1)
        idx = np.unravel_index(np.argmax(flat), flat.shape)
        if flat[idx] > best[0]:
            best = (float(flat[idx]), {"layer": m, "node": int(idx[0]), "component": int(idx[1])})
    return best


# ---------------------------------------------------------------------------
# Optimal-stopping representation
# ---------------------------------------------------------------------------


def optimal_stopping_value(sol, scenario, engine):
    """Snell dynamic program with the driver frozen along ``(Y, Z)`` of ``sol``.

    ``U_M = g``; ``U_m = max(S_m, E_m[U_{m+1}] + dt f(t_m, Y_m, Z_m))``.
    """
    M = sol.steps
    if M != engine.steps:
        raise InvalidInput("solution and engine have different grids")
    U = [None] * (M + 1)
    U[M] = np.asarray(scenario.terminal(engine.states(M)), dtype=float)
    for m in range(M - 1, -1, -1):
        drift = scenario.dt * scenario.generator(scenario.time(m), sol.Y[m], sol.Z[m])
        cont = engine.cond_exp(m, U[m + 1]) + drift
        U[m] = np.maximum(sol.S[m], cont)
    return U


def representation_gap(U, sol, with_location=False):
    if len(U) != len(sol.Y) or any(u.shape != y.shape for u, y in zip(U, sol.Y)):
        raise InvalidInput("U and solution shapes differ")
    gap, loc = _worst([np.abs(u - y) for u, y in zip(U, sol.Y)])
    return (gap, loc) if with_location else gap


def hitting_time_check(sol, engine, tol_contact=1e-3, tol_flat=1e-3):
    """Expected increase of ``K`` strictly before first contact with the barrier.

    ``F_m = 0`` where ``Y_m - S_m <= tol_contact``, otherwise
    ``F_m = dK_m + E_m[F_{m+1}]``; reports ``max_{m, node} F_m`` per component. On the
    Monte Carlo engine the conditional expectation is replaced by the pathwise
    continuation and the maximum is taken over layers of path averages.
    """
    M = sol.steps
    F = np.zeros_like(sol.Y[M])
    worst = np.zeros(sol.n)
    loc = None
    for m in range(M - 1, -1, -1):
        cont = engine.cond_exp(m, F) if engine.kind == "lattice" else F
        contact = (sol.Y[m] - sol.S[m]) <= tol_contact
        F = np.where(contact, 0.0, sol.dK[m] + cont)
        level = F.max(axis=0) if engine.kind == "lattice" else F.mean(axis=0)
        if np.any(level > worst):
            i = int(np.argmax(level))
            loc = {"layer": m, "node": int(np.argmax(F[:, i])), "component": i}
        worst = np.maximum(worst, level)
    return make_check("hitting_time_flatness", worst, tol_flat, loc,
                      note=f"contact tolerance {tol_contact:g}")


# ---------------------------------------------------------------------------
# Exponential-transform oracle (scalar purely quadratic driver)
# ---------------------------------------------------------------------------


def cole_hopf_oracle(scenario, engine=None):
    """Ground truth for ``n = 1``, ``f = gamma/2 |z|^2`` on the binomial grid.

    Returns ``(Y0_unreflected, Y0_reflected)`` where

        Y0_unreflected = (1/gamma) log E[exp(gamma g(W_T))]
        Y0_reflected   = (1/gamma) log V_0,  V_M = e^{gamma g},
                         V_m = max(e^{gamma h(t_m)}, E_m V_{m+1}),

    both evaluated in log space on an independently constructed grid.
    """
    gen = scenario.generator
    if scenario.n != 1 or not isinstance(gen, LinearQuadratic) or not gen.is_pure_quadratic():
        raise InvalidInput("cole_hopf_oracle needs n=1 and a purely quadratic driver (a=c=b=0, gamma>0)")
    if engine is not None and engine.kind != "lattice":
        raise UnsupportedEngine("cole_hopf_oracle is defined on the lattice only")
    gamma = float(gen.gamma[0])
    d, M, T = scenario.d, scenario.steps, scenario.T
    h = np.sqrt(T / M)

    def grid(m):
        j = (2 * np.arange(m + 1) - m) * h
        mesh = np.meshgrid(*([j] * d), indexing="ij")
        return np.stack([x.reshape(-1) for x in mesh], axis=-1)

    gT = scenario.terminal(grid(M))[:, 0]
    logp = binom.logpmf(np.arange(M + 1), M, 0.5)
    logw = sum(np.meshgrid(*([logp] * d), indexing="ij")).reshape(-1)
    unreflected = logsumexp(gamma * gT + logw) / gamma

    L = (gamma * gT).reshape((M + 1,) * d)
    shifts = list(itertools.product((0, 1), repeat=d))
    for m in range(M - 1, -1, -1):
        parts = [L[tuple(slice(s, s + m + 1) for s in shift)] for shift in shifts]
        cont = logsumexp(np.stack(parts), axis=0) - d * np.log(2.0)
        barrier = gamma * scenario.barrier(m * T / M, grid(m))[:, 0].reshape((m + 1,) * d)
        L = np.maximum(barrier, cont)
    reflected = float(L.reshape(-1)[0]) / gamma
    return float(unreflected), reflected


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------


@dataclass
class ComparisonReport:
    max_violation: float
    per_k: dict
    limit_violation: float
    location: dict | None
    tol: float = 1e-9
    hypotheses: dict | None = None

    @property
    def passed(self):
        return self.max_violation <= self.tol


def compare_runs(run_a, run_b, tol=1e-9, hypotheses=None):
    """Largest ``(Y_A - Y_B)^+`` over every schedule level, layer and node.

    ``run_b`` is the run whose data dominate. ``hypotheses`` is an optional
    record (e.g. from :func:`check_comparison_hypotheses`) stored in the report.
    """
    sa, sb = run_a.scenario, run_b.scenario
    if (sa.n, sa.d, sa.steps) != (sb.n, sb.d, sb.steps) or not np.isclose(sa.T, sb.T):
        raise InvalidInput("compare_runs needs identical (n, d, T, steps)")
    if run_a.engine.kind != run_b.engine.kind:
        raise InvalidInput("compare_runs needs the same engine kind")
    if not np.allclose(run_a.ks, run_b.ks, rtol=0, atol=0):
        raise InvalidInput("compare_runs needs identical penalty schedules")
    per_k = {}
    worst, loc = 0.0, None
    for ea, eb in zip(run_a.entries, run_b.entries):
        v, where = _worst([np.maximum(ya - yb, 0.0) for ya, yb in zip(ea.solution.Y, eb.solution.Y)])
        per_k[ea.k] = v
        if v > worst:
            worst, loc = v, {"k": ea.k, **where}
    lim, _ = _worst([np.maximum(ya - yb, 0.0) for ya, yb in zip(run_a.limit.Y, run_b.limit.Y)])
    return ComparisonReport(max(worst, lim), per_k, lim, loc, tol, hypotheses)


def check_comparison_hypotheses(scn_a, scn_b, seed=0, tol=1e-12):
    """Spot-check ``xi <= xibar``, ``S <= Sbar`` and the driver ordering on samples."""
    samples = default_samples(scn_b, seed=seed)
    W = np.stack([np.atleast_1d(w) for _, w in samples["states"]])
    ts = np.array([t for t, _ in samples["states"]])
    xi = float(np.min(scn_b.terminal(W) - scn_a.terminal(W)))
    sgap = np.inf
    for t in np.unique(ts):
        sel = ts == t
        sgap = min(sgap, float(np.min(scn_b.barrier(t, W[sel]) - scn_a.barrier(t, W[sel]))))
    fgap = np.inf
    rng = np.random.default_rng(seed)
    n, d = scn_a.n, scn_a.d
    for _ in range(256):
        t = float(rng.uniform(0, scn_a.T))
        y = rng.uniform(-3, 3, size=n)
        ybar = y + np.abs(rng.standard_normal(n))
        z = rng.standard_normal((n, d))
        for i in range(n):
            yb = ybar.copy()
            yb[i] = y[i]
            fa = scn_a.generator(t, y[None], z[None])[0, i]
            fb = scn_b.generator(t, yb[None], z[None])[0, i]
            fgap = min(fgap, float(fb - fa))
    margins = {"terminal": xi, "barrier": sgap, "driver": fgap}
    return {"passed": all(v >= -tol for v in margins.values()), "margins": margins}


# ---------------------------------------------------------------------------
# Uniform-bound diagnostics
# ---------------------------------------------------------------------------


def bmo_estimate(sol, engine):
    """``max_{m, node} E_m[sum_{m' >= m} |Z^i_{m'}|^2 dt]`` per component (lattice only)."""
    if engine.kind != "lattice":
        raise UnsupportedEngine("bmo_estimate is defined on the lattice engine only")
    dt = engine.dt
    M = sol.steps
    B = np.zeros_like(sol.Y[M])
    worst = np.zeros(sol.n)
    for m in range(M - 1, -1, -1):
        B = np.sum(sol.Z[m] ** 2, axis=-1) * dt + engine.cond_exp(m, B)
        worst = np.maximum(worst, B.max(axis=0))
    return worst


def bmo_at_origin(sol, engine):
    """``E[sum_m |Z_m|^2 dt]`` by direct weighted summation per layer (cross-check)."""
    return sum(engine.expectation(m, np.sum(z**2, axis=-1)) * engine.dt for m, z in enumerate(sol.Z))


def k_moment(sol, p, engine):
    """``E[(K_T^i)^p]^(1/p)`` per component.

    On the lattice ``K_T`` is path dependent, so integer moments are propagated
    backwards: ``R^q_m = sum_l C(q, l) dK_m^(q-l) E_m[R^l_{m+1}]`` with
    ``R^q_m = E_m[(K_T - K_m)^q]``.
    """
    if p < 2:
        raise InvalidInput("k_moment needs p >= 2")
    if engine.kind != "lattice":
        KT = sum(sol.dK)
        return np.mean(KT**p, axis=0) ** (1.0 / p)
    if p != int(p):
        raise InvalidInput("lattice k_moment needs an integer p")
    p = int(p)
    M = sol.steps
    size_M = sol.Y[M].shape
    R = [np.ones(size_M)] + [np.zeros(size_M) for _ in range(p)]
    for m in range(M - 1, -1, -1):
        cond = [engine.cond_exp(m, r) for r in R]
        dk = sol.dK[m]
        R = [sum(comb(q, l) * dk ** (q - l) * cond[l] for l in range(q + 1)) for q in range(p + 1)]
    return np.maximum(R[p][0], 0.0) ** (1.0 / p)


def delta_increase(run):
    """Largest increase in the sup-norm delta sequence, ignoring its first term."""
    deltas = [e.metrics["delta"] for e in run.entries[1:]][1:]
    return float(max([b - a for a, b in zip(deltas[:-1], deltas[1:])] + [0.0]))


def ratio(values):
    """``max / min`` of a positive sequence; all-zero sequences give 1."""
    v = np.asarray(values, dtype=float)
    hi, lo = np.max(v), np.min(v)
    if hi == 0:
        return 1.0
    if lo <= 0:
        return np.inf
    return float(hi / lo)


def uniform_bounds(run, tol_ratio=2.0):
    """Max/min ratios across the schedule of sup|Y|, the BMO surrogate and E[K_T^2]^(1/2)."""
    ms = [e.metrics for e in run.entries]
    out = {
        "sup_Y": ratio([m["sup_Y"] for m in ms]),
        "KT_p2": max(ratio([m["KT_p2"][i] for m in ms]) for i in range(run.scenario.n)),
        "clamp_warnings": int(sum(m["clamp_count"] for m in ms)),
        "clamp_bound_respected": bool(all(m["sup_Y"] <= run.scenario.clamp_bound for m in ms)),
    }
    if all(m["bmo"] is not None for m in ms):
        out["bmo"] = max(ratio([m["bmo"][i] for m in ms]) for i in range(run.scenario.n))
    return out


# ---------------------------------------------------------------------------
# Grid refinement
# ---------------------------------------------------------------------------


def grid_refinement(scenario, factors=(1, 2, 4), solver="direct"):
    """Y0 on successively refined grids and the refinement predicate
    ``|Y0(M) - Y0(2M)| <= 2 |Y0(2M) - Y0(4M)| + 1e-6``."""
    from .solver import build_engine, solve_direct_reflected, solve_penalized

    values = []
    for f in factors:
        scn = scenario.replace(steps=scenario.steps * f)
        eng = build_engine(scn)
        if solver == "direct":
            sol = solve_direct_reflected(scn, eng)
        else:
            sol = solve_penalized(scn, scenario.penalty_schedule.k_max, eng)
        values.append(sol.Y0)
    values = np.array(values)
    d1 = np.abs(values[0] - values[1])
    d2 = np.abs(values[1] - values[2])
    return {"Y0": values.tolist(), "diffs": [d1.tolist(), d2.tolist()],
            "holds": bool(np.all(d1 <= 2 * d2 + 1e-6))}


# ---------------------------------------------------------------------------
# Full check battery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Tolerances:
    monotone: float = 1e-10
    domination: float = 1e-10
    shortfall: float = 1e-2
    skorokhod: float = 1e-3
    contact: float = 1e-3
    flat: float = 1e-3
    ratio: float = 2.0
    uniqueness: float = 1e-9

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not (v > 0):
                raise InvalidInput(f"tolerance {k} must be positive, got {v}")


def verify_run(run, tolerances=None, direct=None, uniqueness=True):
    """Run every applicable check on a :class:`~rbsde.reflection.PenaltyRun`."""
    from .reflection import barrier_shortfall, skorokhod_residual, uniqueness_probe
    from .solver import solve_direct_reflected

    tol = tolerances or Tolerances()
    scn, eng = run.scenario, run.engine
    lattice = eng.kind == "lattice"
    k_max = run.ks[-1]
    rep = VerificationReport(scn.fingerprint())
    checks = rep.checks

    for a in scn.assumptions:
        checks.append(Check(f"assumption:{a.name}", "pass" if a.passed else "fail", a.worst, None,
                            None if a.passed else {"witness": str(a.witness)}, a.message))

    if direct is None:
        direct = solve_direct_reflected(scn, eng)

    if lattice:
        worst, loc = 0.0, None
        for a, b in zip(run.entries[:-1], run.entries[1:]):
            v, where = _worst([np.maximum(ya - yb, 0.0) for ya, yb in zip(a.solution.Y, b.solution.Y)])
            if v > worst:
                worst, loc = v, {"k": a.k, **where}
        checks.append(make_check("monotone_in_k", worst, tol.monotone, loc))
        checks.append(make_check("delta_nonincreasing", delta_increase(run), tol.monotone, advisory=True,
                                 note="sup-norm deltas after the first one"))
        v, loc = _worst([np.maximum(ya - yb, 0.0) for ya, yb in zip(run.limit.Y, direct.Y)])
        checks.append(make_check("dominated_by_direct", v, tol.domination, loc))
    else:
        for name in ("monotone_in_k", "delta_nonincreasing", "dominated_by_direct"):
            checks.append(skipped(name, "regression expectations are not monotone"))

    sf = barrier_shortfall(run.limit)
    v, loc = _worst([np.maximum(s - y, 0.0) for y, s in zip(run.limit.Y, run.limit.S)])
    checks.append(make_check("barrier_shortfall", sf, tol.shortfall, loc))
    checks.append(make_check("skorokhod_limit", skorokhod_residual(run.limit, eng), tol.skorokhod))
    checks.append(make_check("skorokhod_direct", skorokhod_residual(direct, eng), 0.0,
                             ok=bool(np.all(skorokhod_residual(direct, eng) == 0.0))))

    gap_tol = max(1e-2, 3.0 / k_max)
    gap, loc = representation_gap(optimal_stopping_value(run.limit, scn, eng), run.limit, with_location=True)
    checks.append(make_check("representation_gap", gap, gap_tol, loc))
    checks.append(hitting_time_check(run.limit, eng, tol.contact, tol.flat))

    gen = scn.generator
    if scn.n == 1 and isinstance(gen, LinearQuadratic) and gen.is_pure_quadratic():
        if lattice:
            _, refl = cole_hopf_oracle(scn, eng)
            err = abs(float(run.limit.Y0[0]) - refl)
            checks.append(make_check("cole_hopf", err, max(5e-3, 3.0 / k_max),
                                     note=f"oracle {refl:.8f}, solver {float(run.limit.Y0[0]):.8f}"))
        else:
            checks.append(skipped("cole_hopf", "unsupported engine"))

    ub = uniform_bounds(run, tol.ratio)
    checks.append(make_check("sup_Y_bound", float(max(e.metrics["sup_Y"] for e in run.entries)),
                             scn.clamp_bound))
    checks.append(make_check("sup_Y_ratio", ub["sup_Y"], tol.ratio, advisory=True))
    checks.append(make_check("KT_p2_ratio", ub["KT_p2"], tol.ratio, advisory=True))
    if "bmo" in ub:
        checks.append(make_check("bmo_ratio", ub["bmo"], tol.ratio, advisory=True))
    else:
        checks.append(skipped("bmo_ratio", "unsupported engine"))
    checks.append(make_check("clamp_warnings", ub["clamp_warnings"], 0.0,
                             ok=ub["clamp_warnings"] == 0))

    if uniqueness:
        u = uniqueness_probe(scn, eng, tol=tol.uniqueness, base=run)
        checks.append(make_check("uniqueness", u.max_discrepancy, tol.uniqueness,
                                 note=str(u.per_perturbation)))
    return rep
