import numpy as np
import pytest

from rbsde.model import (
    ClampedAffineBarrier,
    ClampedAffineTerminal,
    EngineConfig,
    LinearQuadratic,
    PenaltySchedule,
    Scenario,
)


def clamp_terminal(n=1, d=1, lo=-1.0, hi=1.0):
    """g(w) = clamp(w_1, lo, hi) on every component."""
    beta = np.zeros((n, d))
    beta[:, 0] = 1.0
    return ClampedAffineTerminal(alpha=np.zeros(n), beta=beta, lower=np.full(n, lo), upper=np.full(n, hi))


def min_barrier(level, shift, n=1, d=1):
    """h(t, w) = min(level, w_1 - shift)."""
    beta = np.zeros((n, d))
    beta[:, 0] = 1.0
    return ClampedAffineBarrier(alpha=np.full(n, -shift), beta=beta, cap=np.full(n, level))


def make_scenario(n=1, d=1, T=1.0, steps=40, generator=None, barrier=None, terminal=None, count=8,
                  engine="lattice", **engine_kw):
    generator = generator if generator is not None else LinearQuadratic.zero(n, d)
    barrier = barrier if barrier is not None else ClampedAffineBarrier.constant([-10.0] * n, d)
    terminal = terminal if terminal is not None else clamp_terminal(n, d)
    return Scenario(n=n, d=d, T=T, steps=steps, generator=generator, barrier=barrier, terminal=terminal,
                    penalty_schedule=PenaltySchedule(1.0, 2.0, count),
                    engine_config=EngineConfig(engine=engine, **engine_kw))


@pytest.fixture
def inactive():
    return make_scenario()


@pytest.fixture
def active_quadratic():
    return make_scenario(generator=LinearQuadratic.quadratic([1.0]), barrier=min_barrier(0.9, 0.0), steps=50)


@pytest.fixture
def active_zero():
    return make_scenario(barrier=min_barrier(0.5, 0.2), steps=50)


@pytest.fixture
def coupled():
    gen = LinearQuadratic(a=[0.0, 0.0], c=[[0.0, 0.5], [0.5, 0.0]], b=[[0.0], [0.0]], gamma=[0.5, 1.0])
    barrier = ClampedAffineBarrier(alpha=[-0.3, -0.4], beta=[[1.0], [-1.0]], cap=[0.4, 0.3])
    terminal = ClampedAffineTerminal(alpha=[0.0, 0.0], beta=[[1.0], [-1.0]], xi_max=1.0)
    return make_scenario(n=2, generator=gen, barrier=barrier, terminal=terminal, steps=40, count=6)
