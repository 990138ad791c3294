"""Penalization solver and property checks for multi-dimensional reflected BSDEs
with diagonally quadratic drivers."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AssumptionError,
    ConfigError,
    InvalidInput,
    NonConvergence,
    RBSDEError,
    RegressionError,
    ResourceError,
    UnsupportedEngine,
)
from .lattice import Lattice, build_lattice  # noqa: F401
from .mc import MonteCarloEngine, PathBundle, RegressionBasis, simulate_paths  # noqa: F401
from .model import (  # noqa: F401
    ClampedAffineBarrier,
    ClampedAffineTerminal,
    EngineConfig,
    LinearQuadratic,
    PenaltySchedule,
    Scenario,
)
from .reflection import PenaltyRun, run_penalty_schedule  # noqa: F401
from .scenarios import bundled, load_scenario  # noqa: F401
from .solver import DiscreteSolution, build_engine, solve_direct_reflected, solve_penalized  # noqa: F401
