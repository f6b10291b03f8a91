"""Stochastic Allen-Cahn simulation with Wiener and Poisson jump noise under a
logarithmic double-well potential."""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, SolverError, StepFailure  # noqa: E402
from .jumps import JumpBatch, JumpConfig  # noqa: E402
from .mesh import Mesh, build_mesh  # noqa: E402
from .potential import PotentialSplit, YosidaView, free_energy  # noqa: E402
from .stepper import RunRecord, SchemeConfig, imex_step, initial_datum, run_realization  # noqa: E402
from .wiener import WienerConfig  # noqa: E402

__all__ = [
    "ConfigError", "DomainError", "SolverError", "StepFailure",
    "JumpBatch", "JumpConfig", "Mesh", "build_mesh", "PotentialSplit", "YosidaView",
    "free_energy", "RunRecord", "SchemeConfig", "imex_step", "initial_datum",
    "run_realization", "WienerConfig",
]
