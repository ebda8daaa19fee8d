"""Self-similar lifting profiles of the thin-film equation."""

from .model import (
    PhaseState,
    ProblemConfig,
    ProfileState,
    Region,
    RegionTag,
    alpha,
    classify,
    energy_E1,
    energy_E2,
    from_phase,
    phase_rhs,
    rhs_physical,
    to_phase,
)
from .integrate import (
    SeedExpansion,
    TerminalEvent,
    Trajectory,
    evolution_snapshots,
    integrate,
    seed,
)

__version__ = "0.1.0"

__all__ = [
    "PhaseState",
    "ProblemConfig",
    "ProfileState",
    "Region",
    "RegionTag",
    "SeedExpansion",
    "TerminalEvent",
    "Trajectory",
    "alpha",
    "classify",
    "energy_E1",
    "energy_E2",
    "evolution_snapshots",
    "from_phase",
    "integrate",
    "phase_rhs",
    "rhs_physical",
    "seed",
    "to_phase",
    "__version__",
]
