"""Fractal-time nonlocal Fisher-KPP equation: F^alpha calculus, moment dynamics,
quasiparticle asymptotics and a direct reference solver."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AlignmentError,
    ConfigError,
    DegenerateStencilError,
    DivergenceError,
    DomainError,
    EvaluationError,
    FractalKPPError,
    ResolutionError,
    ResourceError,
)
from .fractal_set import CantorPrefractal, build_prefractal, coarse_grained_mass, indicator, staircase  # noqa: F401
from .calculus import FractalGrid, SampledFunction, falpha_derivative, falpha_integral  # noqa: F401
from .flees import ModelParams, MomentTrajectory, solve_flees  # noqa: F401
from .spatial import SpatialGrid  # noqa: F401
from .asymptotics import QuasiparticleSolution, SolutionField, assemble  # noqa: F401
from .reference import PdeConfig, compare, solve_direct  # noqa: F401
