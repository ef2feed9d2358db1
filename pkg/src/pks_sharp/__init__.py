"""Phase-separation simulator for congested chemotaxis and its interface-law
diagnostics toolkit."""

__version__ = "0.1.0"

from .diagnostics import StepRecord
from .grid import ScalarField
from .mcf_oracle import CircleSystem, FrontCurve
from .potentials import PotentialParams
from .rho_solver import MultiplierSolve, rho_of_phi
from .stepper import RunResult, SimConfig, SimState, run

__all__ = [
    "__version__",
    "CircleSystem",
    "FrontCurve",
    "MultiplierSolve",
    "PotentialParams",
    "RunResult",
    "ScalarField",
    "SimConfig",
    "SimState",
    "StepRecord",
    "rho_of_phi",
    "run",
]
