"""purcellsim: simulation and analysis of a Purcell-enhanced quantum-dot--cavity
single-photon source.

Submodules:
    hilbert      truncated emitter (x) cavity spaces, operators, states
    dynamics     driven Lindblad master equation, pulse calibration, scans
    trajectories Monte Carlo wavefunction photon statistics
    cavityqed    closed-form Purcell/coupling/visibility-budget relations
    analysis     curve fitting and correction procedures
    scenarios    named end-to-end runs writing CSV/JSON results
    cli          command-line interface (run / list / validate)
"""

__version__ = "0.1.0"

from . import analysis, cavityqed, constants, dynamics, hilbert, trajectories
from .dynamics import DriveField, SystemParams, default_system_params, evolve
from .hilbert import DensityMatrix, PureState, SystemSpace, build_system_operators
from .trajectories import TrajectoryConfig, simulate_ensemble

__all__ = [
    "__version__",
    "analysis",
    "cavityqed",
    "constants",
    "dynamics",
    "hilbert",
    "trajectories",
    "DriveField",
    "SystemParams",
    "default_system_params",
    "evolve",
    "DensityMatrix",
    "PureState",
    "SystemSpace",
    "build_system_operators",
    "TrajectoryConfig",
    "simulate_ensemble",
]
