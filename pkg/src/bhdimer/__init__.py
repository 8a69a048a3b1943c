"""Collective tunnelling of N interacting bosons in a two-site Bose-Hubbard dimer."""

from .errors import NumericalError, PerturbativeValidityWarning
from .model import (
    CouplingSchedule,
    EnergyLadder,
    ResonantPair,
    SystemParams,
    coupling,
    energy,
    energy_ladder,
    hamiltonian_matrix,
    resonant_pairs,
    unpaired_state,
)
from .dynamics import (
    ProbabilityTrace,
    StateVector,
    mean_population_difference,
    propagate,
    propagate_spectral,
)
from .rabi import RabiPrediction, detuning, omega_asymmetric, omega_symmetric, predict

__version__ = "0.1.0"
