"""Simulation and numerics for invariant sets of random permutations."""
from .errors import CapacityError, DomainError, ResourceError
from .permlab import CONSTANTS, i_nk_exact, i_nk_mc, pk_exact_small, pk_mc
from .rngkit import MCEstimate, StreamSeed

__version__ = "0.1.0"

__all__ = [
    "CONSTANTS", "CapacityError", "DomainError", "MCEstimate", "ResourceError", "StreamSeed",
    "i_nk_exact", "i_nk_mc", "pk_exact_small", "pk_mc",
]
