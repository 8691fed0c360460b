"""Rank decompositions of set functions into pi-supermodular / submodular cones."""
from .errors import (ConvergenceError, DomainError, SizeGuardError, SubrankError,
                     UndefinedValueError)
from .lattice import SetFunctionTable, restrict, restricted

__version__ = "0.1.0"
