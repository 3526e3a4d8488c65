"""Finite-difference schemes for Hamilton-Jacobi equations with state constraints.

The package compares the classical state-constraint closure with a
flux-limited closure at the boundary, and checks both against a
dynamic-programming oracle in one dimension.
"""

from .errors import HJFluxError
from .geometry import Domain
from .hamiltonian import FluxLimiter, Hamiltonian
from .solver import BCMode, ProblemSpec, SolveReport, discretize, solve, solve_evolution, solve_stationary

__version__ = "0.1.0"

__all__ = [
    "BCMode",
    "Domain",
    "FluxLimiter",
    "HJFluxError",
    "Hamiltonian",
    "ProblemSpec",
    "SolveReport",
    "discretize",
    "solve",
    "solve_evolution",
    "solve_stationary",
]
