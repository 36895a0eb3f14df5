"""Simulation of a one-step multi-target controlled-phase gate on cat-state qubits.

A transmon qutrit is dispersively coupled to n cavities; cavity 1 holds the
control qubit and cavities 2..n the targets.
"""
from .params import PhysicalParams, DerivedParams, derive, paper_operating_point
from .operators import HilbertLayout, SparseOperator, StateVector, DensityMatrix
from .lindblad import DissipationSpec, IntegratorConfig, NumericalAbort, evolve, fidelity

__version__ = "0.1.0"

__all__ = [
    "PhysicalParams", "DerivedParams", "derive", "paper_operating_point",
    "HilbertLayout", "SparseOperator", "StateVector", "DensityMatrix",
    "DissipationSpec", "IntegratorConfig", "NumericalAbort", "evolve", "fidelity",
]
