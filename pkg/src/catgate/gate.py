"""Exact dissipation-free gate: diagonal Fock-space unitaries and truth tables."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .cats import bits_of, phase_signs
from .hamiltonians import h0_and_hint
from .operators import HilbertLayout, SparseOperator, StateVector
from .params import DerivedParams, mhz_to_angular, us_to_ns


@dataclass(frozen=True)
class DiagonalUnitary:
    layout: HilbertLayout
    phases: np.ndarray

    def __post_init__(self):
        ph = np.asarray(self.phases, dtype=np.complex128)
        if ph.shape != (self.layout.total_dim,):
            raise ValueError("phase vector length does not match layout")
        if np.max(np.abs(np.abs(ph) - 1)) > 1e-12:
            raise ValueError("diagonal unitary entries must have modulus 1")
        object.__setattr__(self, "phases", ph)

    def __mul__(self, other: "DiagonalUnitary") -> "DiagonalUnitary":
        if other.layout != self.layout:
            raise ValueError("layout mismatch")
        return DiagonalUnitary(self.layout, self.phases * other.phases)

    def apply(self, psi: StateVector) -> StateVector:
        return StateVector(psi.layout, self.phases * psi.amplitudes)


def u1(lambda1: float, t: float, layout: HilbertLayout) -> DiagonalUnitary:
    """``exp(-i lambda1 n_1 t)``; ``lambda1`` in rad/ns, ``t`` in ns."""
    m1 = layout.occupations(1)
    return DiagonalUnitary(layout, np.exp(-1j * lambda1 * t * m1))


def u1l(chi: float, t: float, l: int, layout: HilbertLayout) -> DiagonalUnitary:
    """``exp(+i chi n_1 n_l t)`` between the control and target cavity ``l``."""
    if not 2 <= l <= layout.n_cavities:
        raise ValueError(f"target cavity must be in 2..{layout.n_cavities}, got {l}")
    m1 = layout.occupations(1)
    ml = layout.occupations(l)
    return DiagonalUnitary(layout, np.exp(1j * chi * t * m1 * ml))


def full_gate(d: DerivedParams, layout: HilbertLayout, t_ns: float | None = None) -> DiagonalUnitary:
    """Product of the Stark and cross-Kerr unitaries at the gate time."""
    T = us_to_ns(d.gate_time) if t_ns is None else t_ns
    lam1 = mhz_to_angular(d.lambda1)
    chis = [mhz_to_angular(c) for c in d.chi_1l]
    off = [abs(lam1 * T - 2 * math.pi)] + [abs(c * T - math.pi) for c in chis]
    if max(off) > 1e-9:
        warnings.warn(f"timing condition violated by {max(off):.3g} rad", RuntimeWarning,
                      stacklevel=2)
    gate = u1(lam1, T, layout)
    for l, chi in enumerate(chis, start=2):
        gate = gate * u1l(chi, T, l, layout)
    return gate


def logical_truth_table(n: int) -> dict[tuple[int, ...], int]:
    if n < 2:
        raise ValueError("need a control and at least one target")
    return {bits_of(k, n): int(s) for k, s in enumerate(phase_signs(n))}


def verify_commutation(d: DerivedParams, layout: HilbertLayout,
                       perturbation: SparseOperator | None = None) -> float:
    """Max-norm of [H0, H_int]; ``perturbation`` is added to H_int (negative control)."""
    h0, hint = h0_and_hint(d, layout)
    if perturbation is not None:
        hint = hint + perturbation
    comm = (h0 @ hint - hint @ h0).matrix
    return float(np.max(np.abs(comm.data))) if comm.nnz else 0.0
