"""Interaction-picture Hamiltonians as sums of phase-modulated sparse terms.

A term ``(op, omega, add_hc)`` contributes ``exp(i omega t) op`` and, when
``add_hc`` is set, its Hermitian conjugate ``exp(-i omega t) op^dag``.  The
exponent sign stored is the one appearing in front of ``op`` in the model
equations, so ``g1 (exp(-i delta1 t) a1 sigma+_eg + h.c.)`` is stored with
``omega = -delta1``.  All rates and frequencies are angular (rad/ns).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .operators import (
    HilbertLayout,
    SparseOperator,
    cavity_annihilation,
    cavity_number,
    embed,
    qutrit_op,
    qutrit_projector,
)
from .params import DerivedParams, ConfigError, ghz_to_angular, mhz_to_angular


@dataclass(frozen=True)
class Term:
    op: SparseOperator
    omega: float = 0.0
    add_hc: bool = True


@dataclass(frozen=True)
class ModulatedHamiltonian:
    layout: HilbertLayout
    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            if term.op.layout != self.layout:
                raise ValueError("term layout does not match Hamiltonian layout")

    def __add__(self, other: "ModulatedHamiltonian") -> "ModulatedHamiltonian":
        if other.layout != self.layout:
            raise ValueError("layout mismatch")
        return ModulatedHamiltonian(self.layout, self.terms + other.terms)

    @property
    def n_summands(self) -> int:
        """Operator summands after expanding the Hermitian conjugates."""
        return sum(2 if t.add_hc else 1 for t in self.terms)

    def at(self, t: float) -> SparseOperator:
        n = self.layout.total_dim
        total = sp.csr_matrix((n, n), dtype=np.complex128)
        for term in self.terms:
            phase = np.exp(1j * term.omega * t)
            total = total + phase * term.op.matrix
            if term.add_hc:
                total = total + np.conj(phase) * term.op.matrix.conj().T
        return SparseOperator(self.layout, total)

    def dense(self, t: float) -> np.ndarray:
        return self.at(t).toarray()

    def is_hermitian(self, t: float, atol: float = 1e-12) -> bool:
        h = self.at(t).matrix
        diff = h - h.conj().T
        return diff.nnz == 0 or float(np.max(np.abs(diff.data))) <= atol

    def compile(self, extra: SparseOperator | None = None) -> "CompiledHamiltonian":
        return CompiledHamiltonian.build(self, extra)


class CompiledHamiltonian:
    """All summands scattered onto one shared CSR pattern.

    ``data_at(t)`` returns the CSR data vector of ``H(t) + extra`` as a single
    small matrix-vector product; the pattern never changes.
    """

    def __init__(self, n, indptr, indices, stack, omegas, conj_rows):
        self.n = n
        self.indptr = indptr
        self.indices = indices
        self.stack = stack
        self.omegas = omegas
        self.conj_rows = conj_rows

    @classmethod
    def build(cls, h: ModulatedHamiltonian, extra: SparseOperator | None = None):
        n = h.layout.total_dim
        mats, omegas, conj_rows = [], [], []
        for term in h.terms:
            mats.append(term.op.matrix)
            omegas.append(term.omega)
            conj_rows.append(False)
            if term.add_hc:
                mats.append(term.op.matrix.conj().T.tocsr())
                omegas.append(term.omega)
                conj_rows.append(True)
        if extra is not None:
            mats.append(extra.matrix)
            omegas.append(0.0)
            conj_rows.append(False)
        coos = [m.tocoo() for m in mats]
        if coos:
            keys = np.unique(np.concatenate([c.row.astype(np.int64) * n + c.col for c in coos]))
        else:
            keys = np.zeros(0, dtype=np.int64)
        rows, cols = np.divmod(keys, n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        indptr = np.cumsum(indptr)
        stack = np.zeros((len(mats), len(keys)), dtype=np.complex128)
        for k, c in enumerate(coos):
            pos = np.searchsorted(keys, c.row.astype(np.int64) * n + c.col)
            np.add.at(stack[k], pos, c.data)
        return cls(n, indptr, cols.astype(np.int64), stack,
                   np.asarray(omegas, dtype=float), np.asarray(conj_rows, dtype=bool))

    @property
    def nnz(self) -> int:
        return self.stack.shape[1]

    def coefficients(self, t: float) -> np.ndarray:
        c = np.exp(1j * self.omegas * t)
        return np.where(self.conj_rows, np.conj(c), c)

    def data_at(self, t: float, out: np.ndarray | None = None) -> np.ndarray:
        return np.matmul(self.coefficients(t), self.stack, out=out)

    def matrix_at(self, t: float) -> sp.csr_matrix:
        return sp.csr_matrix((self.data_at(t), self.indices, self.indptr), shape=(self.n, self.n))


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _cavities(layout: HilbertLayout, d: DerivedParams) -> int:
    n = layout.n_cavities
    if len(d.g) != n:
        raise ConfigError(f"couplings resolved for {len(d.g)} cavities, layout has {n}")
    return n


def build_interaction(d: DerivedParams, layout: HilbertLayout) -> ModulatedHamiltonian:
    """Wanted couplings: cavity 1 on g-e, cavities 2..n on e-f."""
    if not d.g:
        raise ConfigError("couplings unresolved; run params.derive first")
    n = _cavities(layout, d)
    s_eg = qutrit_op(layout, "g", "e")
    s_fe = qutrit_op(layout, "e", "f")
    terms = [Term(mhz_to_angular(d.g[0]) * (cavity_annihilation(layout, 1) @ s_eg),
                  -ghz_to_angular(d.delta1))]
    for l in range(2, n + 1):
        op = mhz_to_angular(d.g[l - 1]) * (cavity_annihilation(layout, l) @ s_fe)
        terms.append(Term(op, ghz_to_angular(d.delta_l[l - 2])))
    return ModulatedHamiltonian(layout, terms)


def build_unwanted(d: DerivedParams, layout: HilbertLayout) -> ModulatedHamiltonian:
    """Cavity 1 on e-f and cavities 2..n on g-e."""
    n = _cavities(layout, d)
    s_eg = qutrit_op(layout, "g", "e")
    s_fe = qutrit_op(layout, "e", "f")
    terms = [Term(mhz_to_angular(d.g_tilde[0]) * (cavity_annihilation(layout, 1) @ s_fe),
                  -ghz_to_angular(d.delta1_tilde))]
    for l in range(2, n + 1):
        op = mhz_to_angular(d.g_tilde[l - 1]) * (cavity_annihilation(layout, l) @ s_eg)
        terms.append(Term(op, ghz_to_angular(d.delta_l_tilde[l - 2])))
    return ModulatedHamiltonian(layout, terms)


def build_crosstalk(d: DerivedParams, layout: HilbertLayout) -> ModulatedHamiltonian:
    """Photon hopping ``g_kl a_k a_l^dag``, one term per unordered pair."""
    n = _cavities(layout, d)
    g = mhz_to_angular(d.g_kl)
    terms = []
    for k, l in combinations(range(1, n + 1), 2):
        op = g * (cavity_annihilation(layout, k) @ cavity_annihilation(layout, l).dag())
        terms.append(Term(op, -ghz_to_angular(d.Delta_tilde_kl[(k, l)])))
    return ModulatedHamiltonian(layout, terms)


def build_full(d: DerivedParams, layout: HilbertLayout, *, unwanted: bool = True,
               crosstalk: bool = True) -> ModulatedHamiltonian:
    h = build_interaction(d, layout)
    if unwanted:
        h = h + build_unwanted(d, layout)
    if crosstalk:
        h = h + build_crosstalk(d, layout)
    return h


class EffectiveMode(str, Enum):
    REDUCED = "reduced"
    DISPERSIVE_FULL = "dispersive_full"


def h0_and_hint(d: DerivedParams, layout: HilbertLayout) -> tuple[SparseOperator, SparseOperator]:
    """Cavity-only split: Stark term on cavity 1 and the cross-Kerr sum."""
    n = _cavities(layout, d)
    n1 = cavity_number(layout, 1)
    h0 = mhz_to_angular(d.lambda1) * n1
    hint = SparseOperator.zero(layout)
    for l in range(2, n + 1):
        hint = hint - mhz_to_angular(d.chi_1l[l - 2]) * (n1 @ cavity_number(layout, l))
    return h0, hint


def build_effective(d: DerivedParams, layout: HilbertLayout,
                    mode: EffectiveMode | str = EffectiveMode.REDUCED) -> ModulatedHamiltonian:
    mode = EffectiveMode(mode)
    n = _cavities(layout, d)
    pg = embed(0, qutrit_projector("g"), layout)
    h0, hint = h0_and_hint(d, layout)
    if mode is EffectiveMode.REDUCED:
        return ModulatedHamiltonian(layout, [Term((h0 + hint) @ pg, 0.0, add_hc=False)])

    pe = embed(0, qutrit_projector("e"), layout)
    pf = embed(0, qutrit_projector("f"), layout)
    a = {l: cavity_annihilation(layout, l) for l in range(1, n + 1)}
    num = {l: cavity_number(layout, l) for l in range(1, n + 1)}
    anti = {l: a[l] @ a[l].dag() for l in a}

    lam1 = mhz_to_angular(d.lambda1)
    static = lam1 * (num[1] @ pg - anti[1] @ pe)
    for l in range(2, n + 1):
        lam = mhz_to_angular(d.lambda_l[l - 2])
        chi = mhz_to_angular(d.chi_1l[l - 2])
        static = static - lam * (num[l] @ pe - anti[l] @ pf)
        static = static + chi * (anti[1] @ anti[l] @ pf - num[1] @ num[l] @ pg)
    terms = [Term(static, 0.0, add_hc=False)]
    for k, l in combinations(range(2, n + 1), 2):
        lam_kl = mhz_to_angular(d.lambda_kl[(k, l)])
        # Delta_kl = |delta_l| - |delta_k|
        Dkl = ghz_to_angular(abs(d.delta_l[l - 2]) - abs(d.delta_l[k - 2]))
        terms.append(Term(lam_kl * (a[k].dag() @ a[l] @ (pf - pe)), Dkl))
    return ModulatedHamiltonian(layout, terms)


def excitation_number(layout: HilbertLayout) -> SparseOperator:
    """Total photons plus 0/1/2 for g/e/f."""
    diag = layout.occupations(0).astype(float)
    for l in range(1, layout.n_cavities + 1):
        diag = diag + layout.occupations(l)
    return SparseOperator(layout, sp.diags(diag))
