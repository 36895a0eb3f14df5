"""Composite Hilbert space, sparse operators and the dense state containers.

Basis convention (used everywhere in the package): a basis index enumerates
``|q> (x) |m_1> (x) ... (x) |m_n>`` in row-major order over ``layout.dims``,
so the qutrit is the slowest-varying factor and cavity ``n`` the fastest.
Qutrit levels are ordered ``g=0, e=1, f=2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

QUTRIT_LEVELS = {"g": 0, "e": 1, "f": 2}


@dataclass(frozen=True)
class HilbertLayout:
    """Ordered subsystem dimensions: qutrit first, then one entry per cavity."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) < 2:
            raise ValueError("layout needs the qutrit and at least one cavity")
        if dims[0] != 3:
            raise ValueError(f"site 0 must be the qutrit (dim 3), got {dims[0]}")
        if any(d < 2 for d in dims):
            raise ValueError(f"all subsystem dimensions must be >= 2, got {dims}")

    @classmethod
    def cavities(cls, n_cavities: int, n_cut: int) -> "HilbertLayout":
        return cls((3,) + (n_cut,) * n_cavities)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_cavities(self) -> int:
        return len(self.dims) - 1

    def index(self, levels: Sequence[int]) -> int:
        """Basis index of ``|q, m_1, ..., m_n>``."""
        if len(levels) != len(self.dims):
            raise ValueError("one occupation per subsystem required")
        return int(np.ravel_multi_index(tuple(levels), self.dims))

    def occupations(self, site: int) -> np.ndarray:
        """Level of subsystem ``site`` for every basis index (read-only)."""
        return self._occupation_table[:, site]

    @cached_property
    def _occupation_table(self) -> np.ndarray:
        table = np.array(np.unravel_index(np.arange(self.total_dim), self.dims)).T
        table.flags.writeable = False
        return table


def _freeze(mat) -> sp.csr_matrix:
    mat = sp.csr_matrix(mat, dtype=np.complex128)
    mat.sum_duplicates()
    mat.sort_indices()
    for arr in (mat.data, mat.indices, mat.indptr):
        arr.flags.writeable = False
    return mat


class SparseOperator:
    """Immutable CSR operator on a :class:`HilbertLayout`.

    Construction may start from any scipy sparse format; the matrix is
    converted once to canonical CSR and its buffers are locked.
    """

    __slots__ = ("layout", "matrix")

    def __init__(self, layout: HilbertLayout, matrix):
        mat = _freeze(matrix)
        if mat.shape != (layout.total_dim, layout.total_dim):
            raise ValueError(
                f"operator shape {mat.shape} does not match layout dimension {layout.total_dim}"
            )
        self.layout = layout
        self.matrix = mat

    @classmethod
    def zero(cls, layout: HilbertLayout) -> "SparseOperator":
        return cls(layout, sp.csr_matrix((layout.total_dim, layout.total_dim)))

    @classmethod
    def identity(cls, layout: HilbertLayout) -> "SparseOperator":
        return cls(layout, sp.identity(layout.total_dim, format="csr"))

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def dag(self) -> "SparseOperator":
        return SparseOperator(self.layout, self.matrix.conj().T)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def _check(self, other: "SparseOperator"):
        if other.layout != self.layout:
            raise ValueError(f"layout mismatch: {self.layout.dims} vs {other.layout.dims}")

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            self._check(other)
            return SparseOperator(self.layout, self.matrix @ other.matrix)
        return self.matrix @ other

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        self._check(other)
        return SparseOperator(self.layout, self.matrix + other.matrix)

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        self._check(other)
        return SparseOperator(self.layout, self.matrix - other.matrix)

    def __mul__(self, scalar) -> "SparseOperator":
        return SparseOperator(self.layout, self.matrix * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SparseOperator":
        return SparseOperator(self.layout, -self.matrix)

    def __repr__(self):
        return f"SparseOperator(dims={self.layout.dims}, nnz={self.nnz})"


# ---------------------------------------------------------------------------
# single-subsystem operators
# ---------------------------------------------------------------------------

def annihilation(n_cut: int) -> sp.csr_matrix:
    """Truncated bosonic lowering operator, ``a[m-1, m] = sqrt(m)``."""
    if n_cut < 2:
        raise ValueError(f"n_cut must be >= 2, got {n_cut}")
    return _freeze(sp.diags(np.sqrt(np.arange(1, n_cut, dtype=float)), 1, shape=(n_cut, n_cut)))


def number(n_cut: int) -> sp.csr_matrix:
    if n_cut < 2:
        raise ValueError(f"n_cut must be >= 2, got {n_cut}")
    return _freeze(sp.diags(np.arange(n_cut, dtype=float), 0))


def qutrit_transition(from_level: str, to_level: str) -> sp.csr_matrix:
    """``|to><from|`` on the qutrit, e.g. ``("g", "e")`` is sigma+_eg."""
    try:
        i, j = QUTRIT_LEVELS[to_level], QUTRIT_LEVELS[from_level]
    except KeyError as exc:
        raise ValueError(f"unknown qutrit level {exc.args[0]!r}; use 'g', 'e' or 'f'") from None
    return _freeze(sp.coo_matrix(([1.0], ([i], [j])), shape=(3, 3)))


def qutrit_projector(level: str) -> sp.csr_matrix:
    return qutrit_transition(level, level)


def embed(site: int, local_op, layout: HilbertLayout) -> SparseOperator:
    """Lift a single-subsystem operator to ``I (x) ... (x) local_op (x) ... (x) I``."""
    if not 0 <= site < len(layout.dims):
        raise ValueError(f"site {site} outside layout with {len(layout.dims)} subsystems")
    local = sp.csr_matrix(local_op)
    d = layout.dims[site]
    if local.shape != (d, d):
        raise ValueError(f"local operator shape {local.shape} != ({d}, {d}) at site {site}")
    left = int(np.prod(layout.dims[:site]))
    right = int(np.prod(layout.dims[site + 1:]))
    mat = sp.kron(sp.identity(left, format="csr"), local, format="csr")
    mat = sp.kron(mat, sp.identity(right, format="csr"), format="csr")
    return SparseOperator(layout, mat)


def cavity_annihilation(layout: HilbertLayout, cavity: int) -> SparseOperator:
    """Embedded lowering operator of cavity ``cavity`` (1-based, paper numbering)."""
    return embed(cavity, annihilation(layout.dims[cavity]), layout)


def cavity_number(layout: HilbertLayout, cavity: int) -> SparseOperator:
    return embed(cavity, number(layout.dims[cavity]), layout)


def qutrit_op(layout: HilbertLayout, from_level: str, to_level: str) -> SparseOperator:
    return embed(0, qutrit_transition(from_level, to_level), layout)


# ---------------------------------------------------------------------------
# dense states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StateVector:
    layout: HilbertLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.layout.total_dim,):
            raise ValueError(f"state length {amps.shape} != {self.layout.total_dim}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, layout: HilbertLayout, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=np.complex128)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(layout, amps / norm)

    @classmethod
    def basis(cls, layout: HilbertLayout, levels: Sequence[int]) -> "StateVector":
        amps = np.zeros(layout.total_dim, dtype=np.complex128)
        amps[layout.index(levels)] = 1.0
        return cls(layout, amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def expect(self, op: SparseOperator) -> complex:
        return complex(np.vdot(self.amplitudes, op.matrix @ self.amplitudes))


@dataclass
class DensityMatrix:
    layout: HilbertLayout
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=np.complex128)
        n = self.layout.total_dim
        if rho.shape != (n, n):
            raise ValueError(f"density matrix shape {rho.shape} != ({n}, {n})")
        self.rho = rho

    @classmethod
    def from_state(cls, psi: StateVector) -> "DensityMatrix":
        a = psi.amplitudes
        return cls(psi.layout, np.outer(a, a.conj()))

    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def expect(self, op: SparseOperator) -> complex:
        _check_layout(op, self)
        return complex(np.sum((op.matrix @ self.rho).diagonal()))

    def purity(self) -> float:
        return float(np.real(np.vdot(self.rho, self.rho)))


def _check_layout(op: SparseOperator, rho: DensityMatrix):
    if op.layout != rho.layout:
        raise ValueError(f"layout mismatch: operator {op.layout.dims} vs state {rho.layout.dims}")


def apply_left(op: SparseOperator, rho: DensityMatrix) -> np.ndarray:
    """Dense ``op @ rho``."""
    _check_layout(op, rho)
    return np.asarray(op.matrix @ rho.rho)


def apply_right(op: SparseOperator, rho: DensityMatrix) -> np.ndarray:
    """Dense ``rho @ op``."""
    _check_layout(op, rho)
    # (op^T rho^T)^T keeps the sparse factor on the left
    return np.asarray((op.matrix.T @ rho.rho.T).T)
