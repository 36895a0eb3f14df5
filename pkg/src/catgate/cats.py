"""Cat-state encoding of cavity qubits.

Logical ``|0>``/``|1>`` of a cavity are the even/odd superpositions of
``|alpha>`` and ``|-alpha>``.  Multi-qubit logical states are indexed
``|i_1 i_2 ... i_n>`` with qubit 1 (the control, cavity 1) as the most
significant bit.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.special import gammaln

from .operators import DensityMatrix, HilbertLayout, StateVector

log = logging.getLogger(__name__)


def _fock_amplitudes(alpha: float, n_cut: int) -> np.ndarray:
    n = np.arange(n_cut)
    with np.errstate(divide="ignore", invalid="ignore"):
        logmag = n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    amps = np.exp(logmag) if alpha != 0 else (n == 0).astype(float)
    return amps * np.sign(alpha) ** n if alpha < 0 else amps


def coherent_vector(alpha: float, n_cut: int) -> tuple[np.ndarray, float]:
    """Truncated, renormalized coherent state and its pre-renormalization leak."""
    if n_cut < 2:
        raise ValueError(f"n_cut must be >= 2, got {n_cut}")
    c = math.exp(-alpha ** 2 / 2) * _fock_amplitudes(alpha, n_cut)
    kept = float(np.sum(c ** 2))
    leak = max(0.0, 1.0 - kept)
    return (c / math.sqrt(kept)).astype(np.complex128), leak


@dataclass(frozen=True)
class CatBasis:
    alpha: float
    n_cut: int
    even_vector: np.ndarray
    odd_vector: np.ndarray
    leak_even: float = 0.0
    leak_odd: float = 0.0

    def vector(self, bit: int) -> np.ndarray:
        return self.odd_vector if bit else self.even_vector


def cat_normalizations(alpha: float) -> tuple[float, float]:
    """``(N+, N-)`` for the even and odd cat."""
    x = math.exp(-2 * alpha ** 2)
    return 1 / math.sqrt(2 * (1 + x)), 1 / math.sqrt(2 * (1 - x))


def cat_basis(alpha: float, n_cut: int) -> CatBasis:
    """Even/odd cat states from their closed-form Fock coefficients."""
    if not alpha > 0:
        raise ValueError("alpha must be > 0: the odd cat is undefined at alpha = 0")
    if n_cut < 2:
        raise ValueError(f"n_cut must be >= 2, got {n_cut}")
    n_plus, n_minus = cat_normalizations(alpha)
    base = 2 * math.exp(-alpha ** 2 / 2) * _fock_amplitudes(alpha, n_cut)
    parity = np.arange(n_cut) % 2
    even = np.where(parity == 0, n_plus * base, 0.0)
    odd = np.where(parity == 1, n_minus * base, 0.0)
    leaks = []
    vecs = []
    for v in (even, odd):
        kept = float(np.sum(v ** 2))
        leaks.append(max(0.0, 1.0 - kept))
        vecs.append((v / math.sqrt(kept)).astype(np.complex128))
    if max(leaks) > 1e-6:
        log.warning("cat truncation at n_cut=%d leaks %.2e of the norm", n_cut, max(leaks))
    for v in vecs:
        v.flags.writeable = False
    return CatBasis(alpha, n_cut, vecs[0], vecs[1], leaks[0], leaks[1])


@dataclass(frozen=True)
class LogicalState:
    n_qubits: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (2 ** self.n_qubits,):
            raise ValueError(f"need {2 ** self.n_qubits} coefficients, got {c.shape}")
        norm = np.linalg.norm(c)
        if abs(norm - 1) > 1e-12:
            raise ValueError(f"logical state not normalized (norm {norm})")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_bits(cls, bits) -> "LogicalState":
        bits = [int(b) for b in bits]
        c = np.zeros(2 ** len(bits), dtype=np.complex128)
        c[int("".join(map(str, bits)), 2)] = 1
        return cls(len(bits), c)


def bits_of(index: int, n: int) -> tuple[int, ...]:
    return tuple((index >> (n - 1 - k)) & 1 for k in range(n))


def logical_basis_matrix(cat: CatBasis, layout: HilbertLayout) -> np.ndarray:
    """Columns are ``|g> (x) cat_{i_1} (x) ... (x) cat_{i_n}`` for k = 0..2^n-1."""
    n = layout.n_cavities
    if any(d != cat.n_cut for d in layout.dims[1:]):
        raise ValueError(f"layout {layout.dims} does not match cat truncation {cat.n_cut}")
    cavity_dim = layout.total_dim // 3
    cols = np.zeros((layout.total_dim, 2 ** n), dtype=np.complex128)
    for k in range(2 ** n):
        factors = [cat.vector(b) for b in bits_of(k, n)]
        cols[:cavity_dim, k] = reduce(np.kron, factors)
    return cols


def logical_encode(state, cat: CatBasis, layout: HilbertLayout) -> StateVector:
    if not isinstance(state, LogicalState):
        state = LogicalState.from_bits(state)
    if state.n_qubits != layout.n_cavities:
        raise ValueError(f"{state.n_qubits} qubits for {layout.n_cavities} cavities")
    return StateVector.normalized(layout, logical_basis_matrix(cat, layout) @ state.coeffs)


def input_coeffs(gamma: float, theta: float, phi: float) -> LogicalState:
    """Product-form three-qubit input, c_k indexed by |i1 i2 i3>."""
    c1 = (math.cos(gamma), math.sin(gamma))
    c2 = (math.cos(theta), math.sin(theta))
    c3 = (math.cos(phi), math.sin(phi))
    return LogicalState(3, np.array([c1[i] * c2[j] * c3[k]
                                     for i in (0, 1) for j in (0, 1) for k in (0, 1)]))


def phase_signs(n: int) -> np.ndarray:
    """+-1 per logical basis index: prod_{l>=2} (-1)^{i_l} when i_1 = 1."""
    signs = np.ones(2 ** n)
    for k in range(2 ** n):
        bits = bits_of(k, n)
        if bits[0]:
            signs[k] = (-1) ** sum(bits[1:])
    return signs


def ideal_output_coeffs(state: LogicalState) -> LogicalState:
    return LogicalState(state.n_qubits, state.coeffs * phase_signs(state.n_qubits))


@dataclass(frozen=True)
class Decoded:
    """Code-space projection: a coefficient vector (pure input) or block matrix."""

    coeffs: np.ndarray
    leakage: float


def decode_logical(state, cat: CatBasis, layout: HilbertLayout | None = None) -> Decoded:
    layout = layout or state.layout
    V = logical_basis_matrix(cat, layout)
    if isinstance(state, DensityMatrix):
        block = V.conj().T @ state.rho @ V
        return Decoded(block, float(np.real(state.trace() - np.trace(block))))
    c = V.conj().T @ state.amplitudes
    return Decoded(c, float(state.norm() ** 2 - np.sum(np.abs(c) ** 2)))
