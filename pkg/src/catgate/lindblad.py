"""Master-equation integration and gate fidelity.

The generator is

    d rho/dt = -i [H(t), rho] + sum_k rate_k (xi_k rho xi_k^dag - {xi_k^dag xi_k, rho} / 2)

with the cavity decays, the three qutrit relaxation paths and the two
level-dephasing projectors as channels.  Time is in ns and rates in 1/ns.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .hamiltonians import ModulatedHamiltonian
from .operators import (
    DensityMatrix,
    HilbertLayout,
    SparseOperator,
    StateVector,
    cavity_annihilation,
    qutrit_op,
)
from .params import PhysicalParams, rate_per_ns

log = logging.getLogger(__name__)

TRACE_ABORT = 1e-4


class NumericalAbort(RuntimeError):
    """Integration stopped: trace drift beyond tolerance or non-finite state."""


@dataclass(frozen=True)
class Channel:
    name: str
    rate: float
    op: SparseOperator


@dataclass(frozen=True)
class DissipationSpec:
    kappa: tuple[float, ...]
    gamma_eg: float = 0.0
    gamma_fe: float = 0.0
    gamma_fg: float = 0.0
    gamma_phi_e: float = 0.0
    gamma_phi_f: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kappa", tuple(float(k) for k in self.kappa))
        rates = self.kappa + (self.gamma_eg, self.gamma_fe, self.gamma_fg,
                              self.gamma_phi_e, self.gamma_phi_f)
        if any(r < 0 for r in rates):
            raise ValueError("dissipation rates must be >= 0")

    @classmethod
    def from_params(cls, p: PhysicalParams) -> "DissipationSpec":
        return cls(
            kappa=tuple(rate_per_ns(k) for k in p.kappa_inv),
            gamma_eg=rate_per_ns(p.gamma_eg_inv),
            gamma_fe=rate_per_ns(p.gamma_fe_inv),
            gamma_fg=rate_per_ns(p.gamma_fg_inv),
            gamma_phi_e=rate_per_ns(p.gamma_phi_e_inv),
            gamma_phi_f=rate_per_ns(p.gamma_phi_f_inv),
        )

    @classmethod
    def none(cls, n_cavities: int) -> "DissipationSpec":
        return cls(kappa=(0.0,) * n_cavities)

    def without(self, *names: str) -> "DissipationSpec":
        """Copy with the named channels switched off (``kappa`` drops all cavities)."""
        changes = {}
        for name in names:
            if name == "kappa":
                changes["kappa"] = (0.0,) * len(self.kappa)
            elif name in ("gamma_eg", "gamma_fe", "gamma_fg", "gamma_phi_e", "gamma_phi_f"):
                changes[name] = 0.0
            else:
                raise ValueError(f"unknown channel {name!r}")
        return replace(self, **changes)

    def channels(self, layout: HilbertLayout) -> list[Channel]:
        if len(self.kappa) != layout.n_cavities:
            raise ValueError(f"{len(self.kappa)} cavity rates for {layout.n_cavities} cavities")
        out = [Channel(f"kappa{l}", k, cavity_annihilation(layout, l))
               for l, k in enumerate(self.kappa, start=1)]
        out += [
            Channel("gamma_eg", self.gamma_eg, qutrit_op(layout, "e", "g")),
            Channel("gamma_fe", self.gamma_fe, qutrit_op(layout, "f", "e")),
            Channel("gamma_fg", self.gamma_fg, qutrit_op(layout, "f", "g")),
            Channel("gamma_phi_e", self.gamma_phi_e, qutrit_op(layout, "e", "e")),
            Channel("gamma_phi_f", self.gamma_phi_f, qutrit_op(layout, "f", "f")),
        ]
        return [c for c in out if c.rate > 0]


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 0.01
    method: str = "rk4"
    record_stride: int = 500
    positivity_check_stride: int = 0
    reduce_subspace: bool = True
    exponential_slices: int = 200

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.method not in ("rk4", "exponential"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class Diagnostics:
    steps: int = 0
    subspace_dim: int = 0
    times: list = field(default_factory=list)
    trace_errors: list = field(default_factory=list)
    min_eigenvalues: list = field(default_factory=list)
    max_trace_error: float = 0.0
    max_hermiticity_defect: float = 0.0
    wall_time_s: float = 0.0


@dataclass
class EvolutionResult:
    rho: DensityMatrix
    diagnostics: Diagnostics


# ---------------------------------------------------------------------------
# reference (uncompiled) generator
# ---------------------------------------------------------------------------

def _channels(D, layout: HilbertLayout) -> list[Channel]:
    if isinstance(D, DissipationSpec):
        return D.channels(layout)
    return list(D)


def dissipator(xi: SparseOperator, rho: DensityMatrix) -> np.ndarray:
    """``xi rho xi^dag - xi^dag xi rho / 2 - rho xi^dag xi / 2``."""
    if xi.layout != rho.layout:
        raise ValueError("layout mismatch between jump operator and state")
    x = xi.matrix
    xdx = (x.conj().T @ x).tocsr()
    r = rho.rho
    jump = x @ (x @ r.conj().T).conj().T
    return jump - 0.5 * (xdx @ r) - 0.5 * (xdx.T @ r.T).T


def rhs(t: float, rho: DensityMatrix, H: ModulatedHamiltonian, D) -> np.ndarray:
    """Full right-hand side for an arbitrary (not necessarily Hermitian) ``rho``."""
    if H.layout != rho.layout:
        raise ValueError("layout mismatch between Hamiltonian and state")
    h = H.at(t).matrix
    r = rho.rho
    out = -1j * (h @ r - (h.T @ r.T).T)
    for ch in _channels(D, rho.layout):
        out = out + ch.rate * dissipator(ch.op, rho)
    return np.asarray(out)


# ---------------------------------------------------------------------------
# compiled engine
# ---------------------------------------------------------------------------

def _row_layers(mat: sp.csr_matrix, scale: float) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split ``mat`` into layers with at most one entry per row."""
    mat = mat.tocsr()
    n = mat.shape[0]
    counts = np.diff(mat.indptr)
    layers = []
    for r in range(int(counts.max()) if mat.nnz else 0):
        src = np.full(n, -1, dtype=np.int64)
        wts = np.zeros(n, dtype=np.complex128)
        rows = np.nonzero(counts > r)[0]
        pos = mat.indptr[rows] + r
        src[rows] = mat.indices[pos]
        wts[rows] = mat.data[pos] * scale
        layers.append((src, wts))
    return layers


def reachable_subspace(seeds: np.ndarray, patterns: Sequence[sp.spmatrix], n: int) -> np.ndarray:
    """Basis indices reachable from ``seeds`` by repeated application of ``patterns``.

    The returned span is invariant under every operator in ``patterns``, so a
    density matrix supported there stays there.
    """
    adj = sp.csr_matrix((n, n), dtype=bool)
    for p in patterns:
        adj = adj + (abs(p) > 0)
    mask = np.zeros(n, dtype=bool)
    mask[seeds] = True
    while True:
        grown = mask | (adj @ mask)
        if (grown == mask).all():
            return np.nonzero(mask)[0]
        mask = grown


def _grading(layout: HilbertLayout, H: ModulatedHamiltonian, channels: list[Channel],
             keep: np.ndarray) -> np.ndarray:
    """Excitation grade per kept index, or all zeros when the model does not respect it.

    A usable grade is conserved by every Hamiltonian entry and lowered by a
    fixed non-negative amount by each jump operator.
    """
    from .hamiltonians import excitation_number

    n = layout.total_dim
    grade = np.rint(excitation_number(layout).matrix.diagonal().real).astype(np.int64)
    pos = np.full(n, -1, dtype=np.int64)
    pos[keep] = np.arange(len(keep))

    def entries(mat):
        coo = mat.tocoo()
        sel = (pos[coo.row] >= 0) & (pos[coo.col] >= 0) & (coo.data != 0)
        return coo.row[sel], coo.col[sel]

    ok = True
    for term in H.terms:
        r, c = entries(term.op.matrix)
        ok &= bool(np.all(grade[r] == grade[c]))
    for ch in channels:
        r, c = entries(ch.op.matrix)
        shift = grade[c] - grade[r]
        ok &= bool(len(shift) == 0 or (np.all(shift == shift[0]) and shift[0] >= 0))
    if not ok:
        log.info("model does not conserve the excitation grade; integrating the full matrix")
        return np.zeros(len(keep), dtype=np.int64)
    return grade[keep]


class _Engine:
    """Sparse data for one evolution on a grade-sorted, possibly reduced basis."""

    def __init__(self, H: ModulatedHamiltonian, channels: list[Channel], keep: np.ndarray):
        layout = H.layout
        n = layout.total_dim
        grade = _grading(layout, H, channels, keep)
        order = np.lexsort((keep, grade))
        self.keep = keep[order]
        grade = grade[order]
        self.n = n
        self.m = m = len(self.keep)
        decay = sp.csr_matrix((n, n), dtype=np.complex128)
        for ch in channels:
            x = ch.op.matrix
            decay = decay + ch.rate * (x.conj().T @ x)
        self.ham = _restrict_compiled(H.compile(SparseOperator(layout, -0.5j * decay)), self.keep)
        layers, chan_ptr = [], [0]
        for ch in channels:
            ls = _row_layers(ch.op.matrix[self.keep][:, self.keep], math.sqrt(ch.rate))
            layers += ls
            chan_ptr.append(len(layers))
        self.src = np.array([l[0] for l in layers], dtype=np.int64).reshape(len(layers), m)
        self.wts = np.array([l[1] for l in layers], dtype=np.complex128).reshape(len(layers), m)
        invalid = self.src < 0
        self.srcp = np.where(invalid, 0, self.src)
        self.cwp = np.where(invalid, 0, np.conj(self.wts))
        if not np.any(self.wts.imag):
            # real weights select a cheaper compiled specialization
            self.wts = np.ascontiguousarray(self.wts.real)
            self.cwp = np.ascontiguousarray(self.cwp.real)
        self.pairs = np.array([(r, s) for k in range(len(chan_ptr) - 1)
                               for r in range(chan_ptr[k], chan_ptr[k + 1])
                               for s in range(chan_ptr[k], chan_ptr[k + 1])],
                              dtype=np.int64).reshape(-1, 2)
        # sectors of equal grade, then blocks grouped by grade difference
        values, starts = np.unique(grade, return_index=True)
        ends = np.append(starts[1:], m)
        by_class: dict[int, list] = {}
        for A in range(len(values)):
            for B in range(A + 1):
                by_class.setdefault(int(values[A] - values[B]), []).append(
                    (starts[A], ends[A], starts[B], ends[B]))
        blocks, class_ptr = [], [0]
        for D in sorted(by_class):
            blocks += by_class[D]
            class_ptr.append(len(blocks))
        self.blocks = np.array(blocks, dtype=np.int64).reshape(-1, 4)
        self.class_ptr = np.array(class_ptr, dtype=np.int64)
        self.diag_blocks = np.stack([starts, ends], axis=1).astype(np.int64)
        self.n_classes = len(class_ptr) - 1
        width = int(np.max(ends - starts))
        self.scratch = (np.empty((width, width), dtype=np.complex128),
                        np.empty((width, width), dtype=np.complex128),
                        np.empty(width, dtype=np.complex128))

    def restrict(self, rho: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(rho[np.ix_(self.keep, self.keep)])

    def full_block(self, r: np.ndarray) -> np.ndarray:
        """Hermitian completion on the reduced basis."""
        out = r.copy()
        _kernels.fill_upper(out, self.blocks)
        return out

    def lift(self, r: np.ndarray) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=np.complex128)
        out[np.ix_(self.keep, self.keep)] = self.full_block(r)
        return out


def _restrict_compiled(c, keep: np.ndarray):
    """Compiled Hamiltonian on the basis ``keep`` (in that order)."""
    from .hamiltonians import CompiledHamiltonian

    n = c.n
    pos = np.full(n, -1, dtype=np.int64)
    pos[keep] = np.arange(len(keep))
    rows = np.repeat(np.arange(n), np.diff(c.indptr))
    cols = c.indices
    sel = (pos[rows] >= 0) & (pos[cols] >= 0)
    new_rows, new_cols = pos[rows[sel]], pos[cols[sel]]
    order = np.lexsort((new_cols, new_rows))
    m = len(keep)
    indptr = np.zeros(m + 1, dtype=np.int64)
    np.add.at(indptr, new_rows + 1, 1)
    return CompiledHamiltonian(m, np.cumsum(indptr), new_cols[order].astype(np.int64),
                               np.ascontiguousarray(c.stack[:, sel][:, order]),
                               c.omegas, c.conj_rows)


def _support(rho: np.ndarray) -> np.ndarray:
    return np.nonzero(np.any(rho != 0, axis=1))[0]


def evolve(rho0: DensityMatrix, H: ModulatedHamiltonian, D, t_final: float,
           cfg: IntegratorConfig = IntegratorConfig(), t0: float = 0.0) -> EvolutionResult:
    """Integrate from ``t0`` to ``t_final`` (ns)."""
    if not t_final > t0:
        raise ValueError("t_final must be > t0")
    layout = rho0.layout
    if H.layout != layout:
        raise ValueError("layout mismatch between Hamiltonian and state")
    channels = _channels(D, layout)
    if cfg.method == "exponential":
        from .propagator import piecewise_propagator

        start = time.perf_counter()
        r = piecewise_propagator(H, channels, rho0, t0, t_final, cfg.exponential_slices)
        diag = Diagnostics(steps=cfg.exponential_slices, subspace_dim=layout.total_dim,
                           max_trace_error=abs(np.trace(r).real - 1),
                           wall_time_s=time.perf_counter() - start)
        return EvolutionResult(DensityMatrix(layout, r), diag)
    return _evolve_rk4(rho0, H, channels, t0, t_final, cfg)


def _evolve_rk4(rho0, H, channels, t0, t_final, cfg) -> EvolutionResult:
    start = time.perf_counter()
    layout = rho0.layout
    n = layout.total_dim
    if cfg.reduce_subspace:
        pats = [t.op.matrix for t in H.terms] + [t.op.matrix.T for t in H.terms]
        pats += [c.op.matrix for c in channels]
        keep = reachable_subspace(_support(rho0.rho), pats, n)
    else:
        keep = np.arange(n)
    eng = _Engine(H, channels, keep)
    rho = eng.restrict(rho0.rho)
    acc = np.zeros_like(rho)
    buf0, buf1 = np.zeros_like(rho), np.zeros_like(rho)
    ham = eng.ham
    d0, dm, d1 = (np.empty(ham.nnz, dtype=np.complex128) for _ in range(3))
    static = (ham.indptr, ham.indices, eng.src, eng.srcp, eng.wts, eng.cwp, eng.pairs,
              eng.blocks, eng.class_ptr)

    span = t_final - t0
    n_steps = max(1, math.ceil(span / cfg.dt - 1e-9))
    tr0 = np.trace(rho0.rho).real
    diag = Diagnostics(subspace_dim=eng.m)

    for step in range(n_steps):
        t = t0 + step * cfg.dt
        h = cfg.dt if step < n_steps - 1 else t_final - t
        ham.data_at(t, out=d0)
        ham.data_at(t + 0.5 * h, out=dm)
        ham.data_at(t + h, out=d1)
        _kernels.rk4_step(rho, acc, buf0, buf1, d0, dm, d1, *static[:7], *static[7:], h,
                          *eng.scratch)
        defect, tr = _kernels.symmetrize_diagonal_blocks(acc, eng.diag_blocks)
        rho, acc = acc, rho
        t += h

        diag.max_hermiticity_defect = max(diag.max_hermiticity_defect, defect)
        err = abs(tr - tr0)
        if not math.isfinite(tr):
            raise NumericalAbort(f"non-finite state at t={t:.4f} ns (step {step + 1}); "
                                 f"reduce dt (currently {cfg.dt} ns)")
        diag.max_trace_error = max(diag.max_trace_error, err)
        if err > TRACE_ABORT:
            raise NumericalAbort(f"trace drift {err:.3e} at t={t:.4f} ns (step {step + 1}) "
                                 f"exceeds {TRACE_ABORT:g}; reduce dt (currently {cfg.dt} ns)")
        last = step == n_steps - 1
        if (step + 1) % cfg.record_stride == 0 or last:
            # entries of a density matrix never exceed its trace in modulus
            if not _kernels.blocks_bounded(rho, eng.blocks, (1 + TRACE_ABORT) * abs(tr0)):
                raise NumericalAbort(f"non-finite or unbounded state at t={t:.4f} ns "
                                     f"(integration unstable); reduce dt (currently {cfg.dt} ns)")
            diag.times.append(t)
            diag.trace_errors.append(tr - tr0)
        if cfg.positivity_check_stride and ((step + 1) % cfg.positivity_check_stride == 0 or last):
            diag.min_eigenvalues.append((t, float(np.linalg.eigvalsh(eng.full_block(rho))[0])))
    diag.steps = n_steps
    diag.wall_time_s = time.perf_counter() - start
    return EvolutionResult(DensityMatrix(layout, eng.lift(rho)), diag)


def fidelity(rho: DensityMatrix, psi_id: StateVector) -> float:
    """``sqrt(<psi|rho|psi>)``, clamped to [0, 1]."""
    if rho.layout != psi_id.layout:
        raise ValueError("layout mismatch between state and target")
    a = psi_id.amplitudes
    raw = float(np.real(np.vdot(a, rho.rho @ a)))
    if raw < -1e-10:
        raise NumericalAbort(f"negative overlap {raw:.3e}: density matrix is not positive")
    return min(1.0, math.sqrt(max(raw, 0.0)))
