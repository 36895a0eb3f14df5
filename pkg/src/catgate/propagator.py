"""Brute-force reference propagator for small systems.

The Lindblad generator is vectorized row-major (``vec(A X B) = (A (x) B^T)
vec(X)``) and exponentiated densely, slice by slice.  When every modulated
term ``exp(i w t) op`` satisfies ``K_r - K_c = w`` on its non-zeros for one
real diagonal ``K`` (true for any excitation-conserving rotating-wave model),
the evolution is carried out in the frame rotating with ``K``.  There the
generator is static, so the slice product is exact for any slice count and
the result is limited only by the matrix exponential.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .hamiltonians import ModulatedHamiltonian
from .operators import DensityMatrix

MAX_DIM = 64


def liouvillian(h: np.ndarray, channels: Sequence) -> np.ndarray:
    n = h.shape[0]
    eye = np.eye(n)
    L = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for ch in channels:
        x = ch.op.toarray()
        xdx = x.conj().T @ x
        L = L + ch.rate * (np.kron(x, x.conj()) - 0.5 * np.kron(xdx, eye)
                           - 0.5 * np.kron(eye, xdx.T))
    return L


def find_static_frame(H: ModulatedHamiltonian, channels: Sequence = (),
                      rtol: float = 1e-10) -> np.ndarray | None:
    """Diagonal frame ``K`` that makes ``H`` and the channels time-independent, if any."""
    n = H.layout.total_dim
    rows, rhs_vals = [], []
    n_unknowns = n + len(channels)

    def add(r, c, target, extra=None):
        eq = np.zeros(n_unknowns)
        eq[r] += 1.0
        eq[c] -= 1.0
        if extra is not None:
            eq[n + extra] = -1.0
        rows.append(eq)
        rhs_vals.append(target)

    for term in H.terms:
        coo = term.op.matrix.tocoo()
        for r, c in zip(coo.row, coo.col):
            if r != c:
                add(r, c, term.omega)
            elif term.omega != 0:
                return None
    for k, ch in enumerate(channels):
        coo = ch.op.matrix.tocoo()
        for r, c in zip(coo.row, coo.col):
            add(r, c, 0.0, extra=k)
    if not rows:
        return np.zeros(n)
    A = np.array(rows)
    b = np.array(rhs_vals)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    scale = 1.0 + max((abs(t.omega) for t in H.terms), default=0.0)
    if np.max(np.abs(A @ sol - b)) > rtol * scale:
        return None
    return sol[:n]


def piecewise_propagator(H: ModulatedHamiltonian, channels: Sequence, rho0: DensityMatrix,
                         t0: float, t1: float, slices: int = 100,
                         frame: str = "auto") -> np.ndarray:
    """``rho(t1)`` from the time-ordered product of slice exponentials.

    ``frame="auto"`` uses the co-rotating frame when one exists;
    ``frame="none"`` always uses midpoint-sampled interaction-picture slices.
    """
    n = H.layout.total_dim
    if n > MAX_DIM:
        raise ValueError(f"reference propagator limited to total_dim <= {MAX_DIM}, got {n}")
    if slices < 1:
        raise ValueError("need at least one slice")
    if frame not in ("auto", "none"):
        raise ValueError(f"unknown frame option {frame!r}")
    channels = list(channels)
    dt = (t1 - t0) / slices
    K = find_static_frame(H, channels) if frame == "auto" else None
    if K is not None:
        rot0 = np.exp(-1j * K * t0)
        rho = rot0[:, None] * rho0.rho * rot0.conj()[None, :]
        P = expm(liouvillian(np.diag(K) + H.dense(0.0), channels) * dt)
        v = rho.reshape(-1)
        for _ in range(slices):
            v = P @ v
        rot1 = np.exp(1j * K * t1)
        return rot1[:, None] * v.reshape(n, n) * rot1.conj()[None, :]
    v = rho0.rho.reshape(-1).astype(np.complex128)
    for k in range(slices):
        tm = t0 + (k + 0.5) * dt
        v = expm(liouvillian(H.dense(tm), channels) * dt) @ v
    return v.reshape(n, n)
