"""Self-checks behind the ``verify`` subcommand.

Each check returns a :class:`CheckResult` with the worst deviation seen and
the tolerance it was held to.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .cats import LogicalState, cat_basis, decode_logical, ideal_output_coeffs, logical_encode
from .gate import full_gate, verify_commutation
from .hamiltonians import ModulatedHamiltonian, build_full
from .lindblad import DissipationSpec, IntegratorConfig, evolve
from .operators import DensityMatrix, HilbertLayout, StateVector, cavity_number
from .params import PhysicalParams, derive, paper_operating_point, us_to_ns
from .propagator import piecewise_propagator


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"[{tag}] {self.name}: {self.value:.3e} (tol {self.tolerance:g}){extra}"


def operating_point(n_cavities: int = 3, kappa_inv_us: float = 300.0) -> PhysicalParams:
    """Reference point resized to ``n_cavities``; extra targets sit 10 MHz apart."""
    base = paper_operating_point(kappa_inv_us)
    if n_cavities == base.n_cavities:
        return base
    wc = list(base.omega_c[:2])
    while len(wc) < n_cavities:
        wc.append(round(wc[-1] - 0.01, 6))
    return replace(base, n_cavities=n_cavities, omega_c=tuple(wc[:n_cavities]),
                   kappa_inv=(kappa_inv_us,))


def _derive_quiet(p):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return derive(p)


def truth_table_deviation(n: int, n_cut: int = 8, n_random: int = 0, seed: int = 0) -> float:
    """Worst coefficient error of decode(gate(encode(L))) against the ideal output.

    Covers every computational basis input plus ``n_random`` random states.
    """
    p = operating_point(n)
    d = _derive_quiet(p)
    layout = HilbertLayout.cavities(n, n_cut)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cat = cat_basis(p.alpha, n_cut)
        U = full_gate(d, layout)
    dim = 2 ** n
    inputs = [LogicalState(n, np.eye(dim)[k].astype(np.complex128)) for k in range(dim)]
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        inputs.append(LogicalState(n, v / np.linalg.norm(v)))
    worst = 0.0
    for L in inputs:
        out = decode_logical(U.apply(logical_encode(L, cat, layout)), cat, layout)
        worst = max(worst, float(np.max(np.abs(out.coeffs - ideal_output_coeffs(L).coeffs))))
    return worst


def check_truth_tables(n_cut: int = 8, tol: float = 1e-8) -> list[CheckResult]:
    out = []
    for n, extra in ((2, 0), (3, 50), (4, 0)):
        t = time.perf_counter()
        dev = truth_table_deviation(n, n_cut, n_random=extra)
        label = f"truth table n={n}" + (f" (+{extra} random)" if extra else "")
        out.append(CheckResult(label, dev <= tol, dev, tol, seconds=time.perf_counter() - t))
    return out


def check_commutation(n_cut: int = 6, tol: float = 1e-12) -> CheckResult:
    t = time.perf_counter()
    p = paper_operating_point()
    d = _derive_quiet(p)
    c = verify_commutation(d, HilbertLayout.cavities(p.n_cavities, n_cut))
    return CheckResult("[H0, H_int] = 0", c <= tol, c, tol, seconds=time.perf_counter() - t)


def decay_deviation(kappa: float = 0.01, t_final: float = 100.0, n0: int = 3, n_cut: int = 6,
                    dt: float = 0.01) -> float:
    """Relative error of <n>(t) against ``n0 exp(-kappa t)`` for one lossy mode, in ns units."""
    layout = HilbertLayout((3, n_cut))
    rho0 = DensityMatrix.from_state(StateVector.basis(layout, (0, n0)))
    H = ModulatedHamiltonian(layout, ())
    res = evolve(rho0, H, DissipationSpec(kappa=(kappa,)), t_final, IntegratorConfig(dt=dt))
    n_t = res.rho.expect(cavity_number(layout, 1)).real
    expected = n0 * math.exp(-kappa * t_final)
    return abs(n_t - expected) / expected


def check_decay(tol: float = 1e-6) -> CheckResult:
    t = time.perf_counter()
    dev = decay_deviation()
    return CheckResult("single-mode decay vs exp(-kappa t)", dev <= tol, dev, tol,
                       seconds=time.perf_counter() - t)


def oracle_deviation(n_cut: int = 3, dt: float = 0.01, checkpoints: int = 4,
                     slices: int = 20) -> float:
    """Max-norm gap between RK4 and the dense propagator for the two-cavity lossy model.

    Compared at ``checkpoints`` evenly spaced times up to the gate time.
    """
    p = operating_point(2)
    d = _derive_quiet(p)
    layout = HilbertLayout.cavities(2, n_cut)
    H = build_full(d, layout)
    D = DissipationSpec.from_params(p)
    channels = D.channels(layout)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cat = cat_basis(p.alpha, n_cut)
    psi = logical_encode(LogicalState(2, np.full(4, 0.5, dtype=np.complex128)), cat, layout)
    rho = DensityMatrix.from_state(psi)
    T = us_to_ns(d.gate_time)
    worst = 0.0
    t_prev = 0.0
    ref = rho
    for k in range(1, checkpoints + 1):
        t_k = T * k / checkpoints
        rho = evolve(rho, H, D, t_k, IntegratorConfig(dt=dt), t0=t_prev).rho
        ref = DensityMatrix(layout, piecewise_propagator(H, channels, ref, t_prev, t_k, slices))
        worst = max(worst, float(np.max(np.abs(rho.rho - ref.rho))))
        t_prev = t_k
    return worst


def check_oracle(tol: float = 1e-6) -> CheckResult:
    t = time.perf_counter()
    dev = oracle_deviation()
    return CheckResult("RK4 vs dense propagator (n=2, n_cut=3)", dev <= tol, dev, tol,
                       seconds=time.perf_counter() - t)


def run_all() -> list[CheckResult]:
    return [*check_truth_tables(), check_commutation(), check_decay(), check_oracle()]
