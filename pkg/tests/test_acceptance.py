"""Acceptance criteria 1-9.

Each test records one PASS/FAIL line (echoed at the end of the pytest run)
before asserting.  Criteria 7 and 8 integrate the three-cavity system at the
reference operating point and take hours on a single core.
"""
import math
import warnings
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from catgate.cats import cat_basis, logical_encode
from catgate.experiment import (CASES, DEFAULT_KAPPA_GRID, Model, Scenario, Toggles,
                                product_input, run_many)
from catgate.gate import full_gate
from catgate.hamiltonians import EffectiveMode, build_effective
from catgate.lindblad import DissipationSpec, IntegratorConfig, evolve, fidelity
from catgate.operators import DensityMatrix, HilbertLayout
from catgate.params import quality_factors, us_to_ns
from catgate import verify

FIG5_FULL = {"a": 0.9902, "b": 0.9884, "c": 0.9886, "d": 0.9903}
BAND = 0.01
GAP = (0.001, 0.006)

_rows: dict = {}
_conservation: list = []  # (label, trace error, hermiticity defect)


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def rows_for(scenarios):
    todo = [s for s in scenarios if s.scenario_id not in _rows]
    for r in run_many(todo):
        _rows[r.scenario_id] = r
        _conservation.append((r.scenario_id, r.trace_error, r.hermiticity_defect))
    return [_rows[s.scenario_id] for s in scenarios]


def point(case, model, kappa=300.0, **kw):
    return Scenario.for_case(case, model=model, kappa_inv_us=kappa, **kw)


def test_criterion_1_matching_condition(paper_derived):
    g, gt = paper_derived.g, paper_derived.g_tilde
    checks = [("g2", g[1], 50.5), ("g3", g[2], 72.1),
              ("g1~", gt[0], 49.5), ("g2~", gt[1], 35.7), ("g3~", gt[2], 41.6)]
    bad = [f"{n}={v:.2f} (want {w}±0.1)" for n, v, w in checks if abs(v - w) > 0.1]
    detail = ", ".join(f"{n}={v:.2f}" for n, v, _ in checks)
    record(1, not bad, detail + ("; off: " + "; ".join(bad) if bad else ""))
    assert not bad


def test_criterion_2_timing(paper_derived):
    T = paper_derived.gate_time
    phase = [2 * math.pi * chi * T for chi in paper_derived.chi_1l]
    rel = max(abs(p - math.pi) / math.pi for p in phase)
    ok = abs(T - 0.41) / 0.41 <= 0.01 and abs(T - 0.408) / 0.408 <= 0.01 and rel <= 1e-9
    record(2, ok, f"T={T:.6f} us, max |chi T - pi|/pi={rel:.1e}")
    assert ok


def test_criterion_3_quality_factors(paper_params):
    q = quality_factors(paper_params)
    want = (1.31e7, 1.07e7, 1.07e7)
    rel = [abs(a - b) / b for a, b in zip(q, want)]
    ok = max(rel) <= 0.01
    record(3, ok, "Q=" + ", ".join(f"{x:.4g}" for x in q) + f"; max rel dev {max(rel):.2%}")
    assert ok


def test_criterion_4_truth_tables():
    res = verify.check_truth_tables(n_cut=8, tol=1e-8)
    worst = max(r.value for r in res)
    ok = all(r.passed for r in res)
    record(4, ok, "; ".join(f"{r.name}: {r.value:.1e}" for r in res))
    assert ok and worst <= 1e-8


def test_criterion_5_closed_system_equivalence(paper_params, paper_derived):
    n_cut = 6
    lay = HilbertLayout.cavities(3, n_cut)
    cat = cat_basis(paper_params.alpha, n_cut)
    H = build_effective(paper_derived, lay, EffectiveMode.REDUCED)
    U = full_gate(paper_derived, lay)
    T = us_to_ns(paper_derived.gate_time)
    worst = 1.0
    for case, ang in sorted(CASES.items()):
        psi = logical_encode(product_input([math.radians(a) for a in ang]), cat, lay)
        res = evolve(DensityMatrix.from_state(psi), H, DissipationSpec.none(3), T)
        _conservation.append((f"closed-{case}", res.diagnostics.max_trace_error,
                              res.diagnostics.max_hermiticity_defect))
        worst = min(worst, fidelity(res.rho, U.apply(psi)) ** 2)
    ok = worst >= 1 - 1e-6
    record(5, ok, f"min overlap over cases a-d = 1 - {1 - worst:.1e}")
    assert ok


def test_criterion_6_oracle_equivalence():
    dev = verify.oracle_deviation()
    ok = dev <= 1e-6
    record(6, ok, f"max |rho_rk4 - rho_exact| = {dev:.2e} (n=2, n_cut=3, dim 27)")
    assert ok


@pytest.mark.slow
def test_criterion_7_fig5_points():
    full = rows_for([point(c, Model.FULL) for c in sorted(CASES)])
    eff = rows_for([point(c, Model.EFFECTIVE) for c in sorted(CASES)])
    parts, ok = [], True
    for f, e in zip(full, eff):
        c = f.angles_label
        in_band = abs(f.fidelity - FIG5_FULL[c]) <= BAND
        gap = e.fidelity - f.fidelity
        gap_ok = GAP[0] <= gap <= GAP[1]
        ok &= in_band and gap_ok
        parts.append(f"({c}) FULL={f.fidelity:.4f} [want {FIG5_FULL[c]}±{BAND}]"
                     f" EFF={e.fidelity:.4f} gap={gap:+.4f}"
                     f"{'' if in_band and gap_ok else ' <- out'}")
    record(7, ok, "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_criterion_8_sweep_monotone():
    bad, parts = [], []
    for c in sorted(CASES):
        rows = rows_for([point(c, Model.EFFECTIVE, k) for k in DEFAULT_KAPPA_GRID])
        F = [r.fidelity for r in rows]
        drops = [(a.kappa_inv_us, b.kappa_inv_us) for a, b in zip(rows, rows[1:])
                 if not b.fidelity >= a.fidelity]
        bad += [f"({c}) {x:g}->{y:g}" for x, y in drops]
        parts.append(f"({c}) {F[0]:.4f}..{F[-1]:.4f}")
    ok = not bad
    record(8, ok, "EFFECTIVE over 100..900 us: " + "; ".join(parts)
           + ("; decreases at " + ", ".join(bad) if bad else ""))
    assert ok


@pytest.mark.slow
def test_criterion_9_conservation():
    decay = verify.decay_deviation()
    base = point("a", Model.EFFECTIVE)
    coarse, fine = rows_for([base, replace(base, integrator=IntegratorConfig(dt=0.005))])
    halving = abs(coarse.fidelity - fine.fidelity)
    trace = max(t for _, t, _ in _conservation)
    herm = max(h for _, _, h in _conservation)
    ok = trace <= 1e-6 and herm <= 1e-8 and decay <= 1e-6 and halving <= 1e-5
    record(9, ok, f"{len(_conservation)} runs: max trace drift {trace:.1e}, max hermiticity "
                  f"defect {herm:.1e}; decay rel err {decay:.1e}; step halving dF={halving:.1e}")
    assert ok
