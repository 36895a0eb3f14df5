import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from catgate.cats import cat_basis, ideal_output_coeffs, input_coeffs, logical_encode
from catgate.hamiltonians import (EffectiveMode, ModulatedHamiltonian, Term, build_effective,
                                  build_full)
from catgate.lindblad import (Channel, DissipationSpec, IntegratorConfig, NumericalAbort,
                              dissipator, evolve, fidelity, rhs)
from catgate.operators import (DensityMatrix, HilbertLayout, SparseOperator, StateVector,
                               cavity_annihilation, cavity_number, qutrit_op)
from catgate.params import derive, rate_per_ns, us_to_ns
from catgate.verify import operating_point

ONE = HilbertLayout((3, 4))


def _dm(layout, levels):
    return DensityMatrix.from_state(StateVector.basis(layout, levels))


def _random_dm(layout, seed, rank=3):
    rng = np.random.default_rng(seed)
    n = layout.total_dim
    a = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    r = a @ a.conj().T
    return DensityMatrix(layout, r / np.trace(r))


def test_dissipator_examples():
    a = cavity_annihilation(ONE, 1)
    assert np.max(np.abs(dissipator(a, _dm(ONE, (0, 0))))) == 0
    got = dissipator(a, _dm(ONE, (0, 1)))
    assert np.allclose(got, _dm(ONE, (0, 0)).rho - _dm(ONE, (0, 1)).rho, atol=1e-15)
    # dephasing halves ground-excited coherences and keeps populations
    lay = HilbertLayout((3, 2))
    rho = np.zeros((6, 6), complex)
    g, e = lay.index((0, 0)), lay.index((1, 0))
    rho[g, g] = rho[e, e] = 0.5
    rho[g, e] = rho[e, g] = 0.5
    out = dissipator(qutrit_op(lay, "e", "e"), DensityMatrix(lay, rho))
    assert out[g, g] == 0 and out[e, e] == 0
    assert out[g, e] == pytest.approx(-0.25) and out[e, g] == pytest.approx(-0.25)


def test_rhs_examples():
    H0 = ModulatedHamiltonian(ONE, ())
    rho = _random_dm(ONE, 3)
    assert np.max(np.abs(rhs(0.0, rho, H0, DissipationSpec.none(1)))) == 0
    n_op = cavity_number(ONE, 1)
    Hs = ModulatedHamiltonian(ONE, [Term(0.7 * n_op, 0.0, add_hc=False)])
    assert np.max(np.abs(rhs(0.0, _dm(ONE, (0, 2)), Hs, DissipationSpec.none(1)))) == 0
    k = 0.3
    drho = rhs(0.0, rho, H0, DissipationSpec(kappa=(k,)))
    dn = np.trace(n_op.toarray() @ drho)
    assert dn == pytest.approx(-k * rho.expect(n_op), abs=1e-10)


def test_channels_add(paper_params):
    lay = HilbertLayout.cavities(3, 2)
    rho = _random_dm(lay, 11)
    H0 = ModulatedHamiltonian(lay, ())
    D = DissipationSpec.from_params(paper_params)
    total = rhs(0.0, rho, H0, D)
    parts = sum(ch.rate * dissipator(ch.op, rho) for ch in D.channels(lay))
    assert np.max(np.abs(total - parts)) < 1e-15
    names = {c.name for c in D.channels(lay)}
    assert names == {"kappa1", "kappa2", "kappa3", "gamma_eg", "gamma_fe", "gamma_fg",
                     "gamma_phi_e", "gamma_phi_f"}
    assert "kappa2" not in {c.name for c in D.without("kappa").channels(lay)}


def test_single_mode_decay():
    rho0 = _dm(ONE, (0, 1))
    k = rate_per_ns(300.0)
    t = us_to_ns(0.41)
    res = evolve(rho0, ModulatedHamiltonian(ONE, ()), DissipationSpec(kappa=(k,)), t)
    n_t = res.rho.expect(cavity_number(ONE, 1)).real
    assert n_t == pytest.approx(math.exp(-0.41 / 300), rel=1e-6)
    assert res.diagnostics.max_trace_error < 1e-12


def _rk4_reference(rho, H, D, t0, h):
    f = lambda t, r: rhs(t, DensityMatrix(rho.layout, r), H, D)
    y = rho.rho
    k1 = f(t0, y)
    k2 = f(t0 + h / 2, y + h / 2 * k1)
    k3 = f(t0 + h / 2, y + h / 2 * k2)
    k4 = f(t0 + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


@pytest.fixture(scope="module")
def small_model():
    p = operating_point(2, kappa_inv_us=1.0)
    d = derive(p)
    lay = HilbertLayout.cavities(2, 3)
    return lay, build_full(d, lay), DissipationSpec.from_params(p)


def test_kernel_matches_reference_step(small_model):
    lay, H, D = small_model
    rho = _random_dm(lay, 5)
    h = 0.02
    got = evolve(rho, H, D, 0.3 + h, IntegratorConfig(dt=h), t0=0.3).rho.rho
    want = _rk4_reference(rho, H, D, 0.3, h)
    assert np.max(np.abs(got - want)) < 1e-14


def test_ungraded_fallback_matches_reference(small_model):
    lay, H, D = small_model
    # a static drive breaks excitation-number conservation
    drive = 0.05 * (qutrit_op(lay, "g", "e") + qutrit_op(lay, "e", "g"))
    Hd = H + ModulatedHamiltonian(lay, [Term(drive, 0.0, add_hc=False)])
    rho = _random_dm(lay, 6)
    got = evolve(rho, Hd, D, 0.02, IntegratorConfig(dt=0.02)).rho.rho
    want = _rk4_reference(rho, Hd, D, 0.0, 0.02)
    assert np.max(np.abs(got - want)) < 1e-14


def test_nonuniform_jump_shift_uses_fallback():
    lay = HilbertLayout((3, 3))
    # jump lowering photons by one or two depending on the row
    op = cavity_annihilation(lay, 1) + cavity_annihilation(lay, 1) @ cavity_annihilation(lay, 1)
    rho = _random_dm(lay, 8)
    H = ModulatedHamiltonian(lay, ())
    chans = [Channel("odd", 0.4, op)]
    got = evolve(rho, H, chans, 0.05, IntegratorConfig(dt=0.05)).rho.rho
    want = _rk4_reference(rho, H, chans, 0.0, 0.05)
    assert np.max(np.abs(got - want)) < 1e-14


def test_reachable_subspace_is_exact(small_model):
    lay, H, D = small_model
    cat = cat_basis(0.5, 3)
    psi = logical_encode((1, 1), cat, lay)
    rho0 = DensityMatrix.from_state(psi)
    a = evolve(rho0, H, D, 5.0, IntegratorConfig(dt=0.01, reduce_subspace=True))
    b = evolve(rho0, H, D, 5.0, IntegratorConfig(dt=0.01, reduce_subspace=False))
    assert a.diagnostics.subspace_dim < lay.total_dim
    assert np.max(np.abs(a.rho.rho - b.rho.rho)) < 1e-13


def test_deterministic(small_model):
    lay, H, D = small_model
    rho0 = _random_dm(lay, 9)
    a = evolve(rho0, H, D, 2.0, IntegratorConfig(dt=0.01)).rho.rho
    b = evolve(rho0, H, D, 2.0, IntegratorConfig(dt=0.01)).rho.rho
    assert np.array_equal(a, b)


def test_trace_and_hermiticity_kept(small_model):
    lay, H, D = small_model
    res = evolve(_random_dm(lay, 2), H, D, 10.0,
                 IntegratorConfig(dt=0.01, record_stride=100, positivity_check_stride=250))
    dg = res.diagnostics
    assert dg.max_trace_error < 1e-12
    assert dg.max_hermiticity_defect < 1e-12
    assert res.rho.hermiticity_defect() < 1e-12
    assert len(dg.times) == 10 and dg.times[-1] == pytest.approx(10.0)
    assert min(v for _, v in dg.min_eigenvalues) > -1e-10


def test_exponential_method_agrees(small_model):
    lay, H, D = small_model
    rho0 = _random_dm(lay, 4)
    a = evolve(rho0, H, D, 3.0, IntegratorConfig(dt=0.005)).rho.rho
    b = evolve(rho0, H, D, 3.0, IntegratorConfig(method="exponential")).rho.rho
    assert np.max(np.abs(a - b)) < 1e-8


def test_abort_on_unstable_step():
    H = ModulatedHamiltonian(ONE, [Term(50.0 * cavity_number(ONE, 1), 0.0, add_hc=False)])
    rho0 = DensityMatrix.from_state(StateVector.normalized(ONE, np.ones(ONE.total_dim)))
    with pytest.raises(NumericalAbort, match="reduce dt"):
        evolve(rho0, H, DissipationSpec(kappa=(5.0,)), 50.0, IntegratorConfig(dt=1.0))


def test_reduced_model_gives_ideal_gate(paper_derived):
    lay = HilbertLayout.cavities(3, 4)
    cat = cat_basis(0.5, 4)
    L = input_coeffs(math.pi / 4, math.pi / 4, math.pi / 4)
    rho0 = DensityMatrix.from_state(logical_encode(L, cat, lay))
    H = build_effective(paper_derived, lay, EffectiveMode.REDUCED)
    res = evolve(rho0, H, DissipationSpec.none(3), us_to_ns(paper_derived.gate_time))
    F = fidelity(res.rho, logical_encode(ideal_output_coeffs(L), cat, lay))
    assert F >= 1 - 1e-6


def test_fidelity_examples():
    lay = HilbertLayout((3, 2))
    psi = StateVector.basis(lay, (0, 0))
    phi = StateVector.basis(lay, (0, 1))
    assert fidelity(DensityMatrix.from_state(psi), psi) == 1.0
    assert fidelity(DensityMatrix.from_state(phi), psi) == 0.0
    mix = DensityMatrix(lay, 0.5 * DensityMatrix.from_state(psi).rho
                        + 0.5 * DensityMatrix.from_state(phi).rho)
    assert fidelity(mix, psi) == pytest.approx(math.sqrt(0.5), abs=1e-15)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.floats(0.01, 0.05))
def test_rk4_step_matches_reference_for_random_states(seed, h):
    lay = HilbertLayout((3, 3))
    a = cavity_annihilation(lay, 1)
    H = ModulatedHamiltonian(lay, [Term(0.8 * (a @ qutrit_op(lay, "g", "e")), -1.3)])
    D = DissipationSpec(kappa=(0.2,), gamma_eg=0.1, gamma_phi_e=0.05)
    rho = _random_dm(lay, seed)
    got = evolve(rho, H, D, 0.7 + h, IntegratorConfig(dt=h), t0=0.7).rho.rho
    assert np.max(np.abs(got - _rk4_reference(rho, H, D, 0.7, h))) < 1e-14


def test_purity_under_dephasing_never_increases():
    lay = HilbertLayout((3, 2))
    rho = _random_dm(lay, 21, rank=2)
    H = ModulatedHamiltonian(lay, ())
    D = DissipationSpec(kappa=(0.0,), gamma_phi_e=0.3, gamma_phi_f=0.2)
    purities = [rho.purity()]
    for k in range(1, 6):
        rho = evolve(rho, H, D, float(k), IntegratorConfig(dt=0.01), t0=k - 1.0).rho
        purities.append(rho.purity())
    assert all(b <= a + 1e-14 for a, b in zip(purities, purities[1:]))


def test_amplitude_damping_can_raise_purity():
    # a maximally mixed photon state relaxes towards the (pure) vacuum
    rho = DensityMatrix(ONE, np.diag([0, 0.5, 0.5, 0] + [0] * 8).astype(complex))
    out = evolve(rho, ModulatedHamiltonian(ONE, ()), DissipationSpec(kappa=(1.0,)), 5.0).rho
    assert out.purity() > rho.purity()
