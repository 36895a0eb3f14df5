import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from catgate.cats import cat_basis, decode_logical, ideal_output_coeffs, input_coeffs, logical_encode
from catgate.gate import full_gate, logical_truth_table, u1, u1l, verify_commutation
from catgate.operators import HilbertLayout, SparseOperator
from catgate.params import mhz_to_angular
from catgate.verify import truth_table_deviation

LAY = HilbertLayout.cavities(3, 8)
CAT = cat_basis(0.5, 8)


def _cavity1_only(bit):
    return logical_encode((bit, 0, 0), CAT, LAY)


def test_u1_full_turn_and_zero():
    lam = 2.0
    assert np.allclose(u1(lam, 2 * math.pi / lam, LAY).phases, 1, atol=1e-12)
    assert np.array_equal(u1(lam, 0.0, LAY).phases, np.ones(LAY.total_dim))


def test_u1_half_turn_is_parity():
    U = u1(1.0, math.pi, LAY)
    even, odd = _cavity1_only(0), _cavity1_only(1)
    assert np.allclose(U.apply(even).amplitudes, even.amplitudes, atol=1e-9)
    assert np.allclose(U.apply(odd).amplitudes, -odd.amplitudes, atol=1e-9)


@pytest.mark.parametrize("bits,sign", [((1, 1), -1), ((0, 0), 1), ((0, 1), 1), ((1, 0), 1)])
def test_u1l_controlled_z(bits, sign):
    U = u1l(1.0, math.pi, 2, LAY)
    psi = logical_encode((bits[0], bits[1], 0), CAT, LAY)
    assert np.allclose(U.apply(psi).amplitudes, sign * psi.amplitudes, atol=1e-9)
    assert np.array_equal(u1l(1.0, 0.0, 3, LAY).phases, np.ones(LAY.total_dim))
    with pytest.raises(ValueError):
        u1l(1.0, 1.0, 1, LAY)


def test_full_gate_on_case_a(paper_derived):
    L = input_coeffs(math.pi / 4, math.pi / 4, math.pi / 4)
    out = full_gate(paper_derived, LAY).apply(logical_encode(L, CAT, LAY))
    want = logical_encode(ideal_output_coeffs(L), CAT, LAY)
    assert np.max(np.abs(out.amplitudes - want.amplitudes)) < 1e-8


def test_control_off_leaves_states(paper_derived):
    U = full_gate(paper_derived, LAY)
    for bits in [(0, 0, 0), (0, 1, 0), (0, 0, 1), (0, 1, 1)]:
        psi = logical_encode(bits, CAT, LAY)
        assert np.allclose(U.apply(psi).amplitudes, psi.amplitudes, atol=1e-9)


def test_four_qubit_extension():
    assert truth_table_deviation(4, 6) < 1e-8
    assert logical_truth_table(4)[(1, 1, 1, 1)] == -1


def test_truth_tables():
    t3 = logical_truth_table(3)
    assert [t3[k] for k in sorted(t3)] == [1, 1, 1, 1, 1, -1, -1, 1]
    t2 = logical_truth_table(2)
    assert [t2[k] for k in sorted(t2)] == [1, 1, 1, -1]
    t5 = logical_truth_table(5)
    assert all(v == 1 for k, v in t5.items() if k[0] == 0)


def test_timing_violation_warns(paper_derived):
    with pytest.warns(RuntimeWarning):
        full_gate(paper_derived, LAY, t_ns=100.0)


def test_commutation(paper_derived):
    lay = HilbertLayout.cavities(3, 6)
    assert verify_commutation(paper_derived, lay) == 0.0
    # couples |g,0,0,0> to |g,1,0,0>, which H0 splits
    j = lay.index((0, 1, 0, 0))
    fake = SparseOperator(lay, sp.csr_matrix(([0.1], ([0], [j])), shape=(lay.total_dim,) * 2))
    assert verify_commutation(paper_derived, lay, fake) > 0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_random_cross_kerr_still_commutes(paper_derived, c2, c3):
    from dataclasses import replace
    d = replace(paper_derived, chi_1l=(c2, c3))
    assert verify_commutation(d, HilbertLayout.cavities(3, 4)) == 0.0
