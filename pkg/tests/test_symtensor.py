import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wicklab.symtensor import (
    SymTensor,
    TruncationError,
    apply_slotwise,
    contract,
    multiplicity,
    multiset_permutations,
    pair,
    sorted_indices,
    sym_product,
    symmetrize,
)


def test_sorted_indices_counts():
    # stars and bars: C(d+n-1, n)
    assert len(sorted_indices(2, 3)) == 4
    assert len(sorted_indices(3, 4)) == math.comb(6, 4)
    assert sorted_indices(2, 0) == [()]


def test_multiplicity():
    assert multiplicity(()) == 1
    assert multiplicity((0, 0, 0)) == 1
    assert multiplicity((0, 1)) == 2
    assert multiplicity((0, 0, 1, 2)) == 12  # 4!/2!


def test_multiset_permutations_distinct():
    perms = list(multiset_permutations((0, 0, 1)))
    assert len(perms) == 3
    assert len(set(perms)) == 3


def test_symmetrize_rank1_identity():
    t = symmetrize(np.array([1.0, 2.0]))
    assert t.coeffs == {(0,): 1.0, (1,): 2.0}


def test_symmetrize_average():
    t = symmetrize(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert t[(0, 1)] == pytest.approx(0.5)


def test_symmetrize_fixed_point():
    rng = np.random.default_rng(1)
    raw = rng.normal(size=(3, 3, 3))
    sym = symmetrize(raw)
    again = symmetrize(sym.to_dense().real)
    for key in sorted_indices(3, 3):
        assert again[key] == pytest.approx(sym[key], abs=1e-14)


def test_symmetrize_ragged_rejected():
    with pytest.raises(ValueError):
        symmetrize(np.zeros((2, 3)))


def test_symmetrize_exact_fractions():
    raw = np.array([[Fraction(0), Fraction(1)], [Fraction(0), Fraction(0)]], dtype=object)
    t = symmetrize(raw)
    assert t[(0, 1)] == Fraction(1, 2)
    assert isinstance(t[(0, 1)], Fraction)


def test_sym_product_scalar_absorption():
    two = SymTensor(0, 2, {(): 2})
    b = SymTensor.unit(2, (0, 1), value=3.0)
    out = sym_product(two, b)
    assert out.rank == 2 and out[(0, 1)] == 6.0


def test_sym_product_basis_vectors():
    e0 = SymTensor.unit(2, (0,))
    e1 = SymTensor.unit(2, (1,))
    mixed = sym_product(e0, e1)
    # evaluation on phi must give phi0*phi1 (checked at two points)
    for phi in ([1.0, 1.0], [1.0, 2.0]):
        assert mixed.evaluate(phi) == pytest.approx(phi[0] * phi[1])
    diag = sym_product(e0, e0)
    assert diag.evaluate([3.0, 5.0]) == pytest.approx(9.0)


def test_sym_product_truncation_policy():
    a = SymTensor.unit(2, (0, 0))
    with pytest.raises(TruncationError):
        sym_product(a, a, cutoff=3)
    dropped = sym_product(a, a, cutoff=3, on_truncate="drop")
    assert dropped.is_zero()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1000))
def test_sym_product_commutative_and_homomorphic(seed):
    rng = np.random.default_rng(seed)
    a = symmetrize(rng.normal(size=(2, 2)))
    b = symmetrize(rng.normal(size=(2, 2, 2)))
    phi = rng.normal(size=2)
    ab = sym_product(a, b)
    ba = sym_product(b, a)
    for key in sorted_indices(2, 5):
        assert ab[key] == pytest.approx(ba[key], abs=1e-12)
    assert ab.evaluate(phi) == pytest.approx(a.evaluate(phi) * b.evaluate(phi), rel=1e-12, abs=1e-12)


def test_sym_product_associative():
    rng = np.random.default_rng(7)
    a = symmetrize(rng.normal(size=(2,)))
    b = symmetrize(rng.normal(size=(2, 2)))
    c = symmetrize(rng.normal(size=(2,)))
    left = sym_product(sym_product(a, b), c)
    right = sym_product(a, sym_product(b, c))
    for key in sorted_indices(2, 4):
        assert left[key] == pytest.approx(right[key], abs=1e-12)


def test_contract_identity_trace():
    rng = np.random.default_rng(3)
    Delta = rng.normal(size=(3, 3))
    Delta = Delta @ Delta.T
    ident = symmetrize(np.eye(3))
    out = contract(ident, [(0, 1)], Delta)
    assert out.rank == 0
    assert out[()] == pytest.approx(np.trace(Delta))


def test_contract_rank2_with_identity_metric():
    rng = np.random.default_rng(4)
    t = symmetrize(rng.normal(size=(3, 3)))
    out = contract(t, [(0, 1)], np.eye(3))
    assert out[()] == pytest.approx(sum(t[(i, i)] for i in range(3)))


def test_contract_rank4_vs_dense_einsum():
    rng = np.random.default_rng(5)
    Delta = rng.normal(size=(3, 3))
    Delta = Delta @ Delta.T
    t = symmetrize(rng.normal(size=(3, 3, 3, 3)))
    got = contract(t, [(0, 2)], Delta)
    dense = symmetrize(np.einsum("abcd,ac->bd", t.to_dense().real, Delta))
    for key in sorted_indices(3, 2):
        assert got[key] == pytest.approx(dense[key], abs=1e-12)


def test_contract_slot_validation():
    t = symmetrize(np.eye(2))
    with pytest.raises(ValueError):
        contract(t, [(0, 0)], np.eye(2))
    with pytest.raises(ValueError):
        contract(t, [(0, 5)], np.eye(2))


def test_apply_slotwise_vs_dense():
    rng = np.random.default_rng(6)
    M = rng.normal(size=(2, 2))
    t = symmetrize(rng.normal(size=(2, 2, 2)))
    got = apply_slotwise(M, t)
    dense = t.to_dense().real
    for ax in range(3):
        dense = np.moveaxis(np.tensordot(M, dense, axes=([1], [ax])), 0, ax)
    ref = symmetrize(dense)
    for key in sorted_indices(2, 3):
        assert got[key] == pytest.approx(ref[key], abs=1e-12)


def test_pair_vs_dense():
    rng = np.random.default_rng(8)
    Delta = rng.normal(size=(2, 2))
    Delta = Delta @ Delta.T
    a = symmetrize(rng.normal(size=(2, 2)))
    b = symmetrize(rng.normal(size=(2, 2)))
    want = np.einsum("ab,cd,ac,bd->", a.to_dense().real, b.to_dense().real, Delta, Delta)
    assert pair(a, b, Delta) == pytest.approx(want)


def test_tensor_addition_and_scaling():
    a = SymTensor.unit(2, (0,), 1.0)
    b = SymTensor.unit(2, (1,), 2.0)
    s = a + b
    assert s[(0,)] == 1.0 and s[(1,)] == 2.0
    assert (3 * s)[(1,)] == 6.0
    assert (s - s).is_zero()
