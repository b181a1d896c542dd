"""Tests for the truncated operator representations and star products."""

import math

import numpy as np
import pytest

from wicklab.chaos import BiSymTensor
from wicklab.kahler import complete_blocks, random_compatible_blocks
from wicklab.quantize import (
    REPRESENTATIONS,
    TruncatedOperator,
    WeylWord,
    annihilator_vacuum,
    basis_indices,
    basis_size,
    classical_norm,
    commutator_covariance,
    conjugate_poly,
    field_and_momentum,
    gns_state,
    interior_indices,
    ladder_operators,
    moyal_product,
    operator_from_json,
    operator_to_json,
    quantize_exponential,
    quantize_word,
    weyl_norm_estimate,
    weyl_quantize,
    weyl_quantize_recursive,
    wick_quantize,
    wick_star,
)


def scalar_blocks(delta=1.0, a=0.0):
    return complete_blocks(np.array([[a]]), np.array([[delta]]))


def interior_block(mat, dim, cutoff, margin):
    idx = interior_indices(dim, cutoff, margin)
    return mat[np.ix_(idx, idx)]


def random_bipoly(rng, dim, max_degree):
    poly = {}
    for n in range(max_degree + 1):
        for m in range(max_degree + 1 - n):
            dense = rng.normal(size=(dim,) * (n + m)) + 1j * rng.normal(size=(dim,) * (n + m))
            poly[(n, m)] = dense
    return poly


# ---------------------------------------------------------------------------
# bases and ladder algebra


def test_basis_enumeration():
    basis = basis_indices(2, 3)
    assert len(basis) == basis_size(2, 3) == 10
    assert basis[0] == ()
    assert basis[1:3] == ((0,), (1,))
    degrees = [len(idx) for idx in basis]
    assert degrees == sorted(degrees)


def test_ladder_rejects_tiny_cutoff():
    with pytest.raises(ValueError):
        ladder_operators("holomorphic", scalar_blocks(), 0)


def test_operator_validation():
    with pytest.raises(ValueError):
        TruncatedOperator("poisson", np.eye(2), 1, 1)
    with pytest.raises(ValueError):
        TruncatedOperator("holomorphic", np.eye(3), 1, 1)


def test_holomorphic_vacuum_annihilated():
    blocks = random_compatible_blocks(np.random.default_rng(0), 3)
    ann, _ = ladder_operators("holomorphic", blocks, 4)
    for op in ann:
        assert np.max(np.abs(op.matrix[:, 0])) == 0.0


def test_commutators_match_covariance_all_reps():
    rng = np.random.default_rng(1)
    for trial in range(10):
        d = 2 + trial % 3
        blocks = random_compatible_blocks(rng, d)
        cutoff = 5
        idx = interior_indices(d, cutoff, 2)
        for rep in REPRESENTATIONS:
            ann, cre = ladder_operators(rep, blocks, cutoff)
            g = commutator_covariance(rep, blocks)
            for x in range(d):
                for y in range(d):
                    comm = ann[x].matrix @ cre[y].matrix - cre[y].matrix @ ann[x].matrix
                    block = comm[np.ix_(idx, idx)]
                    target = g[x, y] * np.eye(len(idx))
                    assert np.max(np.abs(block - target)) < 1e-12, (rep, x, y)


def test_like_ladders_commute_on_interior():
    blocks = random_compatible_blocks(np.random.default_rng(2), 3)
    idx = interior_indices(3, 4, 2)
    for rep in REPRESENTATIONS:
        ann, cre = ladder_operators(rep, blocks, 4)
        for ops in (ann, cre):
            comm = ops[0].matrix @ ops[1].matrix - ops[1].matrix @ ops[0].matrix
            assert np.max(np.abs(comm[np.ix_(idx, idx)])) < 1e-13


def test_creation_is_matrix_adjoint_of_annihilation():
    blocks = random_compatible_blocks(np.random.default_rng(3), 2)
    for rep in REPRESENTATIONS:
        ann, cre = ladder_operators(rep, blocks, 5)
        for x in range(2):
            assert np.max(np.abs(cre[x].matrix - ann[x].matrix.conj().T)) < 1e-12


def test_schrodinger_field_recovers_multiplication():
    # with the mixing block zero, the field operator is the symmetric
    # tridiagonal multiplication matrix in every direction
    blocks = complete_blocks(np.zeros((2, 2)), np.array([[2.0, 0.3], [0.3, 1.5]]))
    ann, cre = ladder_operators("schrodinger", blocks, 4)
    phi, _ = field_and_momentum("schrodinger", blocks, 4)
    for x in range(2):
        combo = (ann[x].matrix + cre[x].matrix) / math.sqrt(2)
        assert np.allclose(phi[x].matrix, combo, atol=1e-13)
        assert np.max(np.abs(phi[x].matrix - phi[x].matrix.conj().T)) < 1e-13


def test_field_momentum_ccr_all_reps():
    rng = np.random.default_rng(4)
    blocks = random_compatible_blocks(rng, 2)
    cutoff = 5
    idx = interior_indices(2, cutoff, 2)
    for rep in REPRESENTATIONS:
        phi, pi = field_and_momentum(rep, blocks, cutoff)
        for x in range(2):
            assert np.max(np.abs(phi[x].matrix - phi[x].matrix.conj().T)) < 1e-12
            assert np.max(np.abs(pi[x].matrix - pi[x].matrix.conj().T)) < 1e-12
            for y in range(2):
                comm = phi[x].matrix @ pi[y].matrix - pi[y].matrix @ phi[x].matrix
                target = 1j * (x == y) * np.eye(len(idx))
                assert np.max(np.abs(comm[np.ix_(idx, idx)] - target)) < 1e-11, rep


def test_linear_dirac_condition():
    # [Q(f), Q(g)] = -i Q({f, g}) for linear observables in every picture
    rng = np.random.default_rng(5)
    blocks = random_compatible_blocks(rng, 2)
    cutoff = 5
    idx = interior_indices(2, cutoff, 2)
    u1, v1, u2, v2 = rng.normal(size=(4, 2))
    bracket = float(v1 @ u2 - u1 @ v2)
    for rep in REPRESENTATIONS:
        phi, pi = field_and_momentum(rep, blocks, cutoff)
        qf = sum(u1[x] * phi[x].matrix + v1[x] * pi[x].matrix for x in range(2))
        qg = sum(u2[x] * phi[x].matrix + v2[x] * pi[x].matrix for x in range(2))
        comm = (qf @ qg - qg @ qf)[np.ix_(idx, idx)]
        assert np.max(np.abs(comm - (-1j) * bracket * np.eye(len(idx)))) < 1e-11, rep


def test_schrodinger_vacuum_ratio_recursion():
    # the vacuum killed by the mixed annihilator obeys a two-step ratio law
    delta, amix = 1.4, 0.6
    blocks = scalar_blocks(delta, amix)
    ann, _ = ladder_operators("schrodinger", blocks, 16)
    vec, residual = annihilator_vacuum(ann)
    assert residual < 1e-8
    ratio = 1j * amix / (2 - 1j * amix)
    for m in range(1, 6):
        expected = ratio * math.sqrt(m / (m + 1)) * vec[m - 1]
        assert abs(vec[m + 1] - expected) < 1e-8


def test_vacuum_is_first_basis_vector_when_unmixed():
    blocks = complete_blocks(np.zeros((2, 2)), np.array([[1.0, 0.2], [0.2, 2.0]]))
    for rep in ("holomorphic", "antiholomorphic", "schrodinger"):
        ann, _ = ladder_operators(rep, blocks, 5)
        vec, residual = annihilator_vacuum(ann)
        assert residual < 1e-12
        assert abs(abs(vec[0]) - 1) < 1e-10


# ---------------------------------------------------------------------------
# polynomial quantization


def test_constant_quantizes_to_identity():
    blocks = scalar_blocks(1.7)
    poly = {(0, 0): BiSymTensor.unit(1, (), (), 3.25)}
    op = weyl_quantize(poly, blocks, 6)
    assert np.allclose(op.matrix, 3.25 * np.eye(basis_size(1, 6)), atol=1e-13)


def test_linear_monomials_map_to_ladders():
    blocks = random_compatible_blocks(np.random.default_rng(6), 2)
    ann, cre = ladder_operators("holomorphic", blocks, 5)
    op_phi = weyl_quantize({(1, 0): BiSymTensor.unit(2, (1,), ())}, blocks, 5)
    op_bar = weyl_quantize({(0, 1): BiSymTensor.unit(2, (), (0,))}, blocks, 5)
    assert np.allclose(op_phi.matrix, cre[1].matrix, atol=1e-13)
    assert np.allclose(op_bar.matrix, ann[0].matrix, atol=1e-13)


def test_mixed_quadratic_weyl_ordering():
    blocks = scalar_blocks(1.0)
    ann, cre = ladder_operators("holomorphic", blocks, 8)
    poly = {(1, 1): BiSymTensor.unit(1, (0,), (0,))}
    op = weyl_quantize(poly, blocks, 8)
    expected = cre[0].matrix @ ann[0].matrix + 0.5 * np.eye(basis_size(1, 8))
    assert np.allclose(op.matrix, expected, atol=1e-13)


def test_mixed_quadratic_wick_ordering():
    blocks = scalar_blocks(1.0)
    ann, cre = ladder_operators("holomorphic", blocks, 8)
    poly = {(1, 1): BiSymTensor.unit(1, (0,), (0,))}
    op = wick_quantize(poly, blocks, 8)
    assert np.allclose(op.matrix, cre[0].matrix @ ann[0].matrix, atol=1e-13)


def test_pure_power_has_no_ordering_correction():
    blocks = scalar_blocks(2.0)
    ann, cre = ladder_operators("holomorphic", blocks, 8)
    op = weyl_quantize({(2, 0): BiSymTensor.unit(1, (0, 0), ())}, blocks, 8)
    assert np.allclose(op.matrix, cre[0].matrix @ cre[0].matrix, atol=1e-13)


def test_wick_quantization_kills_vacuum_expectation():
    rng = np.random.default_rng(7)
    blocks = random_compatible_blocks(rng, 2)
    for n, m in [(1, 0), (0, 2), (2, 1), (2, 2)]:
        left = tuple(sorted(rng.integers(0, 2, size=n)))
        right = tuple(sorted(rng.integers(0, 2, size=m)))
        poly = {(n, m): BiSymTensor.unit(2, left, right)}
        op = wick_quantize(poly, blocks, 6)
        assert abs(op.matrix[0, 0]) < 1e-13


def test_recursion_route_matches_coefficient_route():
    rng = np.random.default_rng(8)
    for _ in range(5):
        blocks = random_compatible_blocks(rng, 2)
        poly = random_bipoly(rng, 2, 3)
        direct = weyl_quantize(poly, blocks, 6)
        recursive = weyl_quantize_recursive(poly, blocks, 6)
        scale = max(1.0, np.max(np.abs(direct.matrix)))
        assert np.max(np.abs(direct.matrix - recursive.matrix)) < 1e-10 * scale


def test_involution_at_matrix_level():
    rng = np.random.default_rng(9)
    for _ in range(5):
        blocks = random_compatible_blocks(rng, 2)
        poly = random_bipoly(rng, 2, 3)
        op = weyl_quantize(poly, blocks, 6)
        conj_op = weyl_quantize(conjugate_poly(poly), blocks, 6)
        scale = max(1.0, np.max(np.abs(op.matrix)))
        assert np.max(np.abs(conj_op.matrix - op.matrix.conj().T)) < 1e-10 * scale


def test_degree_beyond_cutoff_rejected():
    blocks = scalar_blocks()
    poly = {(3, 1): BiSymTensor.unit(1, (0, 0, 0), (0,))}
    with pytest.raises(ValueError):
        weyl_quantize(poly, blocks, 3)


# ---------------------------------------------------------------------------
# trigonometric exponentials


def test_word_identity_element():
    blocks = scalar_blocks(1.3)
    f = WeylWord.exponential([0.4 - 0.2j]) + 2.0 * WeylWord.exponential([0.1j])
    assert moyal_product(WeylWord.identity(1), f, blocks).terms == pytest.approx(f.terms)


def test_conjugate_word_inverts():
    blocks = scalar_blocks(0.9)
    f = WeylWord.exponential([0.3 + 0.5j])
    product = moyal_product(f.conjugate(), f, blocks)
    assert set(product.terms) == {(0j,)}
    assert product.terms[(0j,)] == pytest.approx(1.0)


def test_cocycle_antisymmetry_and_parallel_degeneracy():
    blocks = scalar_blocks(1.1)
    rho, alpha = [0.2 + 0.4j], [-0.5 + 0.1j]
    fwd = moyal_product(WeylWord.exponential(rho), WeylWord.exponential(alpha), blocks)
    bwd = moyal_product(WeylWord.exponential(alpha), WeylWord.exponential(rho), blocks)
    key = (rho[0] + alpha[0],)
    assert fwd.terms[key] * bwd.terms[key] == pytest.approx(1.0)
    parallel = moyal_product(
        WeylWord.exponential(rho), WeylWord.exponential([1.7 * rho[0]]), blocks
    )
    assert parallel.terms[(2.7 * rho[0],)] == pytest.approx(1.0)


def test_star_flavors_do_not_mix():
    blocks = scalar_blocks()
    plain = WeylWord.exponential([0.1])
    ordered = WeylWord.exponential([0.1], wick_ordered=True)
    with pytest.raises(ValueError):
        moyal_product(plain, ordered, blocks)
    with pytest.raises(ValueError):
        wick_star(plain, plain, blocks)


def test_wick_star_shares_cocycle():
    blocks = scalar_blocks(1.4)
    rho, alpha = [0.3 - 0.1j], [0.2 + 0.25j]
    plain = moyal_product(WeylWord.exponential(rho), WeylWord.exponential(alpha), blocks)
    ordered = wick_star(
        WeylWord.exponential(rho, wick_ordered=True),
        WeylWord.exponential(alpha, wick_ordered=True),
        blocks,
    )
    key = (rho[0] + alpha[0],)
    assert ordered.terms[key] == pytest.approx(plain.terms[key])


def unit_ball_draw(rng, dim):
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return vec * rng.uniform(0.2, 1.0) / np.linalg.norm(vec)


# A displacement generated by chi with chi.conj() @ Delta @ chi of order one has
# significant amplitude several levels up the ladder, so the product of two
# truncated exponentials loses the paths that cross the cutoff and come back.
# With covariance ~0.5 the surviving leak on degrees <= cutoff - 10 stays below
# 1e-9 even for aligned unit-norm generators; the margin below reflects that.
_STAR_MARGIN = 10


def test_moyal_operator_homomorphism():
    rng = np.random.default_rng(10)
    blocks = scalar_blocks(0.5)
    cutoff = 12
    idx = interior_indices(1, cutoff, _STAR_MARGIN)
    for _ in range(5):
        rho = unit_ball_draw(rng, 1)
        alpha = unit_ball_draw(rng, 1)
        left = quantize_word(WeylWord.exponential(rho), blocks, cutoff, tail_tol=1e-4).matrix
        right = quantize_word(WeylWord.exponential(alpha), blocks, cutoff, tail_tol=1e-4).matrix
        product_word = moyal_product(
            WeylWord.exponential(rho), WeylWord.exponential(alpha), blocks
        )
        direct = quantize_word(product_word, blocks, cutoff, tail_tol=1e-4).matrix
        resid = (left @ right - direct)[np.ix_(idx, idx)]
        assert np.max(np.abs(resid)) < 1e-8


def test_wick_star_operator_homomorphism():
    rng = np.random.default_rng(11)
    blocks = scalar_blocks(0.6)
    cutoff = 12
    idx = interior_indices(1, cutoff, _STAR_MARGIN)
    rho = unit_ball_draw(rng, 1)
    alpha = unit_ball_draw(rng, 1)
    wr = WeylWord.exponential(rho, wick_ordered=True)
    wa = WeylWord.exponential(alpha, wick_ordered=True)
    left = quantize_word(wr, blocks, cutoff, tail_tol=1e-4).matrix
    right = quantize_word(wa, blocks, cutoff, tail_tol=1e-4).matrix
    direct = quantize_word(wick_star(wr, wa, blocks), blocks, cutoff, tail_tol=1e-4).matrix
    resid = (left @ right - direct)[np.ix_(idx, idx)]
    assert np.max(np.abs(resid)) < 1e-8


def test_exponential_at_zero_is_identity():
    blocks = scalar_blocks(2.2)
    op = quantize_exponential([0.0], blocks, 6)
    assert np.allclose(op.matrix, np.eye(basis_size(1, 6)), atol=1e-13)


def test_exponential_unitary_on_interior_states():
    blocks = scalar_blocks(1.0)
    cutoff = 14
    op = quantize_exponential([0.45 + 0.3j], blocks, cutoff).matrix
    for degree in range(3):
        state = np.zeros(basis_size(1, cutoff), dtype=complex)
        state[degree] = 1.0
        assert abs(np.linalg.norm(op @ state) - 1.0) < 1e-6


def test_exponential_tail_guard():
    blocks = scalar_blocks(1.0)
    with pytest.raises(ValueError):
        quantize_exponential([2.5], blocks, 4)


def test_gns_value_and_matrix_element_agree():
    blocks = scalar_blocks(2.0)
    chi = [1.0]
    assert gns_state(chi, blocks) == pytest.approx(math.exp(-1.0))
    op = quantize_exponential(chi, blocks, 18, tail_tol=1e-6)
    assert abs(op.matrix[0, 0] - gns_state(chi, blocks)) < 1e-8
    assert gns_state([0.0], blocks) == pytest.approx(1.0)


def test_classical_norm_bounded_by_weyl_norm():
    blocks = scalar_blocks(1.1)
    terms = WeylWord.exponential([0.3 + 0.2j], 0.7)
    terms = terms + WeylWord.exponential([-0.25j], 1.1 - 0.4j)
    terms = terms + WeylWord.exponential([0.15], -0.3)
    cl = classical_norm(terms, blocks)
    wn = weyl_norm_estimate(terms, blocks, 14, tail_tol=1e-6)
    assert cl <= wn + 1e-9
    # the vacuum value of the starred square reproduces the coherent Gram sum
    square = moyal_product(terms.conjugate(), terms, blocks)
    vac = quantize_word(square, blocks, 14, tail_tol=1e-6).matrix[0, 0]
    delta = blocks.delta
    expected = 0j
    for chi_n, wn_ in terms.terms.items():
        for chi_m, wm_ in terms.terms.items():
            rho, alpha = -np.asarray(chi_n), np.asarray(chi_m)
            phase = np.exp(0.5 * (rho.conj() @ delta @ alpha - alpha.conj() @ delta @ rho))
            diff = alpha + rho
            expected += np.conj(wn_) * wm_ * phase * np.exp(-0.5 * diff.conj() @ delta @ diff)
    assert abs(vac - expected) < 1e-10
    assert abs(vac.imag) < 1e-10
    assert math.sqrt(vac.real) <= wn + 1e-9
    with pytest.raises(ValueError):
        classical_norm(WeylWord.exponential([0.1], wick_ordered=True), blocks)


def test_operator_json_roundtrip():
    blocks = random_compatible_blocks(np.random.default_rng(13), 2)
    op = weyl_quantize({(1, 1): BiSymTensor.unit(2, (0,), (1,))}, blocks, 3)
    payload = operator_to_json(op)
    assert payload["rep"] == "holomorphic" and payload["dim"] == 2
    back = operator_from_json(payload)
    assert np.allclose(back.matrix, op.matrix)
    assert (back.cutoff, back.dim) == (op.cutoff, op.dim)
