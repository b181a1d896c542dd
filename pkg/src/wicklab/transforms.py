"""Transforms linking the four wavefunction pictures on truncated coefficients.

Each picture stores chaos coefficients against its own basis: field-side
wavefunctions against Wick monomials at covariance Delta/2, momentum-side
wavefunctions against Wick monomials at -D/2, and the (anti)holomorphic
pictures against plain monomials paired by the Delta (resp. -D) Gaussian
measure.  All transforms act degree by degree on the shared multi-index
coefficient basis, so every one of them is also available as an explicit
matrix; the matrix form is what the operator-conjugation checks consume.

The plain smearing transform rescales degree-n coefficients by 2^{-n/2}
(its inverse by 2^{+n/2}); the algebra-preserving variants first multiply by
the phase exp(-i q), where q is a Wick-ordered quadratic ((K A) : phi^2 : on
the field side, (A D^{-1}) : pi^2 : on the momentum side).  The rotation
between the holomorphic and antiholomorphic pictures applies the symmetric
matrix i (D^{-1} - i A D^{-1}) to every tensor slot; composing the three maps
yields the field-to-momentum transform, under which creation and annihilation
operators mix whenever A is nonzero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chaos import ChaosState
from .gaussian import Covariance
from .quantize import basis_indices, basis_size, interior_indices
from .symtensor import SymTensor, apply_slotwise, pair

__all__ = [
    "TransformReport",
    "raising_matrix",
    "derivative_matrix",
    "multiplication_matrix",
    "quadratic_wick_multiplier",
    "phase_exponential",
    "gram_matrix",
    "state_to_vector",
    "vector_to_state",
    "segal_bargmann",
    "segal_bargmann_inverse",
    "sb_matrix",
    "sb_momentum_matrix",
    "sb_schrodinger",
    "sb_schrodinger_inverse",
    "sb_momentum",
    "sb_momentum_inverse",
    "fourier_tilde_matrix",
    "fourier_tilde_inverse_matrix",
    "fourier_tilde",
    "fourier_tilde_inverse",
    "fourier_matrix",
    "fourier",
    "fourier_inverse",
    "field_vacuum",
    "momentum_vacuum",
    "picture_operators",
    "canonical_pair_matrices",
    "verify_web",
]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class TransformReport:
    """One named residual check: label, worst residual, basis cutoff, verdict."""

    label: str
    max_residual: float
    cutoff: int
    passed: bool

    def __post_init__(self):
        if self.max_residual < 0:
            raise ValueError("residual must be nonnegative")


# ---------------------------------------------------------------------------
# coefficient-basis primitives


def _positions(dim, cutoff):
    basis = basis_indices(dim, cutoff)
    return basis, {key: i for i, key in enumerate(basis)}


def raising_matrix(x, dim, cutoff):
    """Multiplication by the x-th coordinate on plain-monomial coefficients.

    Components transform as sym(e_x (x) psi); the raising part out of the top
    degree is dropped by the truncation.
    """
    basis, pos = _positions(dim, cutoff)
    mat = np.zeros((len(basis), len(basis)))
    for j, key in enumerate(basis):
        if len(key) == cutoff:
            continue
        lifted = tuple(sorted(key + (x,)))
        mat[pos[lifted], j] = lifted.count(x) / len(lifted)
    return mat


def derivative_matrix(x, dim, cutoff):
    """Coordinate derivative on coefficients: one slot contracted, weight n."""
    basis, pos = _positions(dim, cutoff)
    mat = np.zeros((len(basis), len(basis)))
    for j, key in enumerate(basis):
        if x not in key:
            continue
        lowered = list(key)
        lowered.remove(x)
        mat[pos[tuple(lowered)], j] = len(key)
    return mat


def multiplication_matrix(x, half_cov, cutoff):
    """Multiplication by a coordinate on a Wick basis of the given covariance.

    On Wick monomials the coordinate acts as raising plus a covariance-weighted
    lowering term, the three-term recurrence of Appell families.
    """
    half_cov = np.asarray(half_cov)
    dim = half_cov.shape[0]
    mat = raising_matrix(x, dim, cutoff).astype(half_cov.dtype)
    for y in range(dim):
        if half_cov[x, y] != 0:
            mat = mat + half_cov[x, y] * derivative_matrix(y, dim, cutoff)
    return mat


def quadratic_wick_multiplier(qform, half_cov, cutoff):
    """Matrix of multiplication by (1/2) q_xy : v^x v^y : on the Wick basis."""
    qform = np.asarray(qform)
    half_cov = np.asarray(half_cov)
    dim = qform.shape[0]
    size = basis_size(dim, cutoff)
    mult = [multiplication_matrix(x, half_cov, cutoff) for x in range(dim)]
    out = np.zeros((size, size), dtype=complex)
    for x in range(dim):
        for y in range(dim):
            if qform[x, y] == 0:
                continue
            out += 0.5 * qform[x, y] * (mult[x] @ mult[y] - half_cov[x, y] * np.eye(size))
    return out


def phase_exponential(mat, tol=1e-14, max_terms=400):
    """Exponential series of a phase generator with explicit tail monitoring."""
    mat = np.asarray(mat, dtype=complex)
    acc = np.eye(mat.shape[0], dtype=complex)
    term = np.eye(mat.shape[0], dtype=complex)
    for k in range(1, max_terms + 1):
        term = term @ mat / k
        acc = acc + term
        if np.linalg.norm(term) <= tol * max(1.0, np.linalg.norm(acc)):
            return acc
    raise ValueError(
        f"phase exponential series did not settle within {max_terms} terms "
        "(quadratic form too large for this cutoff)"
    )


def gram_matrix(metric, cutoff):
    """Gram matrix of the degree-diagonal factorial-weighted pairing."""
    metric = np.asarray(metric)
    dim = metric.shape[0]
    basis, _ = _positions(dim, cutoff)
    size = len(basis)
    gram = np.zeros((size, size), dtype=complex)
    for i, left in enumerate(basis):
        n = len(left)
        unit_left = SymTensor(n, dim, {left: 1})
        for j, right in enumerate(basis):
            if len(right) != n:
                continue
            unit_right = SymTensor(n, dim, {right: 1})
            gram[i, j] = math.factorial(n) * pair(unit_left, unit_right, metric)
    return gram


def state_to_vector(state):
    """Pack a chaos state's tensor components into a basis-ordered vector."""
    dim = state.covariance.dim
    _, pos = _positions(dim, state.cutoff)
    vec = np.zeros(basis_size(dim, state.cutoff), dtype=complex)
    for degree, tensor in state.coeffs.items():
        for key, value in tensor.coeffs.items():
            vec[pos[key]] = complex(value)
    return vec


def vector_to_state(vec, flavor, covariance, cutoff):
    """Unpack a basis-ordered coefficient vector into a chaos state."""
    basis, _ = _positions(covariance.dim, cutoff)
    grouped = {}
    for value, key in zip(vec, basis):
        if value != 0:
            grouped.setdefault(len(key), {})[key] = value
    coeffs = {
        n: SymTensor(n, covariance.dim, entries) for n, entries in grouped.items()
    }
    return ChaosState(flavor, covariance, cutoff, coeffs)


def _degree_scaling(dim, cutoff, half_powers):
    basis, _ = _positions(dim, cutoff)
    return np.diag([2.0 ** (half_powers * len(key) / 2.0) for key in basis])


# ---------------------------------------------------------------------------
# the transforms as matrices


def sb_matrix(blocks, cutoff, phase=False):
    """Field-to-holomorphic transform matrix (optionally algebra-preserving).

    The plain version rescales degree-n coefficients by 2^{-n/2}; the phased
    version first multiplies the wavefunction by exp(-i q) with
    q = (1/2)(KA)_xy : phi^2 :, which is what keeps the ladder operators in
    the same form on both sides when A is nonzero.
    """
    diag = _degree_scaling(blocks.dim, cutoff, -1)
    if not phase:
        return diag.astype(complex)
    qf = quadratic_wick_multiplier(blocks.k @ blocks.a, blocks.delta / 2.0, cutoff)
    return diag @ phase_exponential(-1j * qf)


def sb_momentum_matrix(blocks, cutoff, phase=False):
    """Momentum-to-antiholomorphic transform matrix (optionally phased)."""
    diag = _degree_scaling(blocks.dim, cutoff, -1)
    if not phase:
        return diag.astype(complex)
    dinv = np.linalg.inv(blocks.d)
    qg = quadratic_wick_multiplier(blocks.a @ dinv, -blocks.d / 2.0, cutoff)
    return diag @ phase_exponential(-1j * qg)


def fourier_tilde_matrix(blocks, cutoff):
    """Holomorphic-to-antiholomorphic rotation: i(D^{-1} - iAD^{-1}) slotwise."""
    dinv = np.linalg.inv(blocks.d)
    slot = 1j * (dinv - 1j * blocks.a @ dinv)
    return _slotwise_matrix(slot, blocks.dim, cutoff)


def fourier_tilde_inverse_matrix(blocks, cutoff):
    """Inverse rotation, built from its own slot matrix i(K + iKA)."""
    slot = 1j * (blocks.k + 1j * blocks.k @ blocks.a)
    return _slotwise_matrix(slot, blocks.dim, cutoff)


def _slotwise_matrix(slot, dim, cutoff):
    basis, pos = _positions(dim, cutoff)
    size = len(basis)
    mat = np.zeros((size, size), dtype=complex)
    for j, key in enumerate(basis):
        n = len(key)
        if n == 0:
            mat[j, j] = 1.0
            continue
        image = apply_slotwise(slot, SymTensor(n, dim, {key: 1}))
        for out_key, value in image.coeffs.items():
            mat[pos[out_key], j] = value
    return mat


def fourier_matrix(blocks, cutoff):
    """Field-to-momentum transform: out of momentum smearing, rotate, smear."""
    back = _degree_scaling(blocks.dim, cutoff, +1)
    return back @ fourier_tilde_matrix(blocks, cutoff) @ sb_matrix(blocks, cutoff)


# ---------------------------------------------------------------------------
# state-level wrappers


def _check_cov(state, expected, what):
    scale = max(1.0, float(np.linalg.norm(expected)))
    if np.linalg.norm(state.covariance.matrix - expected) > 1e-10 * scale:
        raise ValueError(f"state covariance does not match the {what} picture")


def segal_bargmann(state):
    """Wick basis to plain monomials at the same covariance: coefficients fixed."""
    if state.flavor != "real":
        raise ValueError("expected a real-flavor state")
    return ChaosState("holomorphic", state.covariance, state.cutoff, dict(state.coeffs))


def segal_bargmann_inverse(state):
    if state.flavor != "holomorphic":
        raise ValueError("expected a holomorphic-flavor state")
    return ChaosState("real", state.covariance, state.cutoff, dict(state.coeffs))


def _apply(matrix, state, flavor, covariance):
    vec = matrix @ state_to_vector(state)
    return vector_to_state(vec, flavor, covariance, state.cutoff)


def sb_schrodinger(state, blocks, phase=True):
    """Field wavefunction (Wick basis at Delta/2) to the holomorphic picture."""
    _check_cov(state, blocks.delta / 2.0, "field")
    mat = sb_matrix(blocks, state.cutoff, phase=phase)
    return _apply(mat, state, "holomorphic", Covariance(blocks.delta))


def sb_schrodinger_inverse(state, blocks, phase=True):
    _check_cov(state, blocks.delta, "holomorphic")
    cutoff = state.cutoff
    back = _degree_scaling(blocks.dim, cutoff, +1).astype(complex)
    if phase:
        qf = quadratic_wick_multiplier(blocks.k @ blocks.a, blocks.delta / 2.0, cutoff)
        back = phase_exponential(1j * qf) @ back
    return _apply(back, state, "real", Covariance(blocks.delta / 2.0))


def sb_momentum(state, blocks, phase=True):
    """Momentum wavefunction (Wick basis at -D/2) to the antiholomorphic picture."""
    _check_cov(state, -blocks.d / 2.0, "momentum")
    mat = sb_momentum_matrix(blocks, state.cutoff, phase=phase)
    return _apply(mat, state, "holomorphic", Covariance(-blocks.d))


def sb_momentum_inverse(state, blocks, phase=True):
    _check_cov(state, -blocks.d, "antiholomorphic")
    cutoff = state.cutoff
    back = _degree_scaling(blocks.dim, cutoff, +1).astype(complex)
    if phase:
        dinv = np.linalg.inv(blocks.d)
        qg = quadratic_wick_multiplier(blocks.a @ dinv, -blocks.d / 2.0, cutoff)
        back = phase_exponential(1j * qg) @ back
    return _apply(back, state, "real", Covariance(-blocks.d / 2.0))


def fourier_tilde(state, blocks):
    """Rotate a holomorphic state into the antiholomorphic picture."""
    _check_cov(state, blocks.delta, "holomorphic")
    mat = fourier_tilde_matrix(blocks, state.cutoff)
    return _apply(mat, state, "holomorphic", Covariance(-blocks.d))


def fourier_tilde_inverse(state, blocks):
    _check_cov(state, -blocks.d, "antiholomorphic")
    mat = fourier_tilde_inverse_matrix(blocks, state.cutoff)
    return _apply(mat, state, "holomorphic", Covariance(blocks.delta))


def fourier(state, blocks):
    """Field wavefunction to momentum wavefunction through the rotation."""
    _check_cov(state, blocks.delta / 2.0, "field")
    mat = fourier_matrix(blocks, state.cutoff)
    return _apply(mat, state, "real", Covariance(-blocks.d / 2.0))


def fourier_inverse(state, blocks):
    _check_cov(state, -blocks.d / 2.0, "momentum")
    cutoff = state.cutoff
    mat = (
        _degree_scaling(blocks.dim, cutoff, +1)
        @ fourier_tilde_inverse_matrix(blocks, cutoff)
        @ _degree_scaling(blocks.dim, cutoff, -1)
    )
    return _apply(mat, state, "real", Covariance(blocks.delta / 2.0))


def field_vacuum(blocks, cutoff):
    """Ground-state wavefunction of the field picture: exp[(i/2)(KA):phi^2:]."""
    qf = quadratic_wick_multiplier(blocks.k @ blocks.a, blocks.delta / 2.0, cutoff)
    vec = phase_exponential(1j * qf)[:, 0]
    return vector_to_state(vec, "real", Covariance(blocks.delta / 2.0), cutoff)


def momentum_vacuum(blocks, cutoff):
    """Ground-state wavefunction of the momentum picture: exp[(i/2)(AD^{-1}):pi^2:]."""
    dinv = np.linalg.inv(blocks.d)
    qg = quadratic_wick_multiplier(blocks.a @ dinv, -blocks.d / 2.0, cutoff)
    vec = phase_exponential(1j * qg)[:, 0]
    return vector_to_state(vec, "real", Covariance(-blocks.d / 2.0), cutoff)


# ---------------------------------------------------------------------------
# in-picture operator matrices


def _mix(coefficients, mats):
    coefficients = np.asarray(coefficients)
    return [
        sum(coefficients[x, y] * mats[y] for y in range(len(mats)))
        for x in range(len(mats))
    ]


def picture_operators(picture, blocks, cutoff):
    """Coordinate multiplication/derivative and ladder matrices of one picture."""
    d = blocks.dim
    deriv = [derivative_matrix(x, d, cutoff).astype(complex) for x in range(d)]
    if picture == "holomorphic":
        mult = [raising_matrix(x, d, cutoff).astype(complex) for x in range(d)]
        ann = _mix(blocks.delta, deriv)
        cre = list(mult)
    elif picture == "antiholomorphic":
        mult = [raising_matrix(x, d, cutoff).astype(complex) for x in range(d)]
        ann = _mix(-blocks.d, deriv)
        cre = list(mult)
    elif picture == "schrodinger":
        mult = [multiplication_matrix(x, blocks.delta / 2.0, cutoff).astype(complex) for x in range(d)]
        contracted = _mix(blocks.delta, deriv)
        mixed = _mix(blocks.a, mult)
        ann = [(contracted[x] - 1j * mixed[x]) / _SQRT2 for x in range(d)]
        cre = [_SQRT2 * mult[x] - ann[x] for x in range(d)]
    elif picture == "field-momentum":
        mult = [multiplication_matrix(x, -blocks.d / 2.0, cutoff).astype(complex) for x in range(d)]
        contracted = _mix(-blocks.d, deriv)
        mixed = _mix(blocks.a.T, mult)
        ann = [(contracted[x] + 1j * mixed[x]) / _SQRT2 for x in range(d)]
        cre = [_SQRT2 * mult[x] - ann[x] for x in range(d)]
    else:
        raise ValueError(f"unknown picture {picture!r}")
    return {"mult": mult, "deriv": deriv, "ann": ann, "cre": cre}


def canonical_pair_matrices(picture, blocks, cutoff):
    """Quantized field and momentum observables in the given picture."""
    ops = picture_operators(picture, blocks, cutoff)
    d = blocks.dim
    if picture == "schrodinger":
        phi = list(ops["mult"])
        tail = _mix(1j * blocks.k - blocks.k @ blocks.a, ops["mult"])
        pi = [-1j * ops["deriv"][x] + tail[x] for x in range(d)]
        return phi, pi
    if picture == "field-momentum":
        dinv = np.linalg.inv(blocks.d)
        pi = list(ops["mult"])
        tail = _mix(1j * dinv + blocks.a @ dinv, ops["mult"])
        phi = [1j * ops["deriv"][x] + tail[x] for x in range(d)]
        return phi, pi
    ann, cre = ops["ann"], ops["cre"]
    if picture == "holomorphic":
        phi = [(cre[x] + ann[x]) / _SQRT2 for x in range(d)]
        diff = [(cre[x] - ann[x]) / _SQRT2 for x in range(d)]
        pi_raw = _mix(1j * blocks.k, diff)
        pi_tail = _mix(blocks.k @ blocks.a, phi)
        pi = [pi_raw[x] - pi_tail[x] for x in range(d)]
        return phi, pi
    if picture == "antiholomorphic":
        dinv = np.linalg.inv(blocks.d)
        pi = [(cre[x] + ann[x]) / _SQRT2 for x in range(d)]
        diff = [(ann[x] - cre[x]) / _SQRT2 for x in range(d)]
        phi_raw = _mix(-1j * dinv, diff)
        phi_tail = _mix(blocks.a @ dinv, pi)
        phi = [phi_raw[x] + phi_tail[x] for x in range(d)]
        return phi, pi
    raise ValueError(f"unknown picture {picture!r}")


# ---------------------------------------------------------------------------
# the whole web


def _max_difference(left, right, idx):
    worst = 0.0
    for a, b in zip(left, right):
        block = (a - b)[np.ix_(idx, idx)]
        worst = max(worst, float(np.max(np.abs(block))))
    return worst


def verify_web(blocks, cutoff):
    """Cross-check every route between the pictures; return one report per check.

    The quantization-route checks compare the field-picture observables with
    their transport along each of the three other paths.  The plain-ladder
    check is a deliberate negative control: without the phase factors the
    smearing transform preserves ladder operators only when A vanishes, so for
    A != 0 its report passes exactly when the residual is *large*.
    """
    d = blocks.dim
    idx = interior_indices(d, cutoff, 2)
    phased_idx = interior_indices(d, cutoff, 4)
    reports = []

    sb = sb_matrix(blocks, cutoff)
    sb_inv = _degree_scaling(d, cutoff, +1).astype(complex)
    ft = fourier_tilde_matrix(blocks, cutoff)
    ft_inv = fourier_tilde_inverse_matrix(blocks, cutoff)
    fm = fourier_matrix(blocks, cutoff)
    fm_inv = sb_inv @ ft_inv @ sb

    phi_ref, pi_ref = canonical_pair_matrices("schrodinger", blocks, cutoff)
    targets = {"field": phi_ref, "momentum": pi_ref}

    routes = {}
    hol_phi, hol_pi = canonical_pair_matrices("holomorphic", blocks, cutoff)
    routes["holomorphic"] = (
        [sb_inv @ m @ sb for m in hol_phi],
        [sb_inv @ m @ sb for m in hol_pi],
    )
    mom_phi, mom_pi = canonical_pair_matrices("field-momentum", blocks, cutoff)
    routes["momentum"] = (
        [fm_inv @ m @ fm for m in mom_phi],
        [fm_inv @ m @ fm for m in mom_pi],
    )
    anti_phi, anti_pi = canonical_pair_matrices("antiholomorphic", blocks, cutoff)
    routes["antiholomorphic"] = (
        [sb_inv @ ft_inv @ m @ ft @ sb for m in anti_phi],
        [sb_inv @ ft_inv @ m @ ft @ sb for m in anti_pi],
    )
    for route, (phi_route, pi_route) in routes.items():
        resid = _max_difference(phi_route, targets["field"], idx)
        reports.append(TransformReport(f"field-via-{route}", resid, cutoff, resid < 1e-8))
        resid = _max_difference(pi_route, targets["momentum"], idx)
        reports.append(TransformReport(f"momentum-via-{route}", resid, cutoff, resid < 1e-8))

    gram_mu = gram_matrix(blocks.delta, cutoff)
    gram_nu = gram_matrix(-blocks.d, cutoff)
    adjoint = np.linalg.solve(gram_mu, ft.conj().T @ gram_nu)
    resid = float(np.max(np.abs(adjoint @ ft - np.eye(len(ft)))))
    reports.append(TransformReport("rotation-unitary", resid, cutoff, resid < 1e-10))

    resid = float(np.max(np.abs(ft_inv @ ft - np.eye(len(ft)))))
    reports.append(TransformReport("rotation-inverse", resid, cutoff, resid < 1e-10))

    # Negative control: the phase-free transform moves the holomorphic
    # annihilators onto the phased field-picture ladders only when A = 0.
    hol_ann = picture_operators("holomorphic", blocks, cutoff)["ann"]
    field_ann = picture_operators("schrodinger", blocks, cutoff)["ann"]
    moved = [sb_inv @ m @ sb for m in hol_ann]
    resid = _max_difference(moved, field_ann, idx)
    if np.linalg.norm(blocks.a) > 1e-12:
        reports.append(TransformReport("plain-ladder-transport", resid, cutoff, resid > 1e-3))
    else:
        reports.append(TransformReport("plain-ladder-transport", resid, cutoff, resid < 1e-8))

    # Positive control: the phased transform does preserve the ladders.
    sb_phase = sb_matrix(blocks, cutoff, phase=True)
    qf = quadratic_wick_multiplier(blocks.k @ blocks.a, blocks.delta / 2.0, cutoff)
    sb_phase_inv = phase_exponential(1j * qf) @ _degree_scaling(d, cutoff, +1)
    moved = [sb_phase_inv @ m @ sb_phase for m in hol_ann]
    resid = _max_difference(moved, field_ann, phased_idx)
    reports.append(TransformReport("phased-ladder-transport", resid, cutoff, resid < 1e-8))

    return reports
