"""Compatible complex structures on the classical phase space.

A structure is stored through its Darboux blocks

    J = [[A, Δ], [D, −Aᵗ]],

with Δ symmetric positive, D symmetric negative, K = Δ⁻¹, and the
compatibility conditions AΔ = ΔAᵗ, AᵗD = DA, A² + ΔD = −1.  The module
constructs blocks from partial data, checks the web of identities that tie
them together, and realizes the dynamical prescription J = |F|⁻¹F for
per-mode 2×2 generators, including the lapse/shift interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConstraintError",
    "NotAdmissibleError",
    "ComplexStructureBlocks",
    "complete_blocks",
    "random_compatible_blocks",
    "assemble_j",
    "kahler_metric",
    "transform_identities_check",
    "IdentityReport",
    "null_shift_structure",
    "DegenerateStructure",
    "huge_shift_structure",
    "dynamical_j",
    "interpolate_j",
]

_TOL = 1e-10


class ConstraintError(ValueError):
    """Blocks violate a compatibility constraint."""


class NotAdmissibleError(ValueError):
    """Generator spectrum does not admit the polar prescription."""


def _scale(*mats):
    return max(1.0, *(float(np.max(np.abs(m))) for m in mats if m.size))


def _check_symmetric(name, mat, scale):
    if np.max(np.abs(mat - mat.T)) > _TOL * scale:
        raise ConstraintError(f"{name} is not symmetric")


@dataclass(frozen=True)
class ComplexStructureBlocks:
    """The four d×d real blocks (A, Δ, D, K) with K = Δ⁻¹."""

    a: np.ndarray
    delta: np.ndarray
    d: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        A, de, D, K = self.a, self.delta, self.d, self.k
        s = _scale(A, de, D, K)
        _check_symmetric("Delta", de, s)
        _check_symmetric("D", D, s)
        eye = np.eye(de.shape[0])
        if np.max(np.abs(de @ K - eye)) > _TOL * s * s:
            raise ConstraintError("K is not the inverse of Delta")
        if np.max(np.abs(A @ de - de @ A.T)) > _TOL * s * s:
            raise ConstraintError("A Delta = Delta A^t fails")
        if np.max(np.abs(A.T @ D - D @ A)) > _TOL * s * s:
            raise ConstraintError("A^t D = D A fails")
        if np.max(np.abs(A @ A + de @ D + eye)) > _TOL * s * s:
            raise ConstraintError("A^2 + Delta D = -1 fails")
        if np.min(np.linalg.eigvalsh(de)) <= 0:
            raise ConstraintError("Delta is not positive definite")
        if np.max(np.linalg.eigvalsh(D)) >= 0:
            raise ConstraintError("D is not negative definite")

    @property
    def dim(self):
        return self.delta.shape[0]


def complete_blocks(a, delta):
    """Fill in D (and K) from A and Δ via D = (iAᵗ + 1)K(iA − 1).

    The closed form is evaluated literally in complex arithmetic; the
    compatibility condition makes the imaginary part cancel.
    """
    a = np.asarray(a, dtype=float)
    delta = np.asarray(delta, dtype=float)
    s = _scale(a, delta)
    _check_symmetric("Delta", delta, s)
    if np.min(np.linalg.eigvalsh(delta)) <= 0:
        raise ConstraintError("Delta is not positive definite")
    if np.max(np.abs(a @ delta - delta @ a.T)) > _TOL * s * s:
        raise ConstraintError("A Delta = Delta A^t fails")
    k = np.linalg.inv(delta)
    eye = np.eye(delta.shape[0])
    d_complex = (1j * a.T + eye) @ k @ (1j * a - eye)
    if np.max(np.abs(d_complex.imag)) > _TOL * _scale(k) * s:
        raise ConstraintError("closed form for D did not come out real")
    return ComplexStructureBlocks(a, delta, d_complex.real, k)


def random_compatible_blocks(rng, d, scale=1.0):
    """Draw a random valid structure: Δ SPD, A = MK with M symmetric."""
    base = rng.normal(size=(d, d))
    delta = scale * (base @ base.T + d * np.eye(d))
    m = rng.normal(size=(d, d))
    m = 0.5 * (m + m.T)
    a = m @ np.linalg.inv(delta)
    return complete_blocks(a, delta)


def assemble_j(blocks):
    """The full 2d×2d matrix in the Darboux block convention."""
    return np.block([[blocks.a, blocks.delta], [blocks.d, -blocks.a.T]])


def kahler_metric(blocks):
    """The metric paired with the symplectic form through −J; symmetric PD."""
    return np.block([[-blocks.d, blocks.a.T], [blocks.a, blocks.delta]])


@dataclass(frozen=True)
class IdentityReport:
    residuals: dict

    @property
    def max_residual(self):
        return max(self.residuals.values())


def transform_identities_check(blocks):
    """Residuals of the four inversion identities linking Δ, D, K, A.

    With P± = D⁻¹ ± iAD⁻¹ and Q± = K ± iKA the identities read
    Δ = −P₊ D P₋,  D = −Q₊ Δ Q₋,  1 = −Q₋ P₊,  1 = −P₋ Q₊.
    """
    A, de, D, K = blocks.a, blocks.delta, blocks.d, blocks.k
    dinv = np.linalg.inv(D)
    p_plus = dinv + 1j * A @ dinv
    p_minus = dinv - 1j * A @ dinv
    q_plus = K + 1j * K @ A
    q_minus = K - 1j * K @ A
    eye = np.eye(blocks.dim)
    residuals = {
        "delta_from_d": float(np.max(np.abs(de + p_plus @ D @ p_minus))),
        "d_from_delta": float(np.max(np.abs(D + q_plus @ de @ q_minus))),
        "left_inverse": float(np.max(np.abs(eye + q_minus @ p_plus))),
        "right_inverse": float(np.max(np.abs(eye + p_minus @ q_plus))),
    }
    return IdentityReport(residuals)


def _sqrt_spd(mat):
    w, v = np.linalg.eigh(mat)
    if np.min(w) <= 0:
        raise ValueError("matrix is not positive definite")
    return (v * np.sqrt(w)) @ v.T


def null_shift_structure(theta, lapse):
    """Zero-shift structure: A = 0, Δ = Θ^{−1/2}N^{1/2}, D = −N^{−1/2}Θ^{1/2}."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    lapse = np.atleast_2d(np.asarray(lapse, dtype=float))
    th = _sqrt_spd(theta)
    nh = _sqrt_spd(lapse)
    delta = np.linalg.inv(th) @ nh
    d = -np.linalg.inv(nh) @ th
    k = np.linalg.inv(delta)
    return ComplexStructureBlocks(np.zeros_like(delta), delta, d, k)


@dataclass(frozen=True)
class DegenerateStructure:
    """Diagnostic for limits where the block description stops making sense."""

    reason: str


def huge_shift_structure(alpha, lam):
    """The vanishing-lapse limit has no block structure: Δ → 0, K singular.

    Returns a diagnostic instead of blocks; the structure survives only as
    the diagonal J of the pure-shift prescription (see interpolate_j).
    """
    del alpha, lam
    return DegenerateStructure("degenerate: Delta -> 0, K singular; quantization blocks undefined")


def _sqrt_positive_spectrum(mat, tol, what):
    """Square root of a (possibly non-normal) matrix with positive spectrum."""
    w, v = np.linalg.eig(mat)
    scale = max(1.0, float(np.max(np.abs(w))))
    if np.any(np.abs(w.imag) > tol * scale) or np.any(w.real <= tol * scale):
        raise NotAdmissibleError(f"spectrum of {what} is not positive")
    return v @ np.diag(np.sqrt(w.real)) @ np.linalg.inv(v)


def dynamical_j(f, tol=1e-10):
    """Polar prescription J = |F|⁻¹F with |F| = (−F²)^{1/2}.

    |F| is a function of F², hence commutes with F, which gives J² = −1 and
    [F, J] = 0 for free once the spectrum of −F² is positive.
    """
    f = np.asarray(f, dtype=complex)
    mod = _sqrt_positive_spectrum(-f @ f, tol, "-F^2")
    j = np.linalg.solve(mod, f)
    if np.all(np.abs(f.imag) == 0) and np.max(np.abs(j.imag)) < tol * max(
        1.0, np.max(np.abs(j.real))
    ):
        return j.real
    return j


def interpolate_j(f0_blocks, finf_blocks, tol=1e-8):
    """Mixed lapse/shift per-mode structure via the two limiting polar parts.

    ``f0_blocks`` = (lapse, theta) holds the positive scalars of the lapse
    generator [[0, N], [−Θ, 0]]; ``finf_blocks`` = (alpha, lam) holds the real
    per-mode symbols of the antisymmetric shift operators, which enter the
    generator as the imaginary diagonal [[iα, 0], [0, iΛ]].  Combines the
    limiting moduli through

        |F|² = |F₀|² + |F_∞|² − (|F₀|J₀J_∞|F_∞| + |F_∞|J_∞J₀|F₀|),

    then J = |F|⁻¹(|F₀|J₀ + |F_∞|J_∞).
    """
    lapse, theta = f0_blocks
    alpha, lam = finf_blocks
    if lapse < 0 or theta < 0:
        raise NotAdmissibleError("lapse and theta must be nonnegative")
    if (lapse > 0) != (theta > 0):
        raise NotAdmissibleError("lapse and theta must be both positive or both zero")
    f0_mod = np.sqrt(lapse * theta) * np.eye(2)
    finf_mod = np.diag([abs(alpha), abs(lam)])
    if lapse > 0:
        j0 = np.array([[0.0, np.sqrt(lapse / theta)], [-np.sqrt(theta / lapse), 0.0]])
    else:
        j0 = np.zeros((2, 2))
    jinf = 1j * np.diag([np.sign(alpha), np.sign(lam)])
    cross = f0_mod @ j0 @ jinf @ finf_mod + finf_mod @ jinf @ j0 @ f0_mod
    mod_sq = f0_mod @ f0_mod + finf_mod @ finf_mod - cross
    mod = _sqrt_positive_spectrum(mod_sq, tol, "|F|^2")
    return np.linalg.solve(mod, f0_mod @ j0 + finf_mod @ jinf)
