"""Truncated matrix realizations of the four quantization representations.

Operators act on the span of chaos basis vectors of degree ≤ cutoff.  The
basis is orthonormalized in the eigenframe of the representation covariance,
so the Hilbert adjoint is the conjugate transpose and ladder matrix entries
are exact square roots.  On top of the per-mode creation/annihilation pairs
the module builds Weyl and Wick quantization of polynomials, trigonometric
exponentials and their star products, and the induced expectation functional.

Degree-raising matrices necessarily truncate at the top degree; identities
involving them are therefore asserted on the interior (degree ≤ cutoff −
margin) where the truncation cannot leak.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .chaos import BiSymTensor, _bi_from_dense, complex_wick_order, complex_wick_order_inverse
from .symtensor import multiplicity

REPRESENTATIONS = ("holomorphic", "schrodinger", "antiholomorphic", "field-momentum")

__all__ = [
    "REPRESENTATIONS",
    "TrigExponential",
    "TruncatedOperator",
    "WeylWord",
    "annihilator_vacuum",
    "basis_indices",
    "basis_size",
    "classical_norm",
    "commutator_covariance",
    "conjugate_poly",
    "field_and_momentum",
    "gns_state",
    "interior_indices",
    "ladder_operators",
    "moyal_product",
    "operator_from_json",
    "operator_to_json",
    "quantize_exponential",
    "quantize_word",
    "weyl_norm_estimate",
    "weyl_quantize",
    "weyl_quantize_recursive",
    "wick_quantize",
    "wick_star",
]

_TAIL_TOL = 1e-12


def basis_indices(dim, cutoff):
    """Sorted multi-indices of degree ≤ cutoff, degree-major then lexicographic."""
    out = []
    for degree in range(cutoff + 1):
        out.extend(combinations_with_replacement(range(dim), degree))
    return tuple(out)


def basis_size(dim, cutoff):
    return math.comb(dim + cutoff, dim)


def interior_indices(dim, cutoff, margin):
    """Positions of basis vectors with degree ≤ cutoff − margin."""
    return np.array(
        [p for p, idx in enumerate(basis_indices(dim, cutoff)) if len(idx) <= cutoff - margin]
    )


@dataclass(frozen=True)
class TruncatedOperator:
    """A matrix on the degree-truncated chaos basis of one representation."""

    rep: str
    matrix: np.ndarray
    dim: int
    cutoff: int

    def __post_init__(self):
        if self.rep not in REPRESENTATIONS:
            raise ValueError(f"unknown representation {self.rep!r}")
        n = basis_size(self.dim, self.cutoff)
        if self.matrix.shape != (n, n):
            raise ValueError("matrix does not match the basis size")

    @property
    def basis(self):
        return basis_indices(self.dim, self.cutoff)

    def adjoint(self):
        return TruncatedOperator(self.rep, self.matrix.conj().T, self.dim, self.cutoff)

    def __matmul__(self, other):
        if (self.rep, self.dim, self.cutoff) != (other.rep, other.dim, other.cutoff):
            raise ValueError("operators live on different bases")
        return TruncatedOperator(self.rep, self.matrix @ other.matrix, self.dim, self.cutoff)


def _mode_ladders(dim, cutoff):
    """Unit-weight per-mode raising matrices: R_i e_J = sqrt(m_i+1) e_{J+e_i}."""
    basis = basis_indices(dim, cutoff)
    pos = {idx: p for p, idx in enumerate(basis)}
    n = len(basis)
    raises = [np.zeros((n, n)) for _ in range(dim)]
    for p, idx in enumerate(basis):
        if len(idx) == cutoff:
            continue
        for i in range(dim):
            target = tuple(sorted(idx + (i,)))
            raises[i][pos[target], p] = math.sqrt(idx.count(i) + 1)
    return raises


def _rep_frame(rep, blocks):
    """Eigendecomposition of the covariance that rules the representation."""
    gmat = blocks.delta if rep in ("holomorphic", "schrodinger") else -blocks.d
    lam, u = np.linalg.eigh(gmat)
    if np.min(lam) <= 0:
        raise ValueError("representation covariance is not positive definite")
    return gmat, lam, u


def ladder_operators(rep, blocks, cutoff):
    """Per-mode annihilation and creation matrices of the chosen representation.

    Complex-variable representations multiply by the variable (creation) and
    apply the covariance-contracted derivative (annihilation); the real-variable
    ones mix derivative and multiplication with the A-dependent term.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    gmat, lam, u = _rep_frame(rep, blocks)
    dim = gmat.shape[0]
    raises = _mode_ladders(dim, cutoff)
    lowers = [r.T for r in raises]

    def wrap(mat):
        return TruncatedOperator(rep, mat, dim, cutoff)

    if rep in ("holomorphic", "antiholomorphic"):
        ann = [sum(u[x, i] * math.sqrt(lam[i]) * lowers[i] for i in range(dim)) for x in range(dim)]
        cre = [sum(u[x, i] * math.sqrt(lam[i]) * raises[i] for i in range(dim)) for x in range(dim)]
        return [wrap(m) for m in ann], [wrap(m) for m in cre]

    # real-variable representations: Gaussian variance gmat/2 per mode
    half = lam / 2
    mult = [math.sqrt(half[i]) * (raises[i] + lowers[i]) for i in range(dim)]
    deriv = [lowers[i] / math.sqrt(half[i]) for i in range(dim)]
    var = [sum(u[x, i] * mult[i] for i in range(dim)) for x in range(dim)]
    contracted = [sum(u[x, i] * lam[i] * deriv[i] for i in range(dim)) for x in range(dim)]
    mix = blocks.a if rep == "schrodinger" else blocks.a.T
    mix_sign = -1j if rep == "schrodinger" else 1j
    sqrt2 = math.sqrt(2)
    ann, cre = [], []
    for x in range(dim):
        gen = contracted[x] + mix_sign * sum(mix[x, y] * var[y] for y in range(dim))
        ann.append(gen / sqrt2)
        cre.append(sqrt2 * var[x] - gen / sqrt2)
    return [wrap(m) for m in ann], [wrap(m) for m in cre]


def commutator_covariance(rep, blocks):
    """The matrix G with [a^x, a†^y] = G^{xy} in the given representation."""
    return blocks.delta if rep in ("holomorphic", "schrodinger") else -blocks.d


def field_and_momentum(rep, blocks, cutoff):
    """Quantized field and momentum per mode, built from the ladder pairs."""
    ann, cre = ladder_operators(rep, blocks, cutoff)
    dim = blocks.dim
    sqrt2 = math.sqrt(2)
    if rep in ("holomorphic", "schrodinger"):
        phi = [(ann[x].matrix + cre[x].matrix) / sqrt2 for x in range(dim)]
        pi = [
            sum(-1j * blocks.k[x, y] * (ann[y].matrix - cre[y].matrix) for y in range(dim)) / sqrt2
            for x in range(dim)
        ]
    else:
        dinv = np.linalg.inv(blocks.d)
        pi = [(ann[x].matrix + cre[x].matrix) / sqrt2 for x in range(dim)]
        phi = [
            sum(-1j * dinv[x, y] * (ann[y].matrix - cre[y].matrix) for y in range(dim)) / sqrt2
            for x in range(dim)
        ]
    wrap = lambda m: TruncatedOperator(rep, m, dim, cutoff)
    return [wrap(m) for m in phi], [wrap(m) for m in pi]


def annihilator_vacuum(ann):
    """The normalized basis vector killed by every annihilation operator.

    Solved as the least singular vector of the stacked matrices; the phase is
    fixed by making the largest-magnitude entry real positive.
    """
    stack = np.vstack([op.matrix for op in ann])
    _, svals, vh = np.linalg.svd(stack)
    vec = vh[-1].conj()
    peak = vec[np.argmax(np.abs(vec))]
    vec = vec * (abs(peak) / peak)
    return vec, svals[-1]


# ---------------------------------------------------------------------------
# polynomial quantization


def _as_bipoly(poly, dim):
    out = {}
    for (n, m), t in poly.items():
        if isinstance(t, BiSymTensor):
            out[(n, m)] = t
        else:
            arr = np.asarray(t, dtype=complex)
            if arr.ndim != n + m:
                raise ValueError("dense component rank mismatch")
            out[(n, m)] = _bi_from_dense(arr, n, m, dim)
    return out


def conjugate_poly(poly):
    """Complex conjugation of a bidegree polynomial: swap groups, conjugate."""
    out = {}
    for (n, m), t in poly.items():
        if isinstance(t, BiSymTensor):
            coeffs = {(right, left): np.conj(v) for (left, right), v in t.coeffs.items()}
            out[(m, n)] = BiSymTensor(m, n, t.dim, coeffs)
        else:
            arr = np.conj(np.asarray(t))
            out[(m, n)] = arr.transpose(tuple(range(n, n + m)) + tuple(range(n)))
    return out


def _assemble_normal_words(wick_coeffs, ann, cre, rep, dim, cutoff):
    size = basis_size(dim, cutoff)
    total = np.zeros((size, size), dtype=complex)
    eye = np.eye(size)
    for (n, m), t in wick_coeffs.items():
        if n + m > cutoff:
            raise ValueError("polynomial degree exceeds the cutoff")
        for (left, right), value in t.coeffs.items():
            weight = value * multiplicity(left) * multiplicity(right)
            word = eye
            for j in left:
                word = cre[j].matrix @ word
            tail = eye
            for l in right:
                tail = ann[l].matrix @ tail
            total = total + weight * (word @ tail)
    return TruncatedOperator(rep, total, dim, cutoff)


def weyl_quantize(poly, blocks, cutoff, rep="holomorphic", regulator_scale=1.0):
    """Symmetric-ordering quantization of a bidegree polynomial.

    The polynomial is re-expanded in Wick monomials with regulator
    regulator_scale·Δ/2, whose coefficients transfer verbatim to
    normal-ordered creation/annihilation words.
    """
    poly = _as_bipoly(poly, blocks.dim)
    reg = regulator_scale * blocks.delta / 2
    wick_coeffs = complex_wick_order_inverse(reg, poly)
    ann, cre = ladder_operators(rep, blocks, cutoff)
    return _assemble_normal_words(wick_coeffs, ann, cre, rep, blocks.dim, cutoff)


def weyl_quantize_recursive(poly, blocks, cutoff, rep="holomorphic", regulator_scale=1.0):
    """Same map through the slot-peeling recursion instead of Wick re-expansion.

    Peeling a field slot u gives a†^u·Q(rest) plus (reg/2-commutator)·Q of the
    conjugate-derivative of the rest; conjugate slots peel symmetrically onto
    the right.  Used as an independent route to cross-check weyl_quantize.
    """
    poly = _as_bipoly(poly, blocks.dim)
    ann, cre = ladder_operators(rep, blocks, cutoff)
    dim = blocks.dim
    size = basis_size(dim, cutoff)
    eye = np.eye(size)
    half = regulator_scale * blocks.delta / 2

    def quantize_dense(arr, n, m):
        if n + m > cutoff:
            raise ValueError("polynomial degree exceeds the cutoff")
        if n == 0 and m == 0:
            return complex(arr) * eye
        if n > 0:
            out = np.zeros((size, size), dtype=complex)
            for uu in range(dim):
                sub = arr[uu]
                out += cre[uu].matrix @ quantize_dense(sub, n - 1, m)
                if m > 0:
                    for z in range(dim):
                        out += half[uu, z] * quantize_dense(m * sub[..., z], n - 1, m - 1)
            return out
        out = np.zeros((size, size), dtype=complex)
        for v in range(dim):
            sub = arr[..., v]
            out += quantize_dense(sub, n, m - 1) @ ann[v].matrix
            # the field group is empty here, so the derivative term vanishes
        return out

    total = np.zeros((size, size), dtype=complex)
    for (n, m), t in poly.items():
        total += quantize_dense(np.asarray(t.to_dense(), dtype=complex), n, m)
    return TruncatedOperator(rep, total, dim, cutoff)


def wick_quantize(poly, blocks, cutoff, rep="holomorphic", regulator_scale=1.0):
    """Normal-ordering quantization: Wick-order first, then Weyl-quantize."""
    poly = _as_bipoly(poly, blocks.dim)
    reg = regulator_scale * blocks.delta / 2
    ordered = complex_wick_order(reg, poly)
    return weyl_quantize(ordered, blocks, cutoff, rep, regulator_scale)


# ---------------------------------------------------------------------------
# trigonometric exponentials and star products


@dataclass(frozen=True)
class TrigExponential:
    """E_χ = exp(i χ̄·φ + i χ·φ̄), or its Wick-ordered companion."""

    chi: tuple
    wick_ordered: bool = False


@dataclass(frozen=True)
class WeylWord:
    """Finite linear combination of trigonometric exponentials of one flavor."""

    terms: dict
    wick_ordered: bool = False

    @staticmethod
    def exponential(chi, weight=1.0, wick_ordered=False):
        key = tuple(complex(c) for c in np.atleast_1d(chi))
        return WeylWord({key: complex(weight)}, wick_ordered)

    @staticmethod
    def identity(dim, wick_ordered=False):
        return WeylWord({(0j,) * dim: 1.0 + 0j}, wick_ordered)

    def __add__(self, other):
        if self.wick_ordered != other.wick_ordered:
            raise ValueError("cannot mix plain and Wick-ordered words")
        terms = dict(self.terms)
        for chi, w in other.terms.items():
            terms[chi] = terms.get(chi, 0j) + w
        return WeylWord({c: w for c, w in terms.items() if w != 0}, self.wick_ordered)

    def __rmul__(self, scalar):
        return WeylWord({c: scalar * w for c, w in self.terms.items()}, self.wick_ordered)

    def conjugate(self):
        terms = {tuple(-c for c in chi): np.conj(w) for chi, w in self.terms.items()}
        return WeylWord(terms, self.wick_ordered)

    def exponentials(self):
        return [TrigExponential(chi, self.wick_ordered) for chi in self.terms]


def _cocycle(rho, alpha, delta):
    rho = np.asarray(rho)
    alpha = np.asarray(alpha)
    return np.exp((rho.conj() @ delta @ alpha - alpha.conj() @ delta @ rho) / 2)


def _star(f, g, blocks, wick_ordered):
    if f.wick_ordered != wick_ordered or g.wick_ordered != wick_ordered:
        raise ValueError("word flavor does not match the star product")
    terms = {}
    for rho, wf in f.terms.items():
        for alpha, wg in g.terms.items():
            key = tuple(r + a for r, a in zip(rho, alpha))
            weight = wf * wg * _cocycle(rho, alpha, blocks.delta)
            terms[key] = terms.get(key, 0j) + weight
    return WeylWord({c: w for c, w in terms.items() if w != 0}, wick_ordered)


def moyal_product(f, g, blocks):
    """E_ρ ⋆ E_α = exp((ρ̄Δα − ᾱΔρ)/2) E_{ρ+α}, extended bilinearly."""
    return _star(f, g, blocks, wick_ordered=False)


def wick_star(f, g, blocks):
    """Same antisymmetric cocycle on the Wick-ordered generators."""
    return _star(f, g, blocks, wick_ordered=True)


def _nilpotent_expm(mat, order):
    out = np.eye(mat.shape[0], dtype=complex)
    term = out
    for k in range(1, order + 1):
        term = term @ mat / k
        out = out + term
    return out


def quantize_exponential(chi, blocks, cutoff, rep="holomorphic", tail_tol=_TAIL_TOL):
    """Q(E_χ) as Gaussian scalar × raising exponential × lowering exponential.

    The exponentials terminate exactly on the truncated basis; the scalar is
    the normal-ordering factor exp(−χ̄Gχ/2) for the representation commutator
    G.  Requires the first dropped series order to satisfy ‖χ‖ⁿ/n! < tail_tol;
    the bound is a conservative whole-space estimate, so callers checking
    interior residuals may loosen it explicitly.
    """
    chi = np.atleast_1d(np.asarray(chi, dtype=complex))
    gmat = commutator_covariance(rep, blocks)
    z = np.linalg.norm(chi) * math.sqrt(max(1.0, np.linalg.norm(gmat, 2)))
    if z ** (cutoff + 1) / math.factorial(cutoff + 1) > tail_tol:
        raise ValueError("coherent tail exceeds tolerance; increase the cutoff")
    ann, cre = ladder_operators(rep, blocks, cutoff)
    raise_gen = sum(1j * np.conj(chi[x]) * cre[x].matrix for x in range(blocks.dim))
    lower_gen = sum(1j * chi[x] * ann[x].matrix for x in range(blocks.dim))
    scalar = np.exp(-0.5 * chi.conj() @ gmat @ chi)
    mat = scalar * _nilpotent_expm(raise_gen, cutoff) @ _nilpotent_expm(lower_gen, cutoff)
    return TruncatedOperator(rep, mat, blocks.dim, cutoff)


def quantize_word(word, blocks, cutoff, rep="holomorphic", tail_tol=_TAIL_TOL):
    """Quantize a finite exponential combination term by term.

    Wick-ordered generators quantize to the same matrices as the plain ones:
    the Wick regulator cancels the Gaussian normalization scalar exactly.
    """
    size = basis_size(blocks.dim, cutoff)
    total = np.zeros((size, size), dtype=complex)
    for chi, weight in word.terms.items():
        total += weight * quantize_exponential(chi, blocks, cutoff, rep, tail_tol).matrix
    return TruncatedOperator(rep, total, blocks.dim, cutoff)


def gns_state(chi, blocks):
    """Vacuum expectation of the quantized exponential: exp(−χ̄Δχ/2)."""
    chi = np.atleast_1d(np.asarray(chi, dtype=complex))
    return np.exp(-0.5 * chi.conj() @ blocks.delta @ chi)


def classical_norm(word, blocks):
    """L² norm of a plain exponential combination under the Weyl measure."""
    if word.wick_ordered:
        raise ValueError("classical norm is defined on the plain flavor")
    total = 0j
    for chi_n, wn in word.terms.items():
        for chi_m, wm in word.terms.items():
            diff = np.asarray(chi_m) - np.asarray(chi_n)
            total += np.conj(wn) * wm * np.exp(-0.5 * diff.conj() @ blocks.delta @ diff)
    return math.sqrt(max(total.real, 0.0))


def weyl_norm_estimate(word, blocks, cutoff, rep="holomorphic", tail_tol=_TAIL_TOL):
    """Spectral norm of the quantized word on the truncated space."""
    return float(np.linalg.norm(quantize_word(word, blocks, cutoff, rep, tail_tol).matrix, 2))


# ---------------------------------------------------------------------------
# export


def operator_to_json(op):
    rows = [[[float(v.real), float(v.imag)] for v in row] for row in op.matrix]
    return {"rep": op.rep, "cutoff": op.cutoff, "dim": op.dim, "rows": rows}


def operator_from_json(payload):
    mat = np.array(
        [[complex(re, im) for re, im in row] for row in payload["rows"]], dtype=complex
    )
    return TruncatedOperator(payload["rep"], mat, payload["dim"], payload["cutoff"])
