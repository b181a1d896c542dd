"""Wick calculus and chaos decompositions over a Gaussian covariance.

A state is stored by its coefficients against the Wick-monomial basis: a dict
``{degree: SymTensor}`` for the real and holomorphic flavors, and
``{(n, m): BiSymTensor}`` for the bidegree flavor, where the two index groups
carry holomorphic and antiholomorphic slots separately.

Polynomials (coefficients against plain monomials) use the same dict shapes.
Conversion between the two bases is the exponential of the covariance
Laplacian, implemented twice on purpose: once as the iterated-Laplacian
exponential (``wick_order``) and once through the closed binomial /
double-factorial coefficients (``chaos_to_polynomial``); the test suite pins
them against each other exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as cartesian

import numpy as np

from .gaussian import Covariance
from .symtensor import (
    SymTensor,
    TruncationError,
    contract,
    multiplicity,
    multiset_permutations,
    pair,
    sorted_indices,
    sym_product,
    symmetrize,
)

__all__ = [
    "hermite",
    "wick_recursion_coefficients",
    "wick_monomial",
    "wick_order",
    "wick_order_inverse",
    "chaos_to_polynomial",
    "polynomial_to_chaos",
    "poly_eval",
    "wick_product",
    "ChaosState",
    "evaluate_state",
    "inner_product",
    "norm",
    "pointwise_product",
    "s_transform",
    "coefficients_from_s",
    "FockVector",
    "segal_isomorphism",
    "segal_inverse",
    "fock_inner_product",
    "VectorField",
    "vector_field",
    "malliavin_derivative",
    "skorokhod_integral",
    "vector_inner_product",
    "number_operator",
    "charge_operator",
    "BiSymTensor",
    "complex_wick_order",
    "complex_wick_order_inverse",
    "bipoly_eval",
    "state_to_json",
    "state_from_json",
]


def hermite(n, t):
    """Probabilists' Hermite polynomial H_n(t) by the three-term recursion."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    prev, cur = 1.0, t
    if n == 0:
        return prev * np.ones_like(t) if isinstance(t, np.ndarray) else 1.0
    for k in range(2, n + 1):
        prev, cur = cur, t * cur - (k - 1) * prev
    return cur


def _delta(cov):
    """Covariance matrix from a Covariance or a plain (possibly exact) matrix."""
    mat = getattr(cov, "matrix", cov)
    return mat if isinstance(mat, np.ndarray) else np.asarray(mat)


def _double_factorial(k):
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def _acc(out, key, t):
    if not t.coeffs:
        return
    cur = out.get(key)
    out[key] = t if cur is None else cur + t


def _prune(poly):
    """Drop components that cancelled to zero during accumulation."""
    return {k: t for k, t in poly.items() if t.coeffs}


# ---------------------------------------------------------------------------
# polynomials and the Wick-order operator


def poly_eval(poly, phi):
    """Evaluate a polynomial coefficient dict at the point phi."""
    return sum(t.evaluate(phi) for t in poly.values())


def _exp_half_laplacian(poly, delta, sign):
    """exp(sign · ½ Δ∂∂) on a polynomial dict, term by term.

    On a homogeneous degree-n component the k-th term carries the integer
    n! / (2^k k! (n−2k)!) and k successive slot-pair contractions.
    """
    out = {}
    for n, t in poly.items():
        cur = t
        _acc(out, n, t)
        for k in range(1, n // 2 + 1):
            cur = contract(cur, [(0, 1)], delta)
            c = sign**k * (
                math.factorial(n) // (2**k * math.factorial(k) * math.factorial(n - 2 * k))
            )
            _acc(out, n - 2 * k, c * cur)
    return _prune(out)


def wick_order(cov, poly):
    """Apply exp(−½Δ∂∂): maps the monomial φⁿ to the Wick monomial :φⁿ:."""
    return _exp_half_laplacian(poly, _delta(cov), -1)


def wick_order_inverse(cov, poly):
    """Apply exp(+½Δ∂∂), the inverse Wick order (same operator with −Δ)."""
    return _exp_half_laplacian(poly, _delta(cov), +1)


def _closed_convert(poly, delta, sign):
    """Basis conversion through the closed coefficients C(n,2k)(2k−1)!!."""
    out = {}
    for n, t in poly.items():
        for k in range(n // 2 + 1):
            c = sign**k * math.comb(n, 2 * k) * _double_factorial(2 * k - 1)
            term = contract(t, [(2 * i, 2 * i + 1) for i in range(k)], delta) if k else t
            _acc(out, n - 2 * k, c * term)
    return _prune(out)


def chaos_to_polynomial(cov, coeffs):
    """Monomial coefficients of Σ ψ⁽ⁿ⁾·:φⁿ: given the chaos coefficients."""
    return _closed_convert(coeffs, _delta(cov), -1)


def polynomial_to_chaos(cov, poly):
    """Chaos coefficients of a polynomial: the conversion with +Δ signs."""
    return _closed_convert(poly, _delta(cov), +1)


def wick_recursion_coefficients(variance, n):
    """Coefficients of the scalar Wick power :sⁿ: for Var(s) = variance.

    Three-term recursion p_{k+1} = s·p_k − k·variance·p_{k−1}; exact when
    ``variance`` is a Fraction or integer.  Returns a list indexed by degree.
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    prev = [1]
    if n == 0:
        return prev
    cur = [0, 1]
    for k in range(1, n):
        nxt = [0] * (k + 2)
        for m, c in enumerate(cur):
            nxt[m + 1] += c
        for m, c in enumerate(prev):
            nxt[m] -= k * variance * c
        prev, cur = cur, nxt
    return cur


def _power_seed(u, n, dim):
    """Rank-n seed with components Π u[j], i.e. the direction power u^⊗n."""
    coeffs = {}
    for key in sorted_indices(dim, n):
        v = 1
        for j in key:
            v = v * u[j]
        if v != 0:
            coeffs[key] = v
    return SymTensor(n, dim, coeffs)


def wick_monomial(cov, n, seed=None):
    """Polynomial expansion of the degree-n Wick monomial contracted with a seed.

    ``seed`` is a rank-n SymTensor of coefficients, or a length-d direction
    vector u (the expansion of :(u·φ)ⁿ:); by default the φ₀ direction, which
    in d = 1 is the scalar case.  Returns a polynomial dict by degree.
    """
    delta = _delta(cov)
    d = delta.shape[0]
    if seed is None:
        seed = SymTensor(n, d, {(0,) * n: 1})
    elif not isinstance(seed, SymTensor):
        seed = _power_seed(np.asarray(seed) if not hasattr(seed, "__getitem__") else seed, n, d)
    if seed.rank != n:
        raise ValueError(f"seed rank {seed.rank} does not match degree {n}")
    return _closed_convert({n: seed}, delta, -1)


# ---------------------------------------------------------------------------
# bidegree tensors (separate holomorphic / antiholomorphic index groups)


@dataclass(frozen=True)
class BiSymTensor:
    """Coefficients symmetric within each of two index groups, never across.

    ``coeffs`` maps pairs of sorted tuples (J, L) — J the holomorphic group of
    length ``left_rank``, L the antiholomorphic group of length ``right_rank``
    — to values; absent keys are zero.
    """

    left_rank: int
    right_rank: int
    dim: int
    coeffs: dict

    def __post_init__(self):
        for jl, lr in ((0, self.left_rank), (1, self.right_rank)):
            for key in self.coeffs:
                part = key[jl]
                if len(part) != lr:
                    raise ValueError(f"group {jl} of key {key} has wrong length")
                if tuple(sorted(part)) != tuple(part):
                    raise ValueError(f"group {jl} of key {key} is not sorted")
                if any(not (0 <= x < self.dim) for x in part):
                    raise ValueError(f"key {key} out of range for dim {self.dim}")

    def __getitem__(self, key):
        j, l = key
        return self.coeffs.get((tuple(sorted(j)), tuple(sorted(l))), 0)

    def map_values(self, fn):
        return BiSymTensor(
            self.left_rank, self.right_rank, self.dim,
            {k: fn(v) for k, v in self.coeffs.items()},
        )

    def __add__(self, other):
        if (other.left_rank, other.right_rank, other.dim) != (
            self.left_rank, self.right_rank, self.dim,
        ):
            raise ValueError("shape mismatch in bidegree sum")
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return BiSymTensor(
            self.left_rank, self.right_rank, self.dim,
            {k: v for k, v in out.items() if v != 0},
        )

    def __sub__(self, other):
        return self + other.map_values(lambda v: -v)

    def __rmul__(self, scalar):
        return self.map_values(lambda v: scalar * v)

    def to_dense(self):
        arr = np.zeros((self.dim,) * (self.left_rank + self.right_rank), dtype=complex)
        for (j, l), v in self.coeffs.items():
            for pj in multiset_permutations(j) if j else ((),):
                for pl in multiset_permutations(l) if l else ((),):
                    arr[pj + pl] = complex(v)
        return arr

    def evaluate(self, z, zbar):
        total = 0
        for (j, l), v in self.coeffs.items():
            term = v * multiplicity(j) * multiplicity(l)
            for x in j:
                term = term * z[x]
            for x in l:
                term = term * zbar[x]
            total = total + term
        return total

    @staticmethod
    def unit(dim, left, right, value=1):
        key = (tuple(sorted(left)), tuple(sorted(right)))
        return BiSymTensor(len(key[0]), len(key[1]), dim, {key: value})

    @staticmethod
    def zero(dim, left_rank, right_rank):
        return BiSymTensor(left_rank, right_rank, dim, {})


def _bi_from_dense(arr, left_rank, right_rank, dim):
    """Group-wise symmetrization of a dense array back into a BiSymTensor."""
    coeffs = {}
    for j in sorted_indices(dim, left_rank):
        for l in sorted_indices(dim, right_rank):
            total = 0.0
            count = 0
            for pj in multiset_permutations(j) if j else ((),):
                for pl in multiset_permutations(l) if l else ((),):
                    total += arr[pj + pl]
                    count += 1
            if total != 0:
                coeffs[(j, l)] = total / count
    return BiSymTensor(left_rank, right_rank, dim, coeffs)


def _bi_mixed_contract(t, delta):
    """Contract one holomorphic slot against one antiholomorphic slot via Δ."""
    nl, nr = t.left_rank, t.right_rank
    if nl == 0 or nr == 0:
        return BiSymTensor.zero(t.dim, max(nl - 1, 0), max(nr - 1, 0))
    arr = t.to_dense()
    md = np.asarray(delta, dtype=complex)
    # Σ_{x,y} Δ[x,y] · arr[y, J'; x, L']: pull in the first slot of each group.
    tmp = np.tensordot(md, arr, axes=([1], [0]))  # axes: x, J'(nl−1), L(nr)
    out = np.trace(tmp, axis1=0, axis2=nl)
    return _bi_from_dense(out, nl - 1, nr - 1, t.dim)


def _bi_exp_mixed(bipoly, delta, sign):
    out = {}
    for (n, m), t in bipoly.items():
        cur = t
        _acc(out, (n, m), t)
        for k in range(1, min(n, m) + 1):
            cur = _bi_mixed_contract(cur, delta)
            c = sign**k * math.factorial(k) * math.comb(n, k) * math.comb(m, k)
            _acc(out, (n - k, m - k), c * cur)
    return _prune(out)


def complex_wick_order(cov, bipoly):
    """exp(−Δ ∂_φ̄ ∂_φ) on a bidegree polynomial dict."""
    return _bi_exp_mixed(bipoly, _delta(cov), -1)


def complex_wick_order_inverse(cov, bipoly):
    """The inverse operator; identical with the sign of Δ flipped."""
    return _bi_exp_mixed(bipoly, _delta(cov), +1)


def bipoly_eval(bipoly, z, zbar):
    return sum(t.evaluate(z, zbar) for t in bipoly.values())


def _bipair(a, b, delta):
    """⟨a, b⟩ with Δ on every holomorphic slot, Δ̄ on every antiholomorphic one."""
    if (a.left_rank, a.right_rank) != (b.left_rank, b.right_rank):
        raise ValueError("bidegree mismatch in pairing")
    if a.left_rank == 0 and a.right_rank == 0:
        return np.conjugate(complex(a.coeffs.get(((), ()), 0))) * complex(
            b.coeffs.get(((), ()), 0)
        )
    md = np.asarray(delta, dtype=complex)
    db = b.to_dense()
    for axis in range(a.left_rank):
        db = np.moveaxis(np.tensordot(md, db, axes=([1], [axis])), 0, axis)
    for axis in range(a.left_rank, a.left_rank + a.right_rank):
        db = np.moveaxis(np.tensordot(np.conjugate(md), db, axes=([1], [axis])), 0, axis)
    return complex(np.vdot(a.to_dense(), db))


def _bi_product_pair(t1, t2):
    arr = np.tensordot(t1.to_dense(), t2.to_dense(), axes=0)
    # axes are [L1 | R1 | L2 | R2]; interleave to [L1 L2 | R1 R2]
    order = (
        list(range(t1.left_rank))
        + list(range(t1.left_rank + t1.right_rank, t1.left_rank + t1.right_rank + t2.left_rank))
        + list(range(t1.left_rank, t1.left_rank + t1.right_rank))
        + list(
            range(
                t1.left_rank + t1.right_rank + t2.left_rank,
                t1.left_rank + t1.right_rank + t2.left_rank + t2.right_rank,
            )
        )
    )
    arr = np.transpose(arr, order) if arr.ndim else arr
    return _bi_from_dense(
        np.asarray(arr, dtype=complex),
        t1.left_rank + t2.left_rank,
        t1.right_rank + t2.right_rank,
        t1.dim,
    )


# ---------------------------------------------------------------------------
# chaos states


_FLAVORS = ("real", "holomorphic", "bidegree")


@dataclass(frozen=True)
class ChaosState:
    """Chaos expansion: coefficients by degree against the Wick basis."""

    flavor: str
    covariance: Covariance
    cutoff: int
    coeffs: dict

    def __post_init__(self):
        if self.flavor not in _FLAVORS:
            raise ValueError(f"unknown flavor {self.flavor!r}")
        d = self.covariance.dim
        for key, t in self.coeffs.items():
            if self.flavor == "bidegree":
                n, m = key
                if (t.left_rank, t.right_rank) != (n, m) or t.dim != d:
                    raise ValueError(f"coefficient shape mismatch at degree {key}")
                if n + m > self.cutoff:
                    raise ValueError(f"degree {key} exceeds cutoff {self.cutoff}")
            else:
                if t.rank != key or t.dim != d:
                    raise ValueError(f"coefficient shape mismatch at degree {key}")
                if key > self.cutoff:
                    raise ValueError(f"degree {key} exceeds cutoff {self.cutoff}")
            for v in t.coeffs.values():
                if not math.isfinite(abs(complex(v))):
                    raise ValueError("non-finite coefficient")

    @property
    def degrees(self):
        return sorted(self.coeffs)

    def coefficient(self, key):
        t = self.coeffs.get(key)
        if t is not None:
            return t
        d = self.covariance.dim
        if self.flavor == "bidegree":
            return BiSymTensor.zero(d, key[0], key[1])
        return SymTensor.zero(d, key)

    def __add__(self, other):
        _check_compatible(self, other)
        out = dict(self.coeffs)
        for k, t in other.coeffs.items():
            out[k] = out[k] + t if k in out else t
        return ChaosState(self.flavor, self.covariance, self.cutoff, out)

    def __rmul__(self, scalar):
        return ChaosState(
            self.flavor, self.covariance, self.cutoff,
            {k: scalar * t for k, t in self.coeffs.items()},
        )


def _check_compatible(a, b):
    if a.flavor != b.flavor:
        raise ValueError("flavor mismatch")
    if a.cutoff != b.cutoff:
        raise ValueError("cutoff mismatch")
    if not np.array_equal(
        np.asarray(a.covariance.matrix, dtype=complex),
        np.asarray(b.covariance.matrix, dtype=complex),
    ):
        raise ValueError("covariance mismatch")


def evaluate_state(state, phi, phibar=None):
    """Value of the state at a field point (bidegree defaults φ̄ = conj φ)."""
    if state.flavor == "real":
        return poly_eval(chaos_to_polynomial(state.covariance, state.coeffs), phi)
    if state.flavor == "holomorphic":
        # holomorphic polynomials carry no antiholomorphic slots, so the mixed
        # Laplacian vanishes and Wick order is the identity
        return poly_eval(state.coeffs, phi)
    if phibar is None:
        phibar = np.conjugate(np.asarray(phi))
    return bipoly_eval(complex_wick_order(state.covariance, state.coeffs), phi, phibar)


def inner_product(a, b):
    """Hermitian chaos inner product: degree-diagonal factorial-weighted pairings."""
    _check_compatible(a, b)
    delta = _delta(a.covariance)
    total = 0.0 + 0.0j
    if a.flavor == "bidegree":
        for key in set(a.coeffs) & set(b.coeffs):
            n, m = key
            total += (
                math.factorial(n)
                * math.factorial(m)
                * _bipair(a.coeffs[key], b.coeffs[key], delta)
            )
        return total
    for n in set(a.coeffs) & set(b.coeffs):
        total += math.factorial(n) * pair(a.coeffs[n], b.coeffs[n], delta)
    return total


def norm(state):
    return math.sqrt(max(inner_product(state, state).real, 0.0))


def _cross_contract(a, b, k, delta):
    """Contract k slots of a against k slots of b through Δ, symmetrize the rest."""
    if k == 0:
        return sym_product(a, b)
    md = np.asarray(delta, dtype=complex)
    db = b.to_dense()
    for axis in range(k):
        db = np.moveaxis(np.tensordot(md, db, axes=([1], [axis])), 0, axis)
    raw = np.tensordot(a.to_dense(), db, axes=(tuple(range(k)), tuple(range(k))))
    return symmetrize(raw, dim=a.dim)


def wick_product(cov, n, m, a=None, b=None, cutoff=None, on_truncate="error"):
    """Chaos expansion of the product of two Wick monomials.

    The degree-(n+m−2k) coefficient carries k! C(n,k) C(m,k) and a k-fold Δ
    cross-contraction of the seeds (defaults: the φ₀-power seeds, which is the
    scalar case in d = 1).  Returns a chaos coefficient dict.
    """
    delta = _delta(cov)
    d = delta.shape[0]
    if a is None:
        a = SymTensor(n, d, {(0,) * n: 1})
    if b is None:
        b = SymTensor(m, d, {(0,) * m: 1})
    if a.rank != n or b.rank != m:
        raise ValueError("seed ranks must match the stated degrees")
    out = {}
    for k in range(min(n, m) + 1):
        deg = n + m - 2 * k
        if cutoff is not None and deg > cutoff:
            if on_truncate == "error":
                raise TruncationError(f"product degree {deg} exceeds cutoff {cutoff}")
            if on_truncate == "drop":
                continue
            raise ValueError(f"unknown truncation policy {on_truncate!r}")
        c = math.factorial(k) * math.comb(n, k) * math.comb(m, k)
        _acc(out, deg, c * _cross_contract(a, b, k, delta))
    return _prune(out)


def pointwise_product(a, b, on_truncate="error"):
    """Pointwise product of two chaos states of the same flavor and covariance."""
    _check_compatible(a, b)
    cov, cut = a.covariance, a.cutoff
    if a.flavor == "real":
        out = {}
        for n, ta in a.coeffs.items():
            for m, tb in b.coeffs.items():
                part = wick_product(cov, n, m, ta, tb, cutoff=cut, on_truncate=on_truncate)
                for deg, t in part.items():
                    _acc(out, deg, t)
        return ChaosState("real", cov, cut, _prune(out))
    if a.flavor == "holomorphic":
        out = {}
        for n, ta in a.coeffs.items():
            for m, tb in b.coeffs.items():
                if n + m > cut:
                    if on_truncate == "error":
                        raise TruncationError(f"product degree {n + m} exceeds cutoff {cut}")
                    if on_truncate == "drop":
                        continue
                    raise ValueError(f"unknown truncation policy {on_truncate!r}")
                _acc(out, n + m, sym_product(ta, tb))
        return ChaosState("holomorphic", cov, cut, _prune(out))
    # bidegree: un-Wick, multiply the ordinary bidegree polynomials, re-Wick
    pa = complex_wick_order(cov, a.coeffs)
    pb = complex_wick_order(cov, b.coeffs)
    prod = {}
    for (n1, m1), t1 in pa.items():
        for (n2, m2), t2 in pb.items():
            deg = n1 + m1 + n2 + m2
            if deg > cut:
                if on_truncate == "error":
                    raise TruncationError(f"product degree {deg} exceeds cutoff {cut}")
                if on_truncate == "drop":
                    continue
                raise ValueError(f"unknown truncation policy {on_truncate!r}")
            _acc(prod, (n1 + n2, m1 + m2), _bi_product_pair(t1, t2))
    return ChaosState("bidegree", cov, cut, complex_wick_order_inverse(cov, prod))


# ---------------------------------------------------------------------------
# generating-function (S) side


def s_transform(state, xi):
    """Generating function Σ ψ⁽ⁿ⁾·(Δξ)^⊗n of a chaos state."""
    delta = np.asarray(_delta(state.covariance), dtype=complex)
    eta = delta @ np.asarray(xi, dtype=complex)
    if state.flavor == "bidegree":
        etabar = np.conjugate(eta)
        return sum(t.evaluate(eta, etabar) for t in state.coeffs.values())
    return sum(t.evaluate(eta) for t in state.coeffs.values())


def coefficients_from_s(func, cov, cutoff, flavor="real", step=0.5):
    """Recover chaos coefficients from the generating function.

    Samples func on a tensor grid in the variables η = Δξ (so ξ = Kη walks
    through the inverse covariance) and inverts the one-dimensional
    power-basis design matrix along every axis — the exact finite-difference
    scheme for polynomials of degree ≤ cutoff.  ``step`` scales the grid.
    """
    if flavor not in ("real", "holomorphic"):
        raise ValueError("extraction supports the single-group flavors only")
    if step <= 0:
        raise ValueError("step must be positive")
    kmat = np.asarray(cov.inverse, dtype=float)
    d = cov.dim
    npts = cutoff + 1
    if npts == 1:
        pts = np.array([0.0])
    else:
        pts = step * max(cutoff, 1) * np.cos(np.pi * np.arange(npts) / (npts - 1))
    design = np.vander(pts, npts, increasing=True)
    cond = np.linalg.cond(design)
    if not np.isfinite(cond) or cond > 1e12:
        raise ValueError("finite-difference grid is degenerate; adjust step")
    inv_design = np.linalg.inv(design)

    values = np.empty((npts,) * d, dtype=complex)
    for grid_key in cartesian(range(npts), repeat=d):
        eta = np.array([pts[i] for i in grid_key])
        values[grid_key] = func(kmat @ eta)
    coeff_grid = values
    for axis in range(d):
        coeff_grid = np.moveaxis(
            np.tensordot(inv_design, coeff_grid, axes=([1], [axis])), 0, axis
        )

    coeffs = {}
    for n in range(cutoff + 1):
        entries = {}
        for key in sorted_indices(d, n):
            counts = [0] * d
            for x in key:
                counts[x] += 1
            c = coeff_grid[tuple(counts)]
            if c != 0:
                entries[key] = c / multiplicity(key)
        if entries:
            coeffs[n] = SymTensor(n, d, entries)
    return ChaosState(flavor, cov, cutoff, coeffs)


# ---------------------------------------------------------------------------
# Fock side (Segal isomorphism)


@dataclass(frozen=True)
class FockVector:
    """Square-root-factorial-weighted coefficients; norms match the chaos side."""

    flavor: str
    covariance: Covariance
    cutoff: int
    coeffs: dict


def _segal_weight(key, flavor):
    if flavor == "bidegree":
        return math.sqrt(math.factorial(key[0]) * math.factorial(key[1]))
    return math.sqrt(math.factorial(key))


def segal_isomorphism(state):
    return FockVector(
        state.flavor, state.covariance, state.cutoff,
        {k: _segal_weight(k, state.flavor) * t for k, t in state.coeffs.items()},
    )


def segal_inverse(fv):
    return ChaosState(
        fv.flavor, fv.covariance, fv.cutoff,
        {k: (1.0 / _segal_weight(k, fv.flavor)) * t for k, t in fv.coeffs.items()},
    )


def fock_inner_product(a, b):
    """Degree-diagonal Δ-pairings without factorial weights."""
    if a.flavor != b.flavor:
        raise ValueError("flavor mismatch")
    delta = _delta(a.covariance)
    total = 0.0 + 0.0j
    for key in set(a.coeffs) & set(b.coeffs):
        if a.flavor == "bidegree":
            total += _bipair(a.coeffs[key], b.coeffs[key], delta)
        else:
            total += pair(a.coeffs[key], b.coeffs[key], delta)
    return total


# ---------------------------------------------------------------------------
# Malliavin derivative, Skorokhod integral, number and charge


@dataclass(frozen=True)
class VectorField:
    """Direction-indexed chaos expansion: degree-c coefficients of rank c+1.

    The direction slot is stored jointly symmetrized with the chaos slots
    (fields fed to the Skorokhod integral are symmetrized anyway; the
    asymmetric part is deliberately discarded on construction).
    """

    flavor: str
    covariance: Covariance
    cutoff: int
    coeffs: dict

    def __post_init__(self):
        d = self.covariance.dim
        for c, t in self.coeffs.items():
            if t.rank != c + 1 or t.dim != d:
                raise ValueError(f"vector-field coefficient at degree {c} has rank {t.rank}")

    def component(self, x):
        """Freeze the direction index: an ordinary ChaosState."""
        out = {}
        for c, t in self.coeffs.items():
            part = symmetrize(t.to_dense()[x], dim=t.dim)
            if part.coeffs:
                out[c] = part
        return ChaosState(self.flavor, self.covariance, self.cutoff, out)


def vector_field(cov, cutoff, coeffs, flavor="real"):
    """Build a VectorField; dense ndarray entries are symmetrized on the way in."""
    fixed = {}
    for c, t in coeffs.items():
        if not isinstance(t, SymTensor):
            t = symmetrize(np.asarray(t))
        if t.coeffs:
            fixed[c] = t
    return VectorField(flavor, cov, cutoff, fixed)


def malliavin_derivative(state):
    """Degree-lowering derivative: the degree-(n−1) coefficient is n·ψ⁽ⁿ⁾."""
    if state.flavor == "bidegree":
        raise NotImplementedError("derivative is provided for the single-group flavors")
    out = {}
    for n, t in state.coeffs.items():
        if n >= 1:
            out[n - 1] = n * t
    return VectorField(state.flavor, state.covariance, state.cutoff, out)


def skorokhod_integral(vfield, on_truncate="error"):
    """Degree-raising adjoint: symmetrize and shift each coefficient up one degree."""
    out = {}
    for c, t in vfield.coeffs.items():
        if c + 1 > vfield.cutoff:
            if on_truncate == "error":
                raise TruncationError(f"degree {c + 1} exceeds cutoff {vfield.cutoff}")
            if on_truncate == "drop":
                continue
            raise ValueError(f"unknown truncation policy {on_truncate!r}")
        out[c + 1] = t
    return ChaosState(vfield.flavor, vfield.covariance, vfield.cutoff, out)


def vector_inner_product(u, v):
    """Σ c! ⟨u⁽ᶜ⁾, v⁽ᶜ⁾⟩ with Δ on the chaos slots and identity on the direction."""
    delta = np.asarray(_delta(u.covariance), dtype=complex)
    total = 0.0 + 0.0j
    for c in set(u.coeffs) & set(v.coeffs):
        tu, tv = u.coeffs[c], v.coeffs[c]
        dv = tv.to_dense()
        for axis in range(1, tv.rank):
            dv = np.moveaxis(np.tensordot(delta, dv, axes=([1], [axis])), 0, axis)
        total += math.factorial(c) * complex(np.vdot(tu.to_dense(), dv))
    return total


def number_operator(state):
    """Multiply each coefficient by its total degree."""
    if state.flavor == "bidegree":
        out = {k: (k[0] + k[1]) * t for k, t in state.coeffs.items() if k != (0, 0)}
    else:
        out = {n: n * t for n, t in state.coeffs.items() if n != 0}
    return ChaosState(state.flavor, state.covariance, state.cutoff, out)


def charge_operator(state):
    """Multiply each bidegree (n, m) coefficient by n − m."""
    if state.flavor != "bidegree":
        raise ValueError("charge acts on bidegree states")
    out = {k: (k[0] - k[1]) * t for k, t in state.coeffs.items() if k[0] != k[1]}
    return ChaosState(state.flavor, state.covariance, state.cutoff, out)


# ---------------------------------------------------------------------------
# serialization


def _matrix_to_json(mat):
    arr = np.asarray(mat, dtype=complex)
    out = {"re": arr.real.tolist()}
    if np.any(arr.imag):
        out["im"] = arr.imag.tolist()
    return out


def _matrix_from_json(obj):
    mat = np.asarray(obj["re"], dtype=float)
    if "im" in obj:
        mat = mat + 1j * np.asarray(obj["im"])
    return mat


def state_to_json(state):
    """Serialize a ChaosState to a JSON string."""
    blocks = []
    for key in sorted(state.coeffs):
        t = state.coeffs[key]
        entries = []
        if state.flavor == "bidegree":
            for (j, l), v in sorted(t.coeffs.items()):
                v = complex(v)
                entries.append({"index": [list(j), list(l)], "re": v.real, "im": v.imag})
            degree = list(key)
        else:
            for idx, v in sorted(t.coeffs.items()):
                v = complex(v)
                entries.append({"index": list(idx), "re": v.real, "im": v.imag})
            degree = key
        blocks.append({"degree": degree, "entries": entries})
    doc = {
        "flavor": state.flavor,
        "dim": state.covariance.dim,
        "cutoff": state.cutoff,
        "covariance": {
            "flavor": state.covariance.flavor,
            "matrix": _matrix_to_json(state.covariance.matrix),
        },
        "coeffs": blocks,
    }
    return json.dumps(doc, indent=2)


def state_from_json(text):
    doc = json.loads(text)
    mat = _matrix_from_json(doc["covariance"]["matrix"])
    cov = Covariance(mat, np.linalg.inv(mat), doc["covariance"]["flavor"])
    d = doc["dim"]
    coeffs = {}
    for block in doc["coeffs"]:
        if doc["flavor"] == "bidegree":
            n, m = block["degree"]
            entries = {}
            for e in block["entries"]:
                j, l = e["index"]
                entries[(tuple(j), tuple(l))] = e["re"] + 1j * e["im"]
            coeffs[(n, m)] = BiSymTensor(n, m, d, entries)
        else:
            n = block["degree"]
            entries = {}
            for e in block["entries"]:
                entries[tuple(e["index"])] = e["re"] + 1j * e["im"]
            coeffs[n] = SymTensor(n, d, entries)
    return ChaosState(doc["flavor"], cov, doc["cutoff"], coeffs)
