"""Truncated symmetric tensor algebra over a finite set of modes.

A rank-n symmetric tensor over d modes is stored sparsely: one coefficient per
*sorted* multi-index (a nondecreasing tuple of mode labels), which makes the
symmetry implicit and avoids the factorial blow-up of dense storage.  The
stored value is the tensor component, i.e. the common value the symmetric
tensor takes on every rearrangement of that index.

Evaluation pairs a tensor with the n-fold power of a vector, summing over all
(unsorted) index tuples, so ``eval`` picks up the combinatorial multiplicity
n!/prod(counts!) of each sorted index.

Arithmetic stays exact when the inputs are exact: integer and Fraction
coefficients propagate through symmetrize/product/contract without touching
floats, which the identity tests rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement

import numpy as np

__all__ = [
    "SymTensor",
    "TruncationError",
    "sorted_indices",
    "multiplicity",
    "symmetrize",
    "sym_product",
    "contract",
    "apply_slotwise",
    "pair",
    "multiset_permutations",
]


class TruncationError(ValueError):
    """Raised when an operation would exceed the declared degree cutoff."""


def sorted_indices(dim, rank):
    """All nondecreasing index tuples of the given rank over range(dim)."""
    return list(combinations_with_replacement(range(dim), rank))


def multiplicity(index):
    """Number of distinct rearrangements of a sorted multi-index."""
    n = len(index)
    out = math.factorial(n)
    run = 1
    for i in range(1, n + 1):
        if i < n and index[i] == index[i - 1]:
            run += 1
        else:
            out //= math.factorial(run)
            run = 1
    return out


def multiset_permutations(index):
    """Yield the distinct rearrangements of a tuple (multiset permutations)."""
    pool = sorted(index)
    n = len(pool)
    if n == 0:
        yield ()
        return

    def rec(remaining):
        if not remaining:
            yield ()
            return
        seen = set()
        for i, v in enumerate(remaining):
            if v in seen:
                continue
            seen.add(v)
            rest = remaining[:i] + remaining[i + 1 :]
            for tail in rec(rest):
                yield (v,) + tail

    yield from rec(tuple(pool))


def _is_exact(v):
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


def _div(v, k):
    """Divide by a positive integer, keeping exact values exact."""
    if _is_exact(v):
        return Fraction(v, k)
    return v / k


@dataclass(frozen=True)
class SymTensor:
    """Sparse symmetric tensor: ``coeffs`` maps sorted multi-indices to values.

    Absent keys mean zero.  Instances are immutable; every operation returns a
    new tensor.
    """

    rank: int
    dim: int
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        for key in self.coeffs:
            if len(key) != self.rank:
                raise ValueError(f"key {key} has rank {len(key)}, expected {self.rank}")
            if any(not (0 <= x < self.dim) for x in key):
                raise ValueError(f"key {key} out of range for dim {self.dim}")
            if tuple(sorted(key)) != tuple(key):
                raise ValueError(f"key {key} is not sorted")

    def __getitem__(self, index):
        return self.coeffs.get(tuple(sorted(index)), 0)

    def is_zero(self, tol=0.0):
        return all(abs(v) <= tol for v in self.coeffs.values())

    def map_values(self, fn):
        return SymTensor(self.rank, self.dim, {k: fn(v) for k, v in self.coeffs.items()})

    def __add__(self, other):
        if not isinstance(other, SymTensor):
            return NotImplemented
        if (other.rank, other.dim) != (self.rank, self.dim):
            raise ValueError("rank/dim mismatch in tensor sum")
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return SymTensor(self.rank, self.dim, {k: v for k, v in out.items() if v != 0})

    def __sub__(self, other):
        return self + other.map_values(lambda v: -v)

    def __rmul__(self, scalar):
        return self.map_values(lambda v: scalar * v)

    def evaluate(self, phi):
        """Full contraction with the rank-fold tensor power of ``phi``."""
        total = 0
        for key, v in self.coeffs.items():
            term = v * multiplicity(key)
            for x in key:
                term = term * phi[x]
            total = total + term
        return total

    def to_dense(self):
        """Dense ndarray with the full symmetric index set (small ranks only)."""
        if self.dim**self.rank > 2_000_000:
            raise ValueError("dense form too large; raise the guard deliberately")
        arr = np.zeros((self.dim,) * self.rank, dtype=complex)
        for key, v in self.coeffs.items():
            for perm in multiset_permutations(key):
                arr[perm] = complex(v)
        return arr

    @staticmethod
    def unit(dim, index, value=1):
        """Tensor with a single (sorted) component set."""
        key = tuple(sorted(index))
        return SymTensor(len(key), dim, {key: value})

    @staticmethod
    def zero(dim, rank):
        return SymTensor(rank, dim, {})


def symmetrize(raw, dim=None):
    """Project a dense rank-n array onto its symmetric part.

    The coefficient at a sorted index is the average of the array over all
    rearrangements of that index; symmetric inputs are fixed points.  ``dim``
    only matters for 0-d input, whose array shape carries no dimension.
    """
    raw = np.asarray(raw)
    if raw.ndim == 0:
        return SymTensor(0, dim or 1, {(): raw.item()} if raw.item() != 0 else {})
    dims = set(raw.shape)
    if len(dims) != 1:
        raise ValueError(f"all axes must have equal length, got shape {raw.shape}")
    d = raw.shape[0]
    n = raw.ndim
    coeffs = {}
    for key in sorted_indices(d, n):
        total = 0
        count = 0
        for perm in multiset_permutations(key):
            total = total + raw[perm]
            count += 1
        if total != 0:
            coeffs[key] = _div(total, count) if _is_exact(total) else total / count
    return SymTensor(n, d, coeffs)


def sym_product(a, b, cutoff=None, on_truncate="error"):
    """Symmetric tensor product, normalized so evaluation is multiplicative:

        eval(a ⊗̂ b, phi) = eval(a, phi) · eval(b, phi).

    With the mean-over-permutations normalization this is the symmetrization
    of the plain tensor product.  ``cutoff`` bounds the result rank; exceeding
    it raises TruncationError or, with on_truncate='drop', returns a zero
    tensor of the capped rank (the caller sees the flagging via the exception
    path only when asked for).
    """
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    m, n = a.rank, b.rank
    if cutoff is not None and m + n > cutoff:
        if on_truncate == "error":
            raise TruncationError(f"product rank {m + n} exceeds cutoff {cutoff}")
        if on_truncate == "drop":
            return SymTensor.zero(a.dim, 0)
        raise ValueError(f"unknown truncation policy {on_truncate!r}")
    if m == 0:
        s = a.coeffs.get((), 0)
        return b.map_values(lambda v: s * v)
    if n == 0:
        s = b.coeffs.get((), 0)
        return a.map_values(lambda v: s * v)

    out = {}
    denom = math.comb(m + n, m)
    for ka, va in a.coeffs.items():
        for kb, vb in b.coeffs.items():
            key = tuple(sorted(ka + kb))
            # Number of ways to place ka and kb into the merged slots, per
            # distinct arrangement bookkeeping: mult(key) arrangements of the
            # result split as mult(ka)*mult(kb)*interleavings; dividing the
            # plain product by C(m+n, m) and weighting by interleavings is
            # equivalent to averaging the tensor product over permutations.
            ways = _interleavings(ka, kb, key)
            term = va * vb * Fraction(ways, denom) if _is_exact(va) and _is_exact(vb) else va * vb * (ways / denom)
            out[key] = out.get(key, 0) + term
    return SymTensor(m + n, a.dim, {k: v for k, v in out.items() if v != 0})


def _interleavings(ka, kb, merged):
    """Count slot choices in ``merged`` realizing the submultisets ka, kb.

    Per distinct value, choose which of its merged slots come from ka.
    """
    ways = 1
    for v in set(merged):
        ca = sum(1 for x in ka if x == v)
        cm = sum(1 for x in merged if x == v)
        ways *= math.comb(cm, ca)
    return ways


def contract(t, pairs, metric):
    """Contract slot pairs of a symmetric tensor with a d×d metric.

    Each pair (i, j) of slot positions is summed against metric[x_i, x_j];
    the surviving slots are re-symmetrized (automatic in sorted storage).
    """
    if not pairs:
        return t
    flat = [s for p in pairs for s in p]
    if len(set(flat)) != len(flat):
        raise ValueError("contraction slots must be distinct")
    if any(not (0 <= s < t.rank) for s in flat):
        raise ValueError("slot out of range")
    metric = np.asarray(metric) if not isinstance(metric, np.ndarray) else metric
    keep = [s for s in range(t.rank) if s not in flat]
    out = {}
    d = t.dim
    # Work over all distinct arrangements of each stored index so slot
    # positions are meaningful, then average back onto sorted keys.
    for key, v in t.coeffs.items():
        for arr in multiset_permutations(key):
            w = v
            for (i, j) in pairs:
                w = w * metric[arr[i], arr[j]]
            rest = tuple(sorted(arr[s] for s in keep))
            out[rest] = out.get(rest, 0) + w
    norm = {}
    for key, v in out.items():
        # Each surviving sorted key was hit once per arrangement of the
        # original tensor consistent with it; normalize by the number of
        # arrangements of the *source* per target, i.e. divide by
        # mult(source)/mult(target) summed — equivalently, divide the total by
        # the overcount mult(key_src)/... ; with symmetric storage the clean
        # normalization is: total arrangements contributing / arrangements of
        # the target key.
        norm[key] = _div(v, multiplicity(key)) if _is_exact(v) else v / multiplicity(key)
    return SymTensor(t.rank - 2 * len(pairs), t.dim, {k: v for k, v in norm.items() if v != 0})


def apply_slotwise(matrix, t):
    """Apply a d×d matrix to every slot: (Mt)[j⃗] = Σ Π M[j_k, i_k] t[i⃗].

    Preserves symmetry, so the result is read back off sorted entries.  Done
    densely (the mode counts in play keep d^rank small).
    """
    M = np.asarray(matrix, dtype=complex)
    n = t.rank
    if n == 0:
        return t
    arr = t.to_dense()
    for axis in range(n):
        arr = np.moveaxis(np.tensordot(M, arr, axes=([1], [axis])), 0, axis)
    coeffs = {}
    for key in sorted_indices(t.dim, n):
        v = arr[key]
        if v != 0:
            coeffs[key] = v
    return SymTensor(n, t.dim, coeffs)


def pair(a, b, metric):
    """Bilinear pairing Σ ā[i⃗] Π metric[i_k, j_k] b[j⃗] over unsorted tuples.

    Conjugates the first argument.  This is the degree-n building block of the
    chaos inner products.
    """
    if (a.rank, a.dim) != (b.rank, b.dim):
        raise ValueError("rank/dim mismatch in pairing")
    if a.rank == 0:
        return np.conjugate(complex(a.coeffs.get((), 0))) * complex(b.coeffs.get((), 0))
    mb = apply_slotwise(metric, b).to_dense()
    return complex(np.vdot(a.to_dense(), mb))
