"""Pairing-diagram enumeration and evaluation.

A diagram on n vertices is a set of disjoint vertex pairs (the lines, each
carrying one covariance factor) plus the leftover unpaired vertices (free
slots).  Complete diagrams — everything paired — compute Gaussian moments;
partial ones appear in the product formulas, where the free slots assemble
into a symmetric tensor.

Enumeration is canonical and deterministic: the paired vertex set is chosen
in sorted order and matchings always pair the smallest unpaired vertex first,
so the diagram stream is reproducible and countable against the closed form
C(n, 2r)·(2r−1)!!.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .symtensor import SymTensor, sym_product, symmetrize

__all__ = [
    "PairingDiagram",
    "diagram_count",
    "enumerate_diagrams",
    "visit_diagrams",
    "evaluate_diagram",
    "wick_moment",
]


@dataclass(frozen=True)
class PairingDiagram:
    vertices: tuple
    half_edges: tuple  # tuple of (i, j) vertex pairs, i < j
    unpaired: tuple

    def __post_init__(self):
        flat = [v for e in self.half_edges for v in e]
        if len(set(flat)) != len(flat):
            raise ValueError("half-edges must be disjoint")
        if set(flat) | set(self.unpaired) != set(self.vertices):
            raise ValueError("unpaired must be the complement of the paired vertices")

    @property
    def rank(self):
        return len(self.half_edges)


def diagram_count(n, rank):
    """C(n, 2r)·(2r−1)!! — the number of rank-r diagrams on n vertices."""
    if rank < 0 or 2 * rank > n:
        return 0
    double_fact = 1
    for k in range(2 * rank - 1, 0, -2):
        double_fact *= k
    return math.comb(n, 2 * rank) * double_fact


def _matchings(verts):
    """Perfect matchings of a sorted vertex tuple, smallest-first canonical order."""
    if not verts:
        yield ()
        return
    first = verts[0]
    for k in range(1, len(verts)):
        partner = verts[k]
        rest = verts[1:k] + verts[k + 1 :]
        for tail in _matchings(rest):
            yield ((first, partner),) + tail


def visit_diagrams(n, rank, visitor):
    """Stream every rank-r diagram on vertices 0..n-1 to ``visitor`` once."""
    if not 0 <= 2 * rank <= n:
        raise ValueError(f"rank {rank} out of range for {n} vertices")
    vertices = tuple(range(n))
    for paired in combinations(vertices, 2 * rank):
        unpaired = tuple(v for v in vertices if v not in paired)
        for edges in _matchings(paired):
            visitor(PairingDiagram(vertices, edges, unpaired))


def enumerate_diagrams(n, rank):
    out = []
    visit_diagrams(n, rank, out.append)
    return out


def _cov_matrix(cov):
    return np.asarray(getattr(cov, "matrix", cov))


def evaluate_diagram(diag, vectors, cov):
    """Evaluate one diagram: Π over lines of ψⁱ·Δ·ψʲ, free slots as a tensor.

    Returns a scalar for complete diagrams, otherwise a rank-|unpaired|
    symmetric tensor (the symmetrized product of the free vectors, scaled by
    the line product).
    """
    if len(vectors) != len(diag.vertices):
        raise ValueError("need exactly one vector per vertex")
    delta = _cov_matrix(cov)
    vectors = [np.asarray(v, dtype=float) for v in vectors]
    weight = 1.0
    for i, j in diag.half_edges:
        weight *= float(vectors[i] @ delta @ vectors[j])
    if not diag.unpaired:
        return weight
    d = len(vectors[0])
    free = SymTensor(0, d, {(): weight})
    for u in diag.unpaired:
        free = sym_product(free, symmetrize(vectors[u]))
    return free


def wick_moment(vectors, cov):
    """Gaussian moment E[(ψ¹·φ)···(ψⁿ·φ)]: sum over complete diagrams."""
    n = len(vectors)
    if n % 2 == 1:
        return 0.0
    total = 0.0

    def add(diag):
        nonlocal total
        total += evaluate_diagram(diag, vectors, cov)

    visit_diagrams(n, n // 2, add)
    return total
