"""Finite-dimensional Gaussian measures and their numerical oracles.

The central bookkeeping concern is the covariance convention: the same
physical covariance matrix appears with an extra factor 1/2 in some
representations.  ``GaussianMeasure`` therefore records a ``convention_scale``
(1 or 1/2) and every moment/quadrature routine consumes the *effective*
covariance ``scale * matrix``, so the factor can never be applied twice.

Quadrature uses probabilists' Gauss–Hermite rules after whitening by a
square root of the effective covariance; it is the independent oracle for
every expectation-value identity in the higher layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

__all__ = [
    "Covariance",
    "GaussianMeasure",
    "characteristic_functional",
    "isserlis_moment",
    "translate_density",
    "quadrature_expectation",
    "sample",
]

_SYM_TOL = 1e-12
_INV_TOL = 1e-10


@dataclass(frozen=True)
class Covariance:
    """A positive-definite (real-symmetric or Hermitian) covariance with its inverse."""

    matrix: np.ndarray
    inverse: np.ndarray = None
    flavor: str = "real"

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex if self.flavor == "complex" else float)
        if mat.ndim == 0:
            mat = mat.reshape(1, 1)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("covariance must be square")
        scale = max(1.0, np.linalg.norm(mat))
        if np.linalg.norm(mat - mat.conj().T) > _SYM_TOL * scale:
            raise ValueError("covariance must be symmetric/Hermitian")
        eig = np.linalg.eigvalsh(mat)
        if eig.min() <= _SYM_TOL * scale:
            raise ValueError(f"covariance not positive definite (min eigenvalue {eig.min():.3e})")
        inv = np.linalg.inv(mat) if self.inverse is None else np.asarray(self.inverse)
        if np.linalg.norm(mat @ inv - np.eye(len(mat))) > _INV_TOL * scale:
            raise ValueError("matrix · inverse deviates from identity")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "inverse", inv)
        if self.flavor not in ("real", "complex"):
            raise ValueError(f"unknown flavor {self.flavor!r}")

    @property
    def dim(self):
        return self.matrix.shape[0]

    @staticmethod
    def white(d, flavor="real"):
        return Covariance(np.eye(d), np.eye(d), flavor)

    def scaled(self, s):
        return Covariance(self.matrix * s, self.inverse / s, self.flavor)


@dataclass(frozen=True)
class GaussianMeasure:
    """Gaussian measure described by covariance, mean, and a scale convention.

    ``convention_scale`` is 1 for the plain convention and 1/2 where the
    characteristic functional carries half the covariance; the effective
    covariance used everywhere is ``convention_scale * matrix``.
    """

    covariance: Covariance
    mean: np.ndarray = None
    convention_scale: float = 1.0

    def __post_init__(self):
        if self.convention_scale not in (1, 1.0, 0.5):
            raise ValueError("convention_scale must be 1 or 1/2")
        mean = np.zeros(self.covariance.dim) if self.mean is None else np.asarray(self.mean, dtype=float)
        if mean.shape != (self.covariance.dim,):
            raise ValueError("mean has wrong shape")
        object.__setattr__(self, "mean", mean)

    @property
    def dim(self):
        return self.covariance.dim

    @property
    def effective(self):
        return self.convention_scale * self.covariance.matrix

    @property
    def effective_inverse(self):
        return self.covariance.inverse / self.convention_scale


def characteristic_functional(m, xi):
    """E[exp(i xi·phi)] in the real flavor; exp(-rho̅ Δ rho) in the complex one."""
    xi = np.asarray(xi)
    if m.covariance.flavor == "complex":
        if np.any(m.mean):
            raise ValueError("complex flavor supports mean zero only")
        return np.exp(-np.conjugate(xi) @ m.effective @ xi)
    return np.exp(1j * xi @ m.mean - 0.5 * xi @ m.effective @ xi)


def _pairing_sum(indices, eff):
    """Sum over complete pairings of Π eff over paired slots (recursive)."""
    if not indices:
        return 1.0
    first, rest = indices[0], indices[1:]
    total = 0.0
    for k in range(len(rest)):
        sub = rest[:k] + rest[k + 1 :]
        total += eff[first, rest[k]] * _pairing_sum(sub, eff)
    return total


def isserlis_moment(m, index):
    """Moment E[phi^{x1}···phi^{xn}] of a mean-zero Gaussian: pairings of the covariance."""
    if np.any(m.mean):
        raise ValueError("moments implemented for mean zero; translate first")
    index = tuple(index)
    if len(index) % 2 == 1:
        return 0.0
    return float(_pairing_sum(index, m.effective.real))


def translate_density(m, h, phi):
    """Radon–Nikodym factor of the mean-h translate against the original measure.

    Evaluates exp(⟨h, phi⟩ − ½‖h‖²) in the covariance inner product (pairing
    through the inverse covariance), i.e. the density of the Gaussian with the
    same covariance and mean h.
    """
    h = np.asarray(h, dtype=float)
    phi = np.asarray(phi, dtype=float)
    K = m.effective_inverse.real
    return float(np.exp(h @ K @ (phi - m.mean) - 0.5 * h @ K @ h))


def _sqrt_spd(mat):
    """Cholesky factor, falling back to a symmetric-eigen square root."""
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(mat)
        tol = _SYM_TOL * max(1.0, np.linalg.norm(mat))
        if w.min() < -tol:
            raise ValueError("covariance not positive semidefinite") from None
        return v @ np.diag(np.sqrt(np.clip(w, 0.0, None)))


def quadrature_expectation(m, f, order=32):
    """Tensorized Gauss–Hermite estimate of ∫ f dμ (oracle; d ≤ 3, order ≤ 64)."""
    d = m.dim
    if d > 3:
        raise ValueError("quadrature oracle restricted to d <= 3")
    if order > 64:
        raise ValueError("order restricted to <= 64")
    if m.covariance.flavor == "complex":
        raise ValueError("quadrature oracle implemented for the real flavor")
    knots, weights = hermegauss(order)
    weights = weights / np.sqrt(2.0 * np.pi)
    L = _sqrt_spd(m.effective.real)
    grids = np.meshgrid(*([knots] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*([weights] * d), indexing="ij")
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    total = 0.0
    for point, weight in zip(pts, w):
        total += weight * f(m.mean + L @ point)
    return total


def sample(m, seed, count):
    """Deterministic Gaussian draws: ``count`` rows of d-vectors for a given seed."""
    rng = np.random.default_rng(seed)
    L = _sqrt_spd(m.effective.real if m.covariance.flavor == "real" else m.effective)
    if m.covariance.flavor == "complex":
        z = (rng.standard_normal((count, m.dim)) + 1j * rng.standard_normal((count, m.dim))) / np.sqrt(2.0)
        return z @ L.conj().T
    z = rng.standard_normal((count, m.dim))
    return m.mean + z @ L.T
