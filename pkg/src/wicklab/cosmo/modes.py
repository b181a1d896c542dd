"""Per-mode scalar data and their closed-form time rates.

For a single Laplacian eigenvalue ``lam`` on a flat slice the quadratic
Hamiltonian data reduce to scalars.  With ``M = a * m``:

* frequency-squared kernel ``theta = (lam + M**2) / a**2``,
* covariance ``delta = a / sqrt(lam + M**2)`` and its inverse ``kappa``,
* metric pairing weight ``weight = a**3 * V``.

``kappa * delta == 1`` exactly.  The pairing weight is tracked once, here:
the quantization covariance of the mode's ladder algebra is
``delta_q = delta * weight`` and every rate that "bundles" the volume growth
(the ``4 - c`` rates below, ``c = M**2 / (M**2 + lam)``) is a rate of such a
weighted quantity.  The weightless combination ``delta`` itself changes at the
slower rate ``(1 - c) * hubble``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .background import FLRWBackground

__all__ = ["ModeParameters", "ModeRates", "mode_parameters", "mode_rates", "mode_rates_fd"]


@dataclass(frozen=True)
class ModeParameters:
    """Scalar quantization data of one mode at one instant."""

    lam: float
    a: float
    mass_term: float  # M = a * m
    theta: float
    delta: float
    kappa: float
    weight: float

    def __post_init__(self) -> None:
        if self.lam < 0.0:
            raise ValueError("Laplacian eigenvalue must be nonnegative")
        if not (self.lam + self.mass_term**2 > 0.0):
            raise ValueError("need lam + M**2 > 0 for an invertible covariance")
        if not (self.a > 0.0 and self.weight > 0.0):
            raise ValueError("scale factor and pairing weight must be positive")

    @property
    def delta_q(self) -> float:
        """Weighted covariance of the mode's ladder algebra, ``delta * weight``."""
        return self.delta * self.weight

    @property
    def kappa_q(self) -> float:
        """Inverse of the weighted covariance."""
        return self.kappa / self.weight

    @property
    def energy(self) -> float:
        """Single-quantum energy ``sqrt(lam + M**2) / a`` (equals ``kappa``)."""
        return self.kappa

    @property
    def mass_fraction(self) -> float:
        """``c = M**2 / (M**2 + lam)``, the mass share of the frequency."""
        m2 = self.mass_term**2
        return m2 / (m2 + self.lam)

    @property
    def omega2(self) -> float:
        """Eigenvalue in units of the mass term, ``lam / M**2``."""
        m2 = self.mass_term**2
        return self.lam / m2 if m2 > 0.0 else math.inf


@dataclass(frozen=True)
class ModeRates:
    """Closed-form time derivatives of the per-mode data.

    ``rate = hubble * (4 - c)`` is the logarithmic rate of the weighted
    covariance; the weightless covariance ``delta`` grows at
    ``hubble * (1 - c)``; the pairing weight at ``weight_rate = 3 * hubble``.
    ``delta_dot``/``kappa_dot`` follow the weighted convention, so that
    ``delta_dot * kappa + delta * kappa_dot == 0`` holds identically.
    """

    hubble: float
    mass_fraction: float
    rate: float
    weight_rate: float
    delta_dot: float
    kappa_dot: float
    delta_q_dot: float
    kappa_q_dot: float
    delta_mixed_dot: float
    energy_dot: float


def mode_parameters(background: FLRWBackground, lam: float, t: float) -> ModeParameters:
    """Evaluate the per-mode scalars for eigenvalue ``lam`` at time ``t``."""
    if lam < 0.0:
        raise ValueError("Laplacian eigenvalue must be nonnegative")
    a = background.scale(t)
    m_of_t = a * background.mass
    freq2 = lam + m_of_t**2
    if not freq2 > 0.0:
        raise ValueError("need lam + (a*m)**2 > 0; massless zero mode is not quantizable")
    root = math.sqrt(freq2)
    return ModeParameters(
        lam=float(lam),
        a=a,
        mass_term=m_of_t,
        theta=freq2 / a**2,
        delta=a / root,
        kappa=root / a,
        weight=background.weight(t),
    )


def mode_rates(background: FLRWBackground, lam: float, t: float) -> ModeRates:
    """Closed-form rates of the per-mode scalars at time ``t``."""
    params = mode_parameters(background, lam, t)
    h = background.hubble(t)
    c = params.mass_fraction
    rate = h * (4.0 - c)
    return ModeRates(
        hubble=h,
        mass_fraction=c,
        rate=rate,
        weight_rate=3.0 * h,
        delta_dot=params.delta * rate,
        kappa_dot=-params.kappa * rate,
        delta_q_dot=params.delta_q * rate,
        kappa_q_dot=-params.kappa_q * rate,
        delta_mixed_dot=params.delta * h * (1.0 - c),
        energy_dot=-params.energy * h * (1.0 - c),
    )


def mode_rates_fd(
    background: FLRWBackground, lam: float, t: float, eps: float = 1e-6
) -> dict:
    """Central finite-difference estimates of the per-mode derivatives.

    Cross-check hook for :func:`mode_rates`: returns difference quotients of
    the honestly time-dependent quantities (weighted covariance and inverse,
    weightless covariance, energy, pairing weight).
    """
    lo = mode_parameters(background, lam, t - eps)
    hi = mode_parameters(background, lam, t + eps)
    scale = 0.5 / eps
    return {
        "delta_q_dot": (hi.delta_q - lo.delta_q) * scale,
        "kappa_q_dot": (hi.kappa_q - lo.kappa_q) * scale,
        "delta_mixed_dot": (hi.delta - lo.delta) * scale,
        "energy_dot": (hi.energy - lo.energy) * scale,
        "weight_dot": (hi.weight - lo.weight) * scale,
    }
