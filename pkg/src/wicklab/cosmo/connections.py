"""Transport connections for per-mode operators on a moving background.

As the background expands, the per-mode quantization data drift, and keeping
classical observables fixed requires transporting operators with a connection
``cov_rate(O) = dO/dt + [G, O]``.  All admissible choices share the same
self-adjoint number-word part; they differ by an anti-self-adjoint quadratic
remainder.  Per mode (where the Kähler off-diagonal block vanishes) the family
collapses to four named members:

* ``holomorphic`` / ``antiholomorphic``: pure number words — they rescale the
  ladder pair but cannot mix creation with annihilation;
* ``schrodinger``: adds ``-(1/4)(delta_q_dot * dd + kappa_q_dot * xx)``;
* ``momentum``: adds the volume-rate corrections on top, and is what the
  physically selected connection reduces to for a diagonal complex structure.

Words are written in the coefficient convention of the mode's holomorphic
chaos expansion: ``x`` denotes multiplication by the field coordinate, ``d``
differentiation, so ``x d`` is the number word and ``d d`` / ``x x`` lower and
raise the degree by two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..transforms import derivative_matrix, raising_matrix
from .background import FLRWBackground
from .modes import ModeParameters, ModeRates, mode_parameters, mode_rates

__all__ = [
    "ConnectionWord",
    "LinearObservable",
    "connection_holomorphic",
    "connection_antiholomorphic",
    "connection_schrodinger",
    "connection_momentum",
    "connection_physical",
    "connection_blocks",
    "mode_observables",
    "covariant_rate_matrix",
    "transport_residuals",
]

_SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class ConnectionWord:
    """Quadratic differential word ``number*xd + lower2*dd + raise2*xx + constant``."""

    number: complex
    lower2: complex
    raise2: complex
    constant: complex = 0.0

    def matrix(self, cutoff: int) -> np.ndarray:
        """Dense matrix on degree-truncated single-mode coefficients."""
        r = raising_matrix(0, 1, cutoff)
        d = derivative_matrix(0, 1, cutoff)
        eye = np.eye(cutoff + 1)
        return (
            self.number * (r @ d)
            + self.lower2 * (d @ d)
            + self.raise2 * (r @ r)
            + self.constant * eye
        ).astype(complex)

    def ladder_coefficients(self, params: ModeParameters) -> dict:
        """Normal-ordered ladder-word coefficients of the same operator.

        The mode's annihilator is ``delta_q * d``, so ``d = kappa_q * a`` and
        multiplication is the creator; the word regroups as
        ``adag_a * a'a + aa * a a + adag_adag * a'a' + const``.
        """
        kq = params.kappa_q
        return {
            "adag_a": self.number * kq,
            "aa": self.lower2 * kq * kq,
            "adag_adag": self.raise2,
            "const": self.constant,
        }

    def gamma_part(self) -> "ConnectionWord":
        """Anti-self-adjoint remainder after removing the shared number word."""
        return ConnectionWord(0.0, self.lower2, self.raise2, self.constant)

    def number_part(self) -> "ConnectionWord":
        return ConnectionWord(self.number, 0.0, 0.0, 0.0)


def connection_holomorphic(params: ModeParameters, rates: ModeRates) -> ConnectionWord:
    """Connection of the holomorphic picture: half the covariance log-rate times the number word."""
    return ConnectionWord(0.5 * rates.rate, 0.0, 0.0)


def connection_antiholomorphic(params: ModeParameters, rates: ModeRates) -> ConnectionWord:
    """Antiholomorphic-picture connection; per mode it coincides with the holomorphic one.

    Its general form is a pure creator-annihilator word, so it can never mix
    the ladder pair — one reason it cannot reproduce particle production.
    """
    return ConnectionWord(0.5 * rates.rate, 0.0, 0.0)


def connection_schrodinger(params: ModeParameters, rates: ModeRates) -> ConnectionWord:
    """Position-picture connection: number word plus the covariance-rate mixing terms."""
    return ConnectionWord(
        0.5 * rates.rate,
        -0.25 * rates.delta_q_dot,
        -0.25 * rates.kappa_q_dot,
    )


def connection_momentum(params: ModeParameters, rates: ModeRates) -> ConnectionWord:
    """Momentum-picture connection, including the volume-rate corrections.

    Relative to the position-picture word the mixing coefficients pick up the
    pairing-weight rate: with ``r = hubble*(4 - c)`` and ``w = 3*hubble`` the
    lowering coefficient becomes ``(-r/4 + w/2) * delta_q`` and symmetrically
    for the raising one.  Equivalently, ``hubble*(c + 2)/4`` times the
    covariance (inverse covariance) with opposite signs.
    """
    h = rates.hubble
    c = rates.mass_fraction
    coeff = 0.25 * h * (c + 2.0)
    return ConnectionWord(0.5 * rates.rate, coeff * params.delta_q, -coeff * params.kappa_q)


def connection_physical(params: ModeParameters, rates: ModeRates) -> ConnectionWord:
    """The physically selected connection for per-mode dynamics.

    In general it is the momentum-picture connection corrected by a term
    proportional to the time derivative of the Kähler mixing block; per mode
    that block vanishes identically, so the correction is zero and the
    momentum-picture word is returned unchanged.
    """
    return connection_momentum(params, rates)


def connection_blocks(background: FLRWBackground, lam: float, t: float) -> ConnectionWord:
    """Physical connection word of mode ``lam`` at time ``t``.

    Coefficients are linear in the expansion rate and vanish exactly on a
    static background; the remainder after the shared number word is
    anti-self-adjoint in the time-``t`` inner product.
    """
    params = mode_parameters(background, lam, t)
    rates = mode_rates(background, lam, t)
    return connection_physical(params, rates)


@dataclass(frozen=True)
class LinearObservable:
    """Degree-one operator word ``phi * x + dphi * d`` with its analytic time jet."""

    phi: complex
    dphi: complex
    phi_dot: complex
    dphi_dot: complex

    def matrix(self, cutoff: int) -> np.ndarray:
        r = raising_matrix(0, 1, cutoff)
        d = derivative_matrix(0, 1, cutoff)
        return (self.phi * r + self.dphi * d).astype(complex)

    def rate_matrix(self, cutoff: int) -> np.ndarray:
        r = raising_matrix(0, 1, cutoff)
        d = derivative_matrix(0, 1, cutoff)
        return (self.phi_dot * r + self.dphi_dot * d).astype(complex)


def mode_observables(params: ModeParameters, rates: ModeRates) -> dict:
    """Canonical pair words in both index placements.

    ``phi_up`` / ``pi_down`` are the ladder combinations natural to the
    holomorphic and position pictures; ``phi_down`` / ``pi_up`` carry the
    metric pairing weight (down: divided by it, up: multiplied), which is what
    the momentum-side transport holds fixed.  Each entry records the
    closed-form time derivative of its coefficients, including the weight
    drift, so covariant rates can be formed without finite differencing.
    Either pairing satisfies ``[phi, pi] = i``.
    """
    dq = params.delta_q
    kq = params.kappa_q
    w = params.weight
    wr = rates.weight_rate
    return {
        "phi_up": LinearObservable(
            1.0 / _SQRT2, dq / _SQRT2, 0.0, rates.delta_q_dot / _SQRT2
        ),
        "pi_down": LinearObservable(
            1j * kq / _SQRT2, -1j / _SQRT2, 1j * rates.kappa_q_dot / _SQRT2, 0.0
        ),
        "phi_down": LinearObservable(
            1.0 / (w * _SQRT2),
            params.delta / _SQRT2,
            -wr / (w * _SQRT2),
            rates.delta_mixed_dot / _SQRT2,
        ),
        "pi_up": LinearObservable(
            1j * params.kappa / _SQRT2,
            -1j * w / _SQRT2,
            1j * rates.energy_dot / _SQRT2,
            -1j * wr * w / _SQRT2,
        ),
    }


def covariant_rate_matrix(
    observable: LinearObservable, connection: ConnectionWord, cutoff: int
) -> np.ndarray:
    """Matrix of ``dO/dt + [G, O]`` on the truncated coefficient space."""
    o = observable.matrix(cutoff)
    g = connection.matrix(cutoff)
    return observable.rate_matrix(cutoff) + g @ o - o @ g


def transport_residuals(
    background: FLRWBackground, lam: float, t: float, cutoff: int = 10, margin: int = 3
) -> dict:
    """Transport defect of the physical connection on the weighted pair.

    Under the physical connection the weight-lowered field word and the
    weight-raised momentum word are parallel; this returns the maximum
    magnitude of their covariant rates over columns that truncation cannot
    touch (the connection shifts degree by at most two and the words by one).
    """
    params = mode_parameters(background, lam, t)
    rates = mode_rates(background, lam, t)
    conn = connection_physical(params, rates)
    obs = mode_observables(params, rates)
    keep = cutoff + 1 - margin
    if keep <= 0:
        raise ValueError("margin leaves no interior columns")
    out = {}
    for name in ("phi_down", "pi_up"):
        resid = covariant_rate_matrix(obs[name], conn, cutoff)
        out[name] = float(np.max(np.abs(resid[:, :keep])))
    return out
