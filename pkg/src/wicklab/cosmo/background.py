"""Scale-factor profiles for spatially homogeneous backgrounds.

A background bundles the scale factor ``a(t)``, its time derivative, the
spatial curvature sign, the field mass, and the comoving volume of the
spatial slice.  Only the flat case is given a mode-grid helper elsewhere;
curved slices can still be driven by supplying Laplacian eigenvalues by hand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "FLRWBackground",
    "constant_background",
    "de_sitter_background",
    "power_law_background",
    "tanh_background",
    "tabulated_background",
]


@dataclass(frozen=True)
class FLRWBackground:
    """Homogeneous, isotropic background with lapse one and zero shift.

    ``scale_factor`` and ``scale_rate`` are callables ``t -> a`` and
    ``t -> da/dt``; both must be defined on ``domain``.  ``curvature`` is the
    sign of the spatial curvature (-1, 0, or +1), ``mass`` the field mass, and
    ``comoving_volume`` the volume of the comoving slice (the metric pairing
    weight is ``a(t)**3 * comoving_volume``).
    """

    scale_factor: Callable[[float], float]
    scale_rate: Callable[[float], float]
    curvature: int = 0
    mass: float = 1.0
    comoving_volume: float = 1.0
    domain: Tuple[float, float] = (-math.inf, math.inf)
    label: str = "custom"

    def __post_init__(self) -> None:
        if self.curvature not in (-1, 0, 1):
            raise ValueError("curvature sign must be -1, 0, or +1")
        if not (self.mass >= 0.0 and math.isfinite(self.mass)):
            raise ValueError("mass must be finite and nonnegative")
        if not (self.comoving_volume > 0.0 and math.isfinite(self.comoving_volume)):
            raise ValueError("comoving volume must be finite and positive")
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError("domain must be an ordered interval")

    def _check_time(self, t: float) -> None:
        lo, hi = self.domain
        if not (lo <= t <= hi):
            raise ValueError(f"time {t} outside background domain [{lo}, {hi}]")

    def scale(self, t: float) -> float:
        """Scale factor ``a(t)``; raises if it is not strictly positive."""
        self._check_time(t)
        a = float(self.scale_factor(t))
        if not (a > 0.0 and math.isfinite(a)):
            raise ValueError(f"scale factor must stay finite and positive, got {a} at t={t}")
        return a

    def rate(self, t: float) -> float:
        """Time derivative ``da/dt``."""
        self._check_time(t)
        da = float(self.scale_rate(t))
        if not math.isfinite(da):
            raise ValueError(f"scale-factor rate is not finite at t={t}")
        return da

    def hubble(self, t: float) -> float:
        """Expansion rate ``(da/dt)/a``."""
        return self.rate(t) / self.scale(t)

    def weight(self, t: float) -> float:
        """Metric pairing weight ``a(t)**3`` times the comoving volume."""
        return self.scale(t) ** 3 * self.comoving_volume


def constant_background(a0: float = 1.0, **kwargs) -> FLRWBackground:
    """Static background with scale factor frozen at ``a0``."""
    if not (a0 > 0.0):
        raise ValueError("scale factor must be positive")
    return FLRWBackground(
        scale_factor=lambda t: a0,
        scale_rate=lambda t: 0.0,
        label=f"constant(a0={a0})",
        **kwargs,
    )


def de_sitter_background(a0: float = 1.0, hubble: float = 0.1, **kwargs) -> FLRWBackground:
    """Exponential expansion ``a(t) = a0 * exp(hubble * t)``."""
    if not (a0 > 0.0):
        raise ValueError("scale factor must be positive")
    return FLRWBackground(
        scale_factor=lambda t: a0 * math.exp(hubble * t),
        scale_rate=lambda t: a0 * hubble * math.exp(hubble * t),
        label=f"de_sitter(a0={a0}, H={hubble})",
        **kwargs,
    )


def power_law_background(
    a0: float = 1.0, exponent: float = 0.5, t0: float = 1.0, **kwargs
) -> FLRWBackground:
    """Power-law expansion ``a(t) = a0 * (t / t0)**exponent`` for ``t > 0``."""
    if not (a0 > 0.0 and t0 > 0.0):
        raise ValueError("scale factor and reference time must be positive")
    kwargs.setdefault("domain", (0.0, math.inf))
    return FLRWBackground(
        scale_factor=lambda t: a0 * (t / t0) ** exponent,
        scale_rate=lambda t: a0 * exponent * (t / t0) ** (exponent - 1.0) / t0,
        label=f"power_law(a0={a0}, p={exponent}, t0={t0})",
        **kwargs,
    )


def tanh_background(
    a_before: float = 1.0,
    a_after: float = 1.2,
    t0: float = 0.0,
    width: float = 1.0,
    **kwargs,
) -> FLRWBackground:
    """Smooth transition between two static epochs.

    ``a(t) = a_before + (a_after - a_before) * (1 + tanh((t - t0)/width)) / 2``;
    the expansion rate decays exponentially in both directions, so runs started
    well before the transition and ended well after it connect two effectively
    static regimes.
    """
    if not (a_before > 0.0 and a_after > 0.0):
        raise ValueError("scale factor must be positive")
    if not (width > 0.0):
        raise ValueError("transition width must be positive")
    jump = a_after - a_before

    def a_of_t(t: float) -> float:
        return a_before + jump * 0.5 * (1.0 + math.tanh((t - t0) / width))

    def da_of_t(t: float) -> float:
        return jump * 0.5 / (width * math.cosh((t - t0) / width) ** 2)

    return FLRWBackground(
        scale_factor=a_of_t,
        scale_rate=da_of_t,
        label=f"tanh(a={a_before}->{a_after}, t0={t0}, width={width})",
        **kwargs,
    )


def tabulated_background(times, values, **kwargs) -> FLRWBackground:
    """Background interpolated from samples ``(times, values)`` with a cubic spline.

    Times must be strictly increasing and all sampled scale factors positive;
    the rate comes from the spline derivative.  The domain is clamped to the
    sampled interval.
    """
    t = np.asarray(times, dtype=float)
    a = np.asarray(values, dtype=float)
    if t.ndim != 1 or a.shape != t.shape:
        raise ValueError("times and values must be matching one-dimensional arrays")
    if t.size < 4:
        raise ValueError("need at least four samples for a cubic spline")
    if not np.all(np.diff(t) > 0.0):
        raise ValueError("sample times must be strictly increasing")
    if not np.all(a > 0.0):
        raise ValueError("sampled scale factors must be positive")
    spline = CubicSpline(t, a)
    rate = spline.derivative()
    kwargs.setdefault("domain", (float(t[0]), float(t[-1])))
    return FLRWBackground(
        scale_factor=lambda s: float(spline(s)),
        scale_rate=lambda s: float(rate(s)),
        label=f"tabulated({t.size} samples)",
        **kwargs,
    )
