"""Particle spectra over mode grids, with plain-text serialization.

A spectrum run transports every mode of a grid across the same time interval
and tabulates the mixing.  ``abs(v)**2`` is the raw squared mixing
coefficient; the expected quantum number uses the scale-free normalization
``n_expect = abs(v)**2 / (abs(u)**2 - abs(v)**2)``, which removes the common
drift the transport imprints on the pair.  Outputs embed the conventions
(covariance and weight definitions) so files are interpretable on their own.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from .background import FLRWBackground
from .flows import ModeRun, evolve_mode_heisenberg

__all__ = [
    "SpectrumTable",
    "particle_spectrum",
    "lambda_grid_flat",
    "write_spectrum_csv",
    "read_spectrum_csv",
    "write_mode_json",
]

CONVENTIONS = {
    "covariance": "delta_q = weight * a / sqrt(lam + (a*m)**2) with weight = a**3 * V",
    "weight": "metric pairing weight a(t)**3 * comoving_volume; log-rate 3*hubble",
    "rates": "weighted covariance log-rate (4 - c) * hubble, c = (a*m)**2 / ((a*m)**2 + lam)",
    "n_expect": "abs(v)**2 / (abs(u)**2 - abs(v)**2)",
    "ccr_residual": "(abs(u)**2 - abs(v)**2) * delta_q(t0) - delta_q(t)",
}


def lambda_grid_flat(k_max: float, count: int, k_min: float | None = None) -> np.ndarray:
    """Laplacian eigenvalues ``|k|**2`` for an even grid of flat-slice wavenumbers."""
    if count < 1:
        raise ValueError("need at least one grid point")
    if k_max <= 0.0:
        raise ValueError("maximum wavenumber must be positive")
    lo = k_max / count if k_min is None else k_min
    if lo < 0.0 or lo > k_max:
        raise ValueError("wavenumber range is empty")
    return np.linspace(lo, k_max, count) ** 2


@dataclass
class SpectrumTable:
    """Per-mode spectrum rows plus run-level metadata."""

    rows: list
    metadata: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows])


def _spectrum_row(run: ModeRun) -> dict:
    absu2 = float(np.abs(run.u[-1]) ** 2)
    absv2 = float(np.abs(run.v[-1]) ** 2)
    return {
        "lambda": run.lam,
        "absv2": absv2,
        "n_expect": absv2 / (absu2 - absv2),
        "norm_drift": float(run.diagnostics["max_norm_drift"]),
        "ccr_residual": float(np.abs(run.ccr_residual[-1])),
    }


def particle_spectrum(
    background: FLRWBackground,
    lambdas,
    t_span,
    workers: int | None = None,
    **solver_kwargs,
) -> SpectrumTable:
    """Transport every mode of ``lambdas`` across ``t_span`` and tabulate mixing.

    Modes are independent, so the grid can be fanned out over ``workers``
    threads; rows always come back ordered by eigenvalue.  A mode whose
    integration fails is recorded in the metadata and skipped rather than
    aborting the rest of the grid.
    """
    lams = [float(x) for x in lambdas]
    if sorted(lams) != lams:
        lams = sorted(lams)

    def one(lam):
        return _spectrum_row(evolve_mode_heisenberg(background, lam, t_span, **solver_kwargs))

    rows = []
    failures = []
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(one, lam) for lam in lams]
            for lam, fut in zip(lams, futures):
                try:
                    rows.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - per-mode isolation
                    failures.append({"lambda": lam, "error": str(exc)})
    else:
        for lam in lams:
            try:
                rows.append(one(lam))
            except Exception as exc:  # noqa: BLE001 - per-mode isolation
                failures.append({"lambda": lam, "error": str(exc)})

    metadata = {
        "tool_version": __version__,
        "background": background.label,
        "curvature": background.curvature,
        "mass": background.mass,
        "comoving_volume": background.comoving_volume,
        "t_span": [float(t_span[0]), float(t_span[-1])],
        "solver": {
            "method": solver_kwargs.get("method", "rk45"),
            "rtol": solver_kwargs.get("rtol", 1e-8),
            "atol": solver_kwargs.get("atol", 1e-10),
            "path": solver_kwargs.get("path", "chain"),
        },
        "conventions": dict(CONVENTIONS),
        "partial": bool(failures),
        "failures": failures,
    }
    return SpectrumTable(rows=rows, metadata=metadata)


_COLUMNS = ("lambda", "absv2", "n_expect", "norm_drift", "ccr_residual")


def write_spectrum_csv(table: SpectrumTable, path) -> None:
    """Write a spectrum as CSV with '#'-prefixed metadata lines up front."""
    lines = []
    for key, value in table.metadata.items():
        lines.append(f"# {key}: {json.dumps(value, sort_keys=True)}")
    lines.append(",".join(_COLUMNS))
    for row in sorted(table.rows, key=lambda r: r["lambda"]):
        lines.append(",".join(repr(float(row[col])) for col in _COLUMNS))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_spectrum_csv(path) -> SpectrumTable:
    """Inverse of :func:`write_spectrum_csv` (used for round-trip checks)."""
    metadata = {}
    rows = []
    header = None
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                metadata[key.strip()] = json.loads(value.strip())
            elif header is None:
                header = line.split(",")
            else:
                values = [float(x) for x in line.split(",")]
                rows.append(dict(zip(header, values)))
    return SpectrumTable(rows=rows, metadata=metadata)


def write_mode_json(run: ModeRun, path, extra_metadata: dict | None = None) -> None:
    """Serialize one mode run to JSON with version and convention stamps."""
    payload = run.to_json_dict()
    payload["tool_version"] = __version__
    payload["conventions"] = dict(CONVENTIONS)
    if extra_metadata:
        payload["metadata"] = extra_metadata
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
