"""Mode dynamics on expanding backgrounds.

Per Fourier mode of a free field on a spatially flat expanding universe, the
quantization data reduce to a handful of scalars built from the scale factor,
its rate, the mode eigenvalue, and the mass.  This subpackage supplies the
background profiles, those per-mode parameters and their closed-form rates,
the family of transport connections with their ladder-word coefficients, the
modified Schrödinger and ladder-coefficient flows, and particle spectra.
"""

from .background import (
    FLRWBackground,
    constant_background,
    de_sitter_background,
    power_law_background,
    tabulated_background,
    tanh_background,
)
from .connections import (
    ConnectionWord,
    LinearObservable,
    connection_antiholomorphic,
    connection_blocks,
    connection_holomorphic,
    connection_momentum,
    connection_physical,
    connection_schrodinger,
    covariant_rate_matrix,
    mode_observables,
    transport_residuals,
)
from .flows import (
    ModeRun,
    dual_path_report,
    evolve_mode_heisenberg,
    evolve_mode_schrodinger,
    heisenberg_chain_matrix,
    heisenberg_flow_rhs,
    heisenberg_printed_matrix,
    mode_vacuum_state,
    static_propagator_phases,
)
from .modes import ModeParameters, ModeRates, mode_parameters, mode_rates, mode_rates_fd
from .spectrum import (
    SpectrumTable,
    lambda_grid_flat,
    particle_spectrum,
    read_spectrum_csv,
    write_mode_json,
    write_spectrum_csv,
)

__all__ = [
    "FLRWBackground",
    "constant_background",
    "de_sitter_background",
    "power_law_background",
    "tanh_background",
    "tabulated_background",
    "ModeParameters",
    "ModeRates",
    "mode_parameters",
    "mode_rates",
    "mode_rates_fd",
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
    "ModeRun",
    "heisenberg_flow_rhs",
    "heisenberg_chain_matrix",
    "heisenberg_printed_matrix",
    "dual_path_report",
    "evolve_mode_heisenberg",
    "evolve_mode_schrodinger",
    "mode_vacuum_state",
    "static_propagator_phases",
    "SpectrumTable",
    "particle_spectrum",
    "lambda_grid_flat",
    "write_spectrum_csv",
    "read_spectrum_csv",
    "write_mode_json",
]
