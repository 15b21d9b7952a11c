"""Spectra of Hamiltonians with a renormalized point (delta) interaction.

The package computes the perturbed spectrum of an explicitly solvable base
Hamiltonian (flat intervals, rectangles, boxes, tori) after attaching a
renormalized delta interaction at a point, builds the new eigenfunctions
from the base Green's function, and numerically certifies orthonormality
and completeness of the result against an independent finite-rank oracle.
"""

from pointspec.errors import (
    ConfigError,
    DiagonalDivergenceError,
    DomainError,
    MarginError,
    NearEigenvalueError,
    PointSpecError,
    PoleProximityError,
    PrecisionError,
    ResourceLimitError,
    SolverError,
)
from pointspec.models import (
    Level,
    ModeSet,
    SpectralModel,
    collapse_degenerate,
    eigenfunction_value,
    enumerate_levels,
    enumerate_modes,
    heat_kernel_diag,
    make_model,
)
from pointspec.secular import (
    PhiValue,
    PointSpectrum,
    Scheme,
    bare_coupling,
    change_scheme,
    phi,
    prepare_point_spectrum,
    scheme_for_ground_energy,
)
from pointspec.solver import (
    MultiCenterProblem,
    PerturbedLevel,
    prepare_multi,
    solve_ground,
    solve_level,
    solve_spectrum,
    solve_spectrum_multi,
)
from pointspec.wavefunction import (
    Eigenfunction,
    GreenValue,
    Grid,
    domain_vector_norms,
    eigenfunction,
    eigenfunction_at,
    green0,
    green0_interval_closed,
    krein_resolvent,
    krein_resolvent_truncated,
    offset_grid,
    renormalized_kernel,
)

__all__ = [
    "ConfigError",
    "DiagonalDivergenceError",
    "DomainError",
    "Eigenfunction",
    "GreenValue",
    "Grid",
    "Level",
    "MarginError",
    "ModeSet",
    "MultiCenterProblem",
    "NearEigenvalueError",
    "PerturbedLevel",
    "PhiValue",
    "PointSpecError",
    "PointSpectrum",
    "PoleProximityError",
    "PrecisionError",
    "ResourceLimitError",
    "Scheme",
    "SolverError",
    "SpectralModel",
    "bare_coupling",
    "change_scheme",
    "collapse_degenerate",
    "domain_vector_norms",
    "eigenfunction",
    "eigenfunction_at",
    "eigenfunction_value",
    "enumerate_levels",
    "enumerate_modes",
    "green0",
    "green0_interval_closed",
    "heat_kernel_diag",
    "krein_resolvent",
    "krein_resolvent_truncated",
    "make_model",
    "offset_grid",
    "phi",
    "prepare_multi",
    "prepare_point_spectrum",
    "renormalized_kernel",
    "scheme_for_ground_energy",
    "solve_ground",
    "solve_level",
    "solve_spectrum",
    "solve_spectrum_multi",
]

__version__ = "0.1.0"
