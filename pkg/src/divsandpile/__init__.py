"""Numerical laboratory for the divisible sandpile.

Toppling engines and an exact odometer solver on tori, Dirichlet boxes and
general graphs; Green functions; a sampler for the bi-Laplacian Gaussian
field; and Monte Carlo experiments with re-checkable reports.
"""

from .field import (
    CholeskySampler,
    CovarianceModel,
    Estimate,
    FieldKind,
    FieldSample,
    SpectralSampler,
    covariance,
    expected_max,
    mean_statistic,
    min_shift,
    sample_field_cholesky,
    sample_field_spectral,
)
from .graph import Graph, laplacian_apply, make_dirichlet_box, make_general, make_torus, norm
from .green import (
    GreenMode,
    GreenTable,
    fourier_F,
    green_averaged,
    green_convolve,
    green_dirichlet_box,
    green_killed,
    kernel_constant,
    nu_n,
    torus_spectrum,
    variogram_fourier,
)
from .sandpile import (
    Configuration,
    OdometerReport,
    SolverError,
    Status,
    check_legal,
    is_stable,
    solve_odometer_exact,
    topple_nested,
    topple_parallel,
    topple_two_stage,
)

__version__ = "0.1.0"

__all__ = [
    "CholeskySampler",
    "Configuration",
    "CovarianceModel",
    "Estimate",
    "FieldKind",
    "FieldSample",
    "Graph",
    "GreenMode",
    "GreenTable",
    "OdometerReport",
    "SolverError",
    "SpectralSampler",
    "Status",
    "check_legal",
    "covariance",
    "expected_max",
    "fourier_F",
    "green_averaged",
    "green_convolve",
    "green_dirichlet_box",
    "green_killed",
    "is_stable",
    "kernel_constant",
    "laplacian_apply",
    "make_dirichlet_box",
    "make_general",
    "make_torus",
    "mean_statistic",
    "min_shift",
    "norm",
    "nu_n",
    "sample_field_cholesky",
    "sample_field_spectral",
    "solve_odometer_exact",
    "topple_nested",
    "topple_parallel",
    "topple_two_stage",
    "torus_spectrum",
    "variogram_fourier",
]
