"""Runnable experiments with re-checkable pass/fail reports."""

from .clt import clt_weights, exp_critical_clt
from .cones import cone_certificate, cone_explode, exp_s0_line, laplacian_u1_formula, u_cone
from .laws import PRESETS, MassLaw, gaussian, parse_law, two_point, uniform
from .report import Check, ExperimentReport
from .theory import phi, phi_psi_eval, psi
from .torus import (
    ScalingRow,
    ScalingTable,
    exp_density_conservation,
    exp_dirac_identity,
    exp_equality_in_law,
    exp_scaling,
)

__all__ = [
    "Check",
    "ExperimentReport",
    "MassLaw",
    "PRESETS",
    "ScalingRow",
    "ScalingTable",
    "clt_weights",
    "cone_certificate",
    "cone_explode",
    "exp_critical_clt",
    "exp_density_conservation",
    "exp_dirac_identity",
    "exp_equality_in_law",
    "exp_s0_line",
    "exp_scaling",
    "gaussian",
    "laplacian_u1_formula",
    "parse_law",
    "phi",
    "phi_psi_eval",
    "psi",
    "two_point",
    "u_cone",
    "uniform",
]
