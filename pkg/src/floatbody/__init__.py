"""Two-dimensional linear wave interaction with a freely floating body.

Finite-element realization of the Dirichlet-Neumann operator on a tank with
a partially immersed body, Kirchhoff potentials and hydrodynamic
coefficients, the energy-conserving coupled wave-body evolution, the Cummins
radiation-memory formulation, and corner-singularity analysis at right-angle
contact points.
"""
from . import (
    cummins,
    dn_operator,
    elliptic,
    errors,
    function_spaces,
    geometry,
    hydrodynamics,
    john_evolution,
    singular_analysis,
)
from .cummins import cross_validate, exciting_force, kernel, solve_cummins
from .dn_operator import DnOperator, assemble_G0, g0_power, hcal_seminorms
from .elliptic import assemble, normal_trace, solve_mixed, solve_neumann
from .geometry import DomainSpec, build_mesh, rectangular_scenario, validate_domain
from .hydrodynamics import HydroSet, compute_hydro, stability_check
from .john_evolution import State, SystemOperator, simulate, skewness_residual, x_inner

__version__ = "0.1.0"

__all__ = [
    "DnOperator", "DomainSpec", "HydroSet", "State", "SystemOperator", "assemble", "assemble_G0",
    "build_mesh", "compute_hydro", "cross_validate", "cummins", "dn_operator", "elliptic", "errors",
    "exciting_force", "function_spaces", "g0_power", "geometry", "hcal_seminorms", "hydrodynamics",
    "john_evolution", "kernel", "normal_trace", "rectangular_scenario", "simulate",
    "singular_analysis", "skewness_residual", "solve_cummins", "solve_mixed", "solve_neumann",
    "stability_check", "validate_domain", "x_inner",
]
