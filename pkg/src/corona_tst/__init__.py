"""Numerical experiments with harmonic measure, corona decompositions and
square-function quantities on planar domains."""

__version__ = "0.1.0"

from .geometry import Ball, Plane, SampledSet
from .domains import (Domain, DomainError, ball_domain, half_space, polygon_domain, square_domain,
                      koch_snowflake, lipschitz_graph_domain, four_corner_cantor, domain_from_spec)
from .cubes import CubeLattice, ResolutionExceeded, build_lattice, stopping_region
from .beta import BetaParams, beta_content, beta_inf, bilateral_beta, beta_table, linear_deviation
from .harmonic import WosConfig, wos_measure, log_integral
from .corona import CoronaParams, CorkscrewFailure, corona_decompose, verify_tree_densities
from .green import GreenParams, affine_deviation_integral, compare_green_beta
from .batakis import IndeterminateClassification, batakis_domain

__all__ = [
    "Ball", "Plane", "SampledSet", "Domain", "DomainError", "ball_domain", "half_space", "polygon_domain",
    "square_domain", "koch_snowflake", "lipschitz_graph_domain", "four_corner_cantor", "domain_from_spec",
    "CubeLattice", "ResolutionExceeded", "build_lattice", "stopping_region", "BetaParams", "beta_content",
    "beta_inf", "bilateral_beta", "beta_table", "linear_deviation", "WosConfig", "wos_measure", "log_integral",
    "CoronaParams", "CorkscrewFailure", "corona_decompose", "verify_tree_densities", "GreenParams",
    "affine_deviation_integral", "compare_green_beta", "IndeterminateClassification", "batakis_domain",
]
