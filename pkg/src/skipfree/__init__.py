"""Decay-rate analysis for skip-free Markov-modulated random walks.

Minimal solutions R and G of level-homogeneous QBD kernels, the spectral
region {s : chi(e^s) <= 1} of three-dimensional walks, and box-truncated
occupation measures used to check the resulting decay-rate bounds.
"""
from .errors import (AssumptionError, DomainError, EmptyRegionError, IterationLimitError,
                     NearSingularError, NoRootError, NoSolutionError, SkipFreeError,
                     StructureError, UnderflowError, ValidationError)
from .models import MmrwModel, QueueRates, build_three_queue, load_model, validate
from .occupation import decay_slope, fundamental_box, n0n_consistency, verify_bounds
from .phase import perron_vectors, spectral_radius, stationary_distribution
from .region import chi, chi_nested, cp_r_truncated, gamma_region, gamma_star, mean_drift, zeta_roots
from .rg import RgSolution, compute_n, solve_g, solve_r, solve_rg, wiener_hopf_residual
from .tridiag import Triplet, cp_sequence, cp_truncated, truncate

__version__ = "0.1.0"
