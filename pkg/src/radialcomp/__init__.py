"""Radial comparison of sub-Riemannian diffusions with one-dimensional models.

Submodules
----------
drifts
    Comparison drifts and curvature-bound integrals.
groups
    Carnot groups of H-type, CC distance and horizontal Brownian steps.
sde
    Reproducible path simulation of group and radial diffusions.
pde1d
    Survival, eigenvalue and exit-time solvers for the radial model.
spectral3d
    Dirichlet eigenvalue of the Heisenberg sub-Laplacian and MC tail fits.
stats
    Dominance verdicts, intervals and slope estimators.
completeness
    Curvature criterion for non-explosion and the barrier probe.
"""

from .drifts import (
    DomainError,
    FoliationBounds,
    SasakianModelSpec,
    f_rie,
    f_sas,
    general_bound_integral,
    kappa_eps_bound,
    sasakian_drift,
)
from .groups import GroupPoint, GroupSpec, cc_distance, heisenberg, quaternionic_heisenberg
from .pde1d import EigenEstimate, bessel_zero, eigen_1d, mean_exit_1d, survival_cdf
from .sde import SimConfig, simulate_group_paths, simulate_radial_paths

__version__ = "0.1.0"
