"""Numerical laboratory for the weighted fourth-order critical equation

    div(|x|^a grad(div(|x|^a grad u))) = |u|^{p-2} u,   p = 2N/(N-4+2a).
"""

from .params import (DegeneracyReport, DerivedConstants, ParameterError, ProblemParams,
                     degeneracy_check, derive, eigenvalue_lk, harmonic_dim)
from .closedform import (Family, RadialProfile, best_constant_radial, bubble_residual, c_of_m,
                         emden_fowler_profile, eval_profile, hardy_rellich_mu2, residual_pwht)
from .grid import (RadialField, TGrid, hnorm_sq, inner_alpha, lstar_norm, norm_equivalence_report,
                   project, rayleigh_quotient)
from .spectrum import ModeSpectrum, SGrid, kernel_certificate, mode_eigensolve, mu3
from .deficit import ManifoldFit, deficit, dist_to_manifold, rho_prediction, stability_ratio
from .reduction import (PerturbationH, ReductionResult, find_critical, gamma_curve, h_functional,
                        j_eps, solve_omega)

__version__ = "0.1.0"
