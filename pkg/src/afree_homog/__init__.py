"""Spectral tools for high-contrast homogenization of A-free fields on the torus."""
__version__ = "0.1.0"

from .operators import (DifferentialOperator, RankCertificate, eval_symbol, kernel_projection,
                        check_potential_pair, pseudoinverse, verify_constant_rank)
from .fields import (MicroDomain, Microstructure, PeriodicField, TwoVariableField, dft, fold, idft,
                     rasterize_microdomain, two_scale_pair, unfold)
from .projection import (KEEP_MEAN, ZERO_MEAN, ProjectionPlan, apply_adjoint, apply_operator, korn_gap,
                         project_Afree, recover_potential, residual_A)
from .integrands import Integrand, SoftFamily
from .solvers import SolveOptions, SolveReport
from .cells import alpha0_cell, counterexample_gap, fhom, fhom_limit, qa_envelope
from .highcontrast import (GammaSweepReport, HighContrastProblem, energy_Feps, gamma_sweep, minimize_Feps,
                           minimize_limit)
from . import catalog

IntegrandSpec = Integrand

__all__ = [name for name in dir() if not name.startswith("_")]
