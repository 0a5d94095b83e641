"""Numerics for the fully nonlinear Loewner-Nirenberg problem f(lambda(-A^u)) = 1.

Modules: ``cone`` (Garding cones and sigma_ell), ``schouten`` (eigenvalues of
the conformal Hessian), ``canonical`` (closed forms and barriers), ``solver``
(symmetric Dirichlet problems and Perron sweeps), ``regularity``
(regular/irregular verdicts) and ``cli``.
"""
__version__ = "0.1.0"

from .cone import CurvatureFunction, EigenvalueVector, locate, model_vector
from .domain import DomainSpec1D, Profile1D, annulus, ball, exterior, slab
from .regularity import classify
from .solver import SolveOptions, perron_sweep, solve_dirichlet

__all__ = ["CurvatureFunction", "EigenvalueVector", "locate", "model_vector", "DomainSpec1D",
           "Profile1D", "annulus", "ball", "exterior", "slab", "classify", "SolveOptions",
           "perron_sweep", "solve_dirichlet", "__version__"]
