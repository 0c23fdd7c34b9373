"""Morrey extremals: discrete energy minimisation, symmetrisation operators
and checks of their symmetry and inequality properties."""
from __future__ import annotations

from .fields import (DomainError, GradientField, GridSpec, ScalarField, SmoothingKernel,
                     dirichlet_energy, from_polar, gradient, holder_seminorm, interpolate,
                     mollify, to_polar)
from .polar import PolarField, PolarSpec, polar_energy
from .extremal import (ExtremalSolution, SolverConfig, estimate_sharp_constant,
                       recover_source_strength, solve_extremal, uniqueness_probe)

__version__ = "0.1.0"
