"""Stripe-phase numerics for a perimeter-plus-screened-Coulomb functional.

Submodules: kernels (Yukawa kernels, slicings, couplings), stripes1d
(one-dimensional stripe energies and profile search), geometry (periodic
rectangle unions, grids, stripe distance), energy_nd (d-dimensional
functionals, splitting, local averaging), gamma_limit (double-kernel
model and its sharp-interface limit), search (annealing and candidate
comparison), cli (command-line front end).
"""

__version__ = "0.1.0"

from .kernels import KernelSpec, RescaleParams
from .stripes1d import (PeriodicStripes1D, StripeProfile, optimal_width,
                        rescale_params_for)

__all__ = [
    "KernelSpec",
    "RescaleParams",
    "StripeProfile",
    "PeriodicStripes1D",
    "optimal_width",
    "rescale_params_for",
    "__version__",
]
