"""Point and Bayesian fitters for the Magic Formula coefficients."""

from .nelder_mead import fit_nelder_mead
from .result import FitResult, SviConfig
from .svi import elbo, fit_svi, posterior_samples

__all__ = [
    "FitResult",
    "SviConfig",
    "fit_nelder_mead",
    "fit_svi",
    "elbo",
    "posterior_samples",
]
