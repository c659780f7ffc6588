"""Spectral Galerkin laboratory for a viscous stochastic shallow-water
wave equation with position-dependent transport noise on the circle."""

__version__ = "0.1.0"

from .spectral import (
    FourierField,
    GridMismatchError,
    SpectralGrid,
    derivative,
    helmholtz_solve,
    inf_and_sup,
    multiply,
    project,
    random_field,
    sobolev_norm,
)

__all__ = [
    "FourierField",
    "GridMismatchError",
    "SpectralGrid",
    "derivative",
    "helmholtz_solve",
    "inf_and_sup",
    "multiply",
    "project",
    "random_field",
    "sobolev_norm",
    "__version__",
]
