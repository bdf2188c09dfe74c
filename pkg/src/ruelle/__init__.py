"""Ruelle invariants, systoles and index bounds for star-shaped toric domains.

Modules
-------
symplin    symplectic/complex linear algebra: polar decomposition and its
           derivative, Lyapunov solves, determinant and spectral phases
paths      sampled symplectic paths: rotation lifts, Maslov index, the
           Conley-Zehnder block calculus
toric      moment regions: canonical functions, Ruelle/volume/Laplacian
           quadrature, systole brackets, closed orbits and their indices
flows      Hamiltonian cocycle integration and Monte-Carlo Ruelle estimates
convexity  ellipsoid quantities, the systolic-type inequality, sandwich
           estimates, strained counterexample regions
cli        the ``ruelle`` command-line front end

Set ``RUELLE_NUMBA=0`` before import for the pure-numpy kernel fallback;
``RUELLE_THREADS`` caps kernel parallelism.
"""

from . import convexity, flows, paths, symplin, toric
from .toric import Ellipsoid, PFamily, RadialProfile, SmoothedUnion

__version__ = "0.1.0"

__all__ = [
    "Ellipsoid",
    "PFamily",
    "RadialProfile",
    "SmoothedUnion",
    "convexity",
    "flows",
    "paths",
    "symplin",
    "toric",
]
