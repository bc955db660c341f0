"""Stochastic advection-diffusion-reaction on moving closed planar curves.

Piecewise-linear finite elements on the parameter circle, semi-implicit
Euler-Maruyama in time, Q-Wiener noise from a counter-based Brownian lattice.
"""
from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
