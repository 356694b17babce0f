"""Simulation and estimation toolkit for coupled fast-slow ODEs.

Simulates fast-slow systems with optional stochastic regularization of the
fast dynamics, estimates the drift and diffusion coefficients of the
homogenized limiting SDE by ergodic (Green-Kubo) time averages, and validates
the estimates against a one-dimensional cell-problem oracle and the
Lorenz-driven Ornstein-Uhlenbeck case study.
"""

from ._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
