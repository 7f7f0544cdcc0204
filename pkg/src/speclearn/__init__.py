"""Spectral-coefficient operator learning: classical spectral reference
solvers for six parametric PDEs, matching weak-residual losses, and an
unsupervised sequential training pipeline."""

__version__ = "0.1.0"
