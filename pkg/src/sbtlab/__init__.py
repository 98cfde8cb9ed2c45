"""Slender-fiber Stokes flow: geometry, line-singularity evaluation and residual diagnostics."""

__version__ = "0.1.0"
