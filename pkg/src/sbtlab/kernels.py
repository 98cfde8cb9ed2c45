"""
Free-space Stokes kernels and their analytic gradients.

All functions broadcast over leading axes: ``x`` has shape ``(..., 3)``.
Matrices come back as ``(..., 3, 3)`` and gradients as ``(..., 3, 3, 3)``
with the derivative index last, i.e. ``grad[..., i, j, k] = d K_ij / d x_k``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularEvaluationError

SINGULAR_RADIUS = 1e-14

_EYE = np.eye(3)


def _radius(x):
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x * x, axis=-1))
    if np.any(r < SINGULAR_RADIUS):
        raise SingularEvaluationError("kernel evaluated at the source point")
    return x, r


def stokeslet(x):
    """I/|x| + x x^T/|x|^3."""
    x, r = _radius(x)
    r = r[..., None, None]
    xx = x[..., :, None] * x[..., None, :]
    return _EYE / r + xx / r**3


def doublet(x):
    """I/|x|^3 - 3 x x^T/|x|^5, which is half the Laplacian of the stokeslet."""
    x, r = _radius(x)
    r = r[..., None, None]
    xx = x[..., :, None] * x[..., None, :]
    return _EYE / r**3 - 3.0 * xx / r**5


def pressure_kernel(x, f):
    """Pressure paired with the stokeslet: x.f / (4 pi |x|^3)."""
    x, r = _radius(x)
    f = np.asarray(f, dtype=float)
    return np.sum(x * f, axis=-1) / (4.0 * np.pi * r**3)


@dataclass(frozen=True)
class KernelJet:
    value: np.ndarray
    gradient: np.ndarray


def kernel_jets(x):
    """Values and gradients of the stokeslet and doublet at x."""
    x, r = _radius(x)
    r2 = r[..., None, None, None]
    # delta_ik x_j + delta_jk x_i, with k last
    sym = (np.einsum("ik,...j->...ijk", _EYE, x)
           + np.einsum("jk,...i->...ijk", _EYE, x))
    dij_xk = np.einsum("ij,...k->...ijk", _EYE, x)
    xxx = x[..., :, None, None] * x[..., None, :, None] * x[..., None, None, :]

    gs = -dij_xk / r2**3 + sym / r2**3 - 3.0 * xxx / r2**5
    gd = -3.0 * dij_xk / r2**5 - 3.0 * sym / r2**5 + 15.0 * xxx / r2**7
    return KernelJet(stokeslet(x), gs), KernelJet(doublet(x), gd)


def stokeslet_stress(x, f):
    """Stress tensor of the flow S(x) f / (8 pi) with pressure x.f/(4 pi |x|^3).

    Classical closed form -3 x x^T (x.f) / (4 pi |x|^5), used as an oracle.
    """
    x, r = _radius(x)
    xf = np.sum(x * np.asarray(f, dtype=float), axis=-1)[..., None, None]
    xx = x[..., :, None] * x[..., None, :]
    return -3.0 * xx * xf / (4.0 * np.pi * r[..., None, None]**5)
