"""Line force densities on [-1, 1] and their endpoint-weighted norms."""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from scipy.integrate import quad

from .errors import InputError


class ForceDensity:
    """Vector-valued f(s); ``f`` and ``f_prime`` map arrays of s to ``(..., 3)``."""

    def __init__(self, kind, f, f_prime=None, direction=None):
        self.kind = kind
        self._f = f
        self._fp = f_prime
        self.direction = None if direction is None else np.asarray(direction, dtype=float)

    def __call__(self, s):
        return self._f(np.asarray(s, dtype=float))

    @property
    def has_derivative(self):
        return self._fp is not None

    def derivative(self, s, h=1e-6):
        s = np.asarray(s, dtype=float)
        if self._fp is not None:
            return self._fp(s)
        # central differences kept inside [-1, 1]
        lo = np.maximum(s - h, -1.0)
        hi = np.minimum(s + h, 1.0)
        return (self(hi) - self(lo)) / (hi - lo)[..., None]

    def scaled(self, factor):
        fp = None if self._fp is None else (lambda s: factor * self._fp(s))
        d = None if self.direction is None else factor * self.direction
        return ForceDensity(self.kind, lambda s: factor * self._f(s), fp, d)


def constant_force(direction) -> ForceDensity:
    d = np.asarray(direction, dtype=float)

    def f(s):
        return np.broadcast_to(d, np.shape(s) + (3,)).copy()

    def fp(s):
        return np.zeros(np.shape(s) + (3,))

    return ForceDensity("constant", f, fp, d)


def parabolic_force(direction) -> ForceDensity:
    """(1 - s^2) d: vanishes at the ends like the square root weight requires."""
    d = np.asarray(direction, dtype=float)
    return ForceDensity("parabolic-decay",
                        lambda s: (1.0 - s**2)[..., None] * d,
                        lambda s: (-2.0 * s)[..., None] * d, d)


def force_from_spec(spec: str) -> ForceDensity:
    """Parse ``kind:fx,fy,fz`` with kind constant or parabolic."""
    try:
        kind, vec = spec.split(":")
        d = [float(v) for v in vec.split(",")]
    except ValueError:
        raise InputError(f"force string must look like parabolic:1,0,0, got {spec!r}")
    if len(d) != 3:
        raise InputError("force direction needs three components")
    if kind == "constant":
        return constant_force(d)
    if kind in ("parabolic", "parabolic-decay"):
        return parabolic_force(d)
    raise InputError(f"unknown force kind {kind!r}")


@dataclass(frozen=True)
class DecayNorms:
    c1_norm: float
    ca_norm: float
    l2a_norm: float


def _weighted_endpoint_ratio(f, side):
    # |f| / sqrt(1 - s^2) approaching one end over ten decades
    gaps = 10.0 ** -np.arange(2, 13)
    s = side * (1.0 - gaps)
    return np.linalg.norm(f(s), axis=-1) / np.sqrt(gaps * (2.0 - gaps))


def decay_norms(f: ForceDensity, grid_size=4001) -> DecayNorms:
    """C^1 norm, square-root-weighted sup norm and log-weighted L2 norm."""
    if grid_size < 1000:
        raise InputError("decay norms need at least 1000 grid points")
    k = np.arange(grid_size)
    s = -np.cos(np.pi * k / (grid_size - 1))
    mag = np.linalg.norm(f(s), axis=-1)
    dmag = np.linalg.norm(f.derivative(s), axis=-1)
    c1 = float(np.max(mag) + np.max(dmag))

    ca = float(np.max(mag[1:-1] / np.sqrt(1.0 - s[1:-1]**2)))
    for side in (-1.0, 1.0):
        r = _weighted_endpoint_ratio(f, side)
        if mag[0 if side < 0 else -1] > 1e-14 or (r[-1] > 1.5 * r[-2] and r[-1] > 1e-12):
            ca = np.inf
            break
        ca = max(ca, float(np.max(r)))

    def sq(t):
        return float(np.sum(f(np.array(t))**2))

    # |log(1 - s^2)| = -log(1 - s) - log(1 + s); quad's algebraic-log weights
    # take care of both endpoint singularities
    right = quad(sq, -1.0, 1.0, weight="alg-logb", wvar=(0.0, 0.0), limit=200)[0]
    left = quad(sq, -1.0, 1.0, weight="alg-loga", wvar=(0.0, 0.0), limit=200)[0]
    l2a = float(np.sqrt(max(-(right + left), 0.0))) + 0.0
    return DecayNorms(c1, ca, l2a)
