"""
Fiber geometry: arclength centerline, parallel-transport frame, radius
profile, stretch map and the surface parameterization built on top of them.

Arclength along the extended centerline runs over [-3/2, 3/2]. The fiber
itself occupies [-eta, eta] with eta slightly above 1, and the line force
lives on the effective centerline [-1, 1].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import brentq

from .errors import DomainError, GeometryInvalidError, InputError

HALF_LENGTH = 1.5
CENTERLINE_KINDS = ("straight", "circular-arc", "spline", "analytic")
RADIUS_KINDS = ("prolate", "hemispherical-cap", "custom")


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0:
        raise InputError(f"expected a nonzero vector, got {v.tolist()}")
    return v / n


def _perpendicular(t):
    # any unit vector orthogonal to t
    trial = np.eye(3)[np.argmin(np.abs(t))]
    v = trial - np.dot(trial, t) * t
    return v / np.linalg.norm(v)


def _rows(v):
    return np.linalg.norm(v, axis=-1)


# ---------------------------------------------------------------- centerline

class Centerline:
    """Arclength-parameterized curve on [-3/2, 3/2].

    ``position``, ``tangent`` and ``second_derivative`` take an array of
    arclength values and return ``(..., 3)`` arrays.
    """

    def __init__(self, kind, position, tangent, second_derivative, params=None,
                 sample_count=601):
        self.kind = kind
        self.params = dict(params or {})
        self._position = position
        self._tangent = tangent
        self._second = second_derivative

        phi = np.linspace(-HALF_LENGTH, HALF_LENGTH, 3001)
        tan = self.tangent(phi)
        if not np.all(np.isfinite(tan)):
            raise GeometryInvalidError("centerline tangent is undefined somewhere")
        self.kappa_max = float(np.max(_rows(self.second_derivative(phi))))
        self.c_gamma = self._chord_ratio(sample_count)

    def position(self, phi):
        return self._position(np.asarray(phi, dtype=float))

    def tangent(self, phi):
        return self._tangent(np.asarray(phi, dtype=float))

    def second_derivative(self, phi):
        return self._second(np.asarray(phi, dtype=float))

    def _chord_ratio(self, n):
        phi = np.linspace(-HALF_LENGTH, HALF_LENGTH, n)
        x = self.position(phi)
        i, j = np.triu_indices(n, k=1)
        ratio = _rows(x[i] - x[j]) / (phi[j] - phi[i])
        return float(np.min(ratio))

    def rotated(self, rotation):
        """Same curve after a rigid rotation about the origin."""
        q = np.asarray(rotation, dtype=float)
        return Centerline(self.kind,
                          lambda p: self._position(p) @ q.T,
                          lambda p: self._tangent(p) @ q.T,
                          lambda p: self._second(p) @ q.T,
                          params=self.params)


def _straight(params):
    d = _unit(params.get("direction", (0.0, 0.0, 1.0)))
    zero = np.zeros(3)
    return (lambda p: p[..., None] * d,
            lambda p: np.broadcast_to(d, p.shape + (3,)).copy(),
            lambda p: np.broadcast_to(zero, p.shape + (3,)).copy())


def _arc(params):
    radius = float(params.get("radius", 2.0))
    if not radius > 0:
        raise InputError("circular-arc radius must be positive")
    t0 = _unit(params.get("tangent", (1.0, 0.0, 0.0)))
    nrm = _unit(params.get("plane_normal", (0.0, 0.0, 1.0)))
    if abs(np.dot(t0, nrm)) > 1e-12:
        raise InputError("arc tangent must lie in the arc plane")
    m = np.cross(nrm, t0)

    def pos(p):
        w = p[..., None] / radius
        return radius * np.sin(w) * t0 + radius * (1.0 - np.cos(w)) * m

    def tan(p):
        w = p[..., None] / radius
        return np.cos(w) * t0 + np.sin(w) * m

    def sec(p):
        w = p[..., None] / radius
        return (-np.sin(w) * t0 + np.cos(w) * m) / radius

    return pos, tan, sec


def _helix(params):
    r = float(params.get("radius", 0.5))
    c = float(params.get("pitch", 0.5))
    if r <= 0:
        raise InputError("helix radius must be positive")
    w = np.hypot(r, c)

    def pos(p):
        a = p / w
        return np.stack([r * (np.cos(a) - 1.0), r * np.sin(a), c * a], axis=-1)

    def tan(p):
        a = p / w
        return np.stack([-r * np.sin(a), r * np.cos(a), np.full_like(a, c)], axis=-1) / w

    def sec(p):
        a = p / w
        return np.stack([-r * np.cos(a), -r * np.sin(a), np.zeros_like(a)], axis=-1) / w**2

    return pos, tan, sec


def _arclength_table(spline, u_knots, per_interval=64):
    # fine grid in the spline parameter and cumulative arclength on it
    pieces = [np.linspace(u_knots[i], u_knots[i + 1], per_interval, endpoint=False)
              for i in range(len(u_knots) - 1)]
    grid = np.concatenate(pieces + [u_knots[-1:]])
    gx, gw = np.polynomial.legendre.leggauss(16)
    lo, hi = grid[:-1], grid[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    nodes = mid[:, None] + half[:, None] * gx
    speed = _rows(spline(nodes, 1))
    seg = half * (speed @ gw)
    return grid, np.concatenate([[0.0], np.cumsum(seg)])


def _spline(params, table_points=6001):
    nodes = np.asarray(params.get("nodes", []), dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != 3:
        raise InputError("spline nodes must be a list of 3-vectors")
    if len(nodes) < 4:
        raise InputError("spline centerline needs at least 4 nodes")
    chords = _rows(np.diff(nodes, axis=0))
    if np.any(chords < 1e-12):
        raise GeometryInvalidError("repeated spline nodes")
    u_knots = np.concatenate([[0.0], np.cumsum(chords)])
    spline = CubicSpline(u_knots, nodes, axis=0)

    grid, sigma = _arclength_table(spline, u_knots)
    total = sigma[-1]
    if total < 2 * HALF_LENGTH:
        raise InputError(
            f"spline arclength {total:.6g} is shorter than the required 3")
    gx, gw = np.polynomial.legendre.leggauss(16)

    def sigma_of(u):
        k = np.clip(np.searchsorted(grid, u, side="right") - 1, 0, len(grid) - 2)
        lo = grid[k]
        half = 0.5 * (u - lo)
        nodes_ = (lo + half)[:, None] + half[:, None] * gx
        return sigma[k] + half * (_rows(spline(nodes_, 1)) @ gw)

    # invert arclength on a uniform table by Newton iteration
    phi_tab = np.linspace(-HALF_LENGTH, HALF_LENGTH, table_points)
    target = phi_tab + 0.5 * total
    u = np.interp(target, sigma, grid)
    for _ in range(30):
        step = (sigma_of(u) - target) / _rows(spline(u, 1))
        u = np.clip(u - step, 0.0, u_knots[-1])
        if np.max(np.abs(step)) < 1e-14:
            break
    if np.max(np.abs(sigma_of(u) - target)) > 1e-8:
        raise GeometryInvalidError("arclength reparameterization did not converge")
    u_of_phi = CubicHermiteSpline(phi_tab, u, 1.0 / _rows(spline(u, 1)))

    def pos(p):
        return spline(u_of_phi(p))

    def tan(p):
        d1 = spline(u_of_phi(p), 1)
        return d1 / _rows(d1)[..., None]

    def sec(p):
        uu = u_of_phi(p)
        d1, d2 = spline(uu, 1), spline(uu, 2)
        sp = _rows(d1)[..., None]
        t = d1 / sp
        return (d2 - np.sum(d2 * t, axis=-1)[..., None] * t) / sp**2

    return pos, tan, sec


def build_centerline(kind, params=None) -> Centerline:
    """Centerline presets: straight, circular-arc, spline, analytic (helix or callables)."""
    params = dict(params or {})
    if kind == "straight":
        fns = _straight(params)
    elif kind == "circular-arc":
        fns = _arc(params)
    elif kind == "spline":
        fns = _spline(params)
    elif kind == "analytic":
        if "position" in params:
            fns = (params["position"], params["tangent"], params["second_derivative"])
        elif params.get("curve", "helix") == "helix":
            fns = _helix(params)
        else:
            raise InputError(f"unknown analytic curve {params.get('curve')!r}")
    else:
        raise InputError(f"unknown centerline kind {kind!r}")
    line = Centerline(kind, *fns, params=params)
    if line.c_gamma < 1e-3:
        raise GeometryInvalidError(
            f"centerline (nearly) self-intersects: chord ratio {line.c_gamma:.3g}")
    return line


# ---------------------------------------------------------------- frame

@dataclass
class FrameField:
    """Parallel-transport frame sampled on a uniform arclength grid."""
    centerline: Centerline
    phi: np.ndarray
    e_t: np.ndarray
    e_n1: np.ndarray
    e_n2: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    step: float
    interpolation: str = "cubic-reorthonormalized"
    _n1_spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        self._n1_spline = CubicSpline(self.phi, self.e_n1, axis=0)

    def at(self, phi):
        """(e_t, e_n1, e_n2, kappa1, kappa2) at arbitrary arclength values."""
        phi = np.asarray(phi, dtype=float)
        t = self.centerline.tangent(phi)
        n1 = self._n1_spline(phi)
        n1 = n1 - np.sum(n1 * t, axis=-1)[..., None] * t
        n1 = n1 / _rows(n1)[..., None]
        n2 = np.cross(t, n1)
        x2 = self.centerline.second_derivative(phi)
        return t, n1, n2, np.sum(x2 * n1, axis=-1), np.sum(x2 * n2, axis=-1)

    def orthonormality_defect(self):
        frames = np.stack([self.e_t, self.e_n1, self.e_n2], axis=1)
        gram = np.einsum("nik,njk->nij", frames, frames)
        return float(np.max(np.abs(gram - np.eye(3))))


def build_bishop_frame(centerline, step=1e-3, seed_normal=None,
                       reorthonormalize=True) -> FrameField:
    """Transport a normal vector along the centerline with RK4.

    Only e_n1 is integrated: de_n1/dphi = -(X''.e_n1) e_t. The second
    normal is the cross product and the curvature components are the
    projections of X'' on the two normals.
    """
    if not step > 0:
        raise InputError("frame step must be positive")
    n = int(round(2 * HALF_LENGTH / step)) + 1
    phi = np.linspace(-HALF_LENGTH, HALF_LENGTH, n)
    h = phi[1] - phi[0]

    half = np.linspace(-HALF_LENGTH, HALF_LENGTH, 2 * n - 1)
    tan = centerline.tangent(half)
    sec = centerline.second_derivative(half)
    if not (np.all(np.isfinite(tan)) and np.all(np.isfinite(sec))):
        raise GeometryInvalidError("centerline tangent is undefined on the frame grid")

    t0 = tan[0]
    if seed_normal is None:
        y = _perpendicular(t0)
    else:
        y = np.asarray(seed_normal, dtype=float)
        norm = np.linalg.norm(y)
        if norm == 0 or abs(np.dot(y, t0)) > 1e-10 * norm:
            raise InputError("seed normal must be perpendicular to the tangent at the left end")
        y = y / norm

    def rhs(i, v):
        return -np.dot(sec[i], v) * tan[i]

    n1 = np.empty((n, 3))
    n1[0] = y
    for k in range(n - 1):
        i = 2 * k
        k1 = rhs(i, y)
        k2 = rhs(i + 1, y + 0.5 * h * k1)
        k3 = rhs(i + 1, y + 0.5 * h * k2)
        k4 = rhs(i + 2, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if reorthonormalize:
            t = tan[i + 2]
            y = y - np.dot(y, t) * t
            y = y / np.linalg.norm(y)
        n1[k + 1] = y

    e_t = tan[::2]
    e_n2 = np.cross(e_t, n1)
    x2 = sec[::2]
    return FrameField(centerline, phi, e_t, n1, e_n2,
                      np.sum(x2 * n1, axis=1), np.sum(x2 * e_n2, axis=1), h)


# ---------------------------------------------------------------- radius

class RadiusProfile:
    """Cross-section radius a(phi) on [-eta, eta], vanishing at the tips.

    ``a_aprime`` is the product a a', which stays finite at the tips even
    where a' itself blows up.
    """

    def __init__(self, kind, epsilon, eta, a, a_prime, a_aprime=None, note=""):
        self.kind = kind
        self.epsilon = float(epsilon)
        self.eta = float(eta)
        self._a = a
        self._ap = a_prime
        self._aap = a_aprime
        self.note = note

    def a(self, phi):
        return self._a(np.asarray(phi, dtype=float))

    def a_prime(self, phi):
        return self._ap(np.asarray(phi, dtype=float))

    def a_aprime(self, phi):
        phi = np.asarray(phi, dtype=float)
        if self._aap is not None:
            return self._aap(phi)
        return self.a(phi) * self.a_prime(phi)


def radius_preset(kind, epsilon) -> RadiusProfile:
    eps = float(epsilon)
    if not 0 < eps <= 0.25:
        raise InputError(f"epsilon must lie in (0, 1/4], got {eps}")
    if kind == "prolate":
        eta = np.sqrt(1.0 + eps**2)

        def a(p):
            return np.sqrt(np.maximum(eta**2 - p**2, 0.0)) / eta

        def ap(p):
            with np.errstate(divide="ignore"):
                return -p / (eta * np.sqrt(np.maximum(eta**2 - p**2, 0.0)))

        return RadiusProfile(kind, eps, eta, a, ap, lambda p: -p / eta**2)

    if kind == "hemispherical-cap":
        eta = 1.0 + eps

        def a(p):
            q = np.maximum(np.abs(p) - 1.0, 0.0)
            return np.sqrt(np.maximum(eps**2 - q**2, 0.0)) / eps

        def ap(p):
            q = np.maximum(np.abs(p) - 1.0, 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = -np.sign(p) * q / (eps * np.sqrt(np.maximum(eps**2 - q**2, 0.0)))
            return np.where(q == 0, 0.0, out)

        def aap(p):
            return -np.sign(p) * np.maximum(np.abs(p) - 1.0, 0.0) / eps**2

        return RadiusProfile(kind, eps, eta, a, ap, aap,
                             note="hemispherical caps: surface is C^{1,1}, not C^2")
    raise InputError(f"unknown radius kind {kind!r}")


@dataclass
class AdmissibilityReport:
    conditions: dict
    constants: dict
    reduced_regularity: bool
    note: str = ""

    @property
    def passed(self):
        return all(c["passed"] for c in self.conditions.values())

    def to_dict(self):
        return {"passed": self.passed, "conditions": self.conditions,
                "constants": self.constants,
                "reduced_regularity": self.reduced_regularity, "note": self.note}


def _endpoint_sup(fn, eta, decades=range(2, 11)):
    """Sup of fn approaching both tips geometrically; inf when it keeps growing."""
    vals = []
    for k in decades:
        gap = eta * 10.0**-k
        vals.append(max(abs(fn(eta - gap)), abs(fn(-eta + gap))))
    vals = np.asarray(vals)
    if not np.all(np.isfinite(vals)) or vals[-1] > 1.5 * vals[-2] and vals[-1] > 1e-12:
        return np.inf
    return float(np.max(vals))


def validate_admissible_radius(profile, epsilon=None, grid_size=20001) -> AdmissibilityReport:
    """Check the four admissibility conditions and measure their constants.

    (1) a is C^2, tested through second differences of a';
    (2) spheroidal, monotone decay to zero at both tips;
    (3) 0 < a <= 1 on the open interval, bounded below in the middle;
    (4) a a' bounded.
    """
    eps = profile.epsilon if epsilon is None else float(epsilon)
    eta = profile.eta
    grid_size = max(int(grid_size), 10001)
    phi = np.linspace(-eta, eta, grid_size)
    spacing = phi[1] - phi[0]
    inner = phi[1:-1]
    a_in = profile.a(inner)
    conds = {}

    # (1) jumps in a'' survive grid refinement, smooth variation shrinks linearly
    margin = 32 * spacing
    pts = inner[np.abs(inner) < eta - margin]

    def second_diff(h):
        return np.abs(profile.a_prime(pts + h) - 2 * profile.a_prime(pts)
                      + profile.a_prime(pts - h)) / h

    coarse, fine = second_diff(4 * spacing), second_diff(spacing)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(coarse > 1e-8, fine / coarse, 0.0)
    kinks = pts[ratio > 0.4]
    conds["c2_smooth"] = {
        "passed": bool(kinks.size == 0 and np.all(np.isfinite(coarse))),
        "detail": ("no jump in a'' detected" if kinks.size == 0 else
                   f"jump in a'' near phi = {sorted(set(np.round(kinks, 3).tolist()))[:4]}"),
    }

    # (2) spheroidal endpoints
    tips = profile.a(np.array([-eta, eta]))
    tips_zero = bool(np.all(np.abs(tips) <= 1e-12))
    delta_a = None
    for delta in (0.5, 0.25, 0.125, 0.0625):
        outward_right = phi[phi >= 1 - delta]
        outward_left = phi[phi <= -(1 - delta)][::-1]
        if all(np.all(np.diff(profile.a(seg)) <= 1e-12)
               for seg in (outward_right, outward_left)):
            delta_a = delta
            break

    def spheroid_dev(p):
        root = np.sqrt(max(eta**2 - p**2, 0.0))
        return abs(profile.a(p) - root) / (eps**2 * root)

    c_a = np.inf
    if tips_zero and delta_a is not None:
        band = inner[np.abs(inner) >= 1 - delta_a]
        root = np.sqrt(eta**2 - band**2)
        grid_sup = np.max(np.abs(profile.a(band) - root) / (eps**2 * root))
        c_a = max(float(grid_sup), _endpoint_sup(spheroid_dev, eta))
    conds["spheroidal_endpoints"] = {
        "passed": bool(tips_zero and delta_a is not None and np.isfinite(c_a)),
        "detail": (f"a(+-eta) = {tips.tolist()}, monotone band delta_a = {delta_a}, "
                   f"c_a = {c_a:.6g}"),
    }

    # (3) bounds
    lo, hi = float(np.min(a_in)), float(np.max(a_in))
    mid = inner[np.abs(inner) <= 1 - (delta_a or 0.5)]
    a0 = float(np.min(profile.a(mid))) if mid.size else lo
    conds["bounded_positive"] = {
        "passed": bool(lo > 0 and hi <= 1 + 1e-12 and a0 > 0),
        "detail": f"min a = {lo:.6g}, max a = {hi:.6g}, a0 = {a0:.6g}",
    }

    # (4) a a' bounded
    aap = np.abs(profile.a_aprime(inner))
    c_bar = max(float(np.max(aap)), _endpoint_sup(profile.a_aprime, eta))
    conds["bounded_slope_product"] = {
        "passed": bool(np.isfinite(c_bar)),
        "detail": f"sup |a a'| = {c_bar:.6g}",
    }

    c_eta = (eta - 1.0) / eps**2
    constants = {"delta_a": delta_a, "c_a": c_a, "a0": a0, "c_bar_a": c_bar,
                 "c_eta": c_eta, "c_eta0": c_eta, "eta": eta,
                 "eta_in_range": bool(1 < eta < 1.5)}
    return AdmissibilityReport(conds, constants,
                               reduced_regularity=profile.kind == "hemispherical-cap",
                               note=profile.note)


# ---------------------------------------------------------------- stretch

class StretchMap:
    """Odd bijection s in [-1, 1] -> phi in [-eta, eta]."""

    def __init__(self, kind, eta, phi_of_s, derivative, inverse=None):
        self.kind = kind
        self.eta = float(eta)
        self._phi = phi_of_s
        self._dphi = derivative
        self._inv = inverse
        s = np.linspace(-1.0, 1.0, 2001)
        self.c_phi_raw = float(max(np.max(np.abs(self.phi_of_s(s) - s)),
                                   np.max(np.abs(self.derivative(s) - 1.0))))

    def phi_of_s(self, s):
        return self._phi(np.asarray(s, dtype=float))

    def derivative(self, s):
        return self._dphi(np.asarray(s, dtype=float))

    def s_of_phi(self, phi):
        phi = np.asarray(phi, dtype=float)
        if self._inv is not None:
            return self._inv(phi)
        s = np.linspace(-1.0, 1.0, 4001)
        return np.interp(phi, self.phi_of_s(s), s)

    def c_phi(self, epsilon):
        return self.c_phi_raw / float(epsilon)**2


def stretch_uniform(eta) -> StretchMap:
    eta = float(eta)
    if not 1 < eta < 1.5:
        raise InputError(f"eta must lie in (1, 3/2), got {eta}")
    return StretchMap("uniform", eta, lambda s: eta * s,
                      lambda s: np.full_like(s, eta), lambda p: p / eta)


@dataclass
class StretchReport:
    bijective: bool
    odd: bool
    endpoints: bool
    within_bounds: bool
    c_phi: float
    c_phi_bound: float

    @property
    def passed(self):
        return self.bijective and self.odd and self.endpoints and self.within_bounds

    def to_dict(self):
        return {"passed": self.passed, "bijective": self.bijective, "odd": self.odd,
                "endpoints": self.endpoints, "within_bounds": self.within_bounds,
                "c_phi": self.c_phi, "c_phi_bound": self.c_phi_bound}


def validate_stretch(stretch, epsilon, c_phi_bound=1.0, grid_size=2001) -> StretchReport:
    eps = float(epsilon)
    s = np.linspace(-1.0, 1.0, grid_size)
    p = stretch.phi_of_s(s)
    bij = bool(np.all(np.diff(p) > 0))
    odd = bool(np.max(np.abs(stretch.phi_of_s(-s) + p)) <= 1e-12)
    ends = bool(abs(p[-1] - stretch.eta) <= 1e-12 and abs(p[0] + stretch.eta) <= 1e-12)
    dev = max(np.max(np.abs(p - s)), np.max(np.abs(stretch.derivative(s) - 1.0)))
    c_phi = float(dev / eps**2)
    return StretchReport(bij, odd, ends, bool(c_phi <= c_phi_bound), c_phi, float(c_phi_bound))


# ---------------------------------------------------------------- body

@dataclass
class SlenderBodyGeometry:
    centerline: Centerline
    frame: FrameField
    radius: RadiusProfile
    stretch: StretchMap
    epsilon: float
    r_max: float

    @property
    def eta(self):
        return self.radius.eta

    @property
    def kappa_max(self):
        return self.centerline.kappa_max

    @property
    def c_gamma(self):
        return self.centerline.c_gamma

    def radius_at(self, phi):
        """epsilon * a(phi): the physical cross-section radius."""
        return self.epsilon * self.radius.a(phi)


def build_geometry(centerline, radius, stretch=None, frame=None, step=1e-3,
                   seed_normal=None) -> SlenderBodyGeometry:
    eps = radius.epsilon
    if not 1 < radius.eta < 1.5:
        raise GeometryInvalidError(f"fiber half-length eta = {radius.eta} outside (1, 3/2)")
    if frame is None:
        frame = build_bishop_frame(centerline, step, seed_normal)
    if stretch is None:
        stretch = stretch_uniform(radius.eta)
    kmax = centerline.kappa_max
    r_max = centerline.c_gamma / 2
    if kmax > 0:
        r_max = min(r_max, 1.0 / (2 * kmax))
    if eps > r_max / 4 + 1e-15:
        raise GeometryInvalidError(
            f"epsilon = {eps} exceeds r_max/4 = {r_max / 4:.6g} for this centerline")
    return SlenderBodyGeometry(centerline, frame, radius, stretch, eps, r_max)


@dataclass
class SurfaceFrame:
    """Everything local to a surface point (phi, theta)."""
    x: np.ndarray
    center: np.ndarray
    e_t: np.ndarray
    e_rho: np.ndarray
    e_theta: np.ndarray
    kappa_hat: np.ndarray
    a: np.ndarray
    a_prime: np.ndarray
    a_aprime: np.ndarray


def surface_frame(geometry, phi, theta) -> SurfaceFrame:
    """Local data at broadcast (phi, theta); no domain check (tips allowed)."""
    phi, theta = np.broadcast_arrays(np.asarray(phi, dtype=float),
                                     np.asarray(theta, dtype=float))
    t, n1, n2, k1, k2 = geometry.frame.at(phi)
    c, s = np.cos(theta)[..., None], np.sin(theta)[..., None]
    e_rho = c * n1 + s * n2
    e_theta = -s * n1 + c * n2
    a = geometry.radius.a(phi)
    center = geometry.centerline.position(phi)
    return SurfaceFrame(
        x=center + geometry.epsilon * a[..., None] * e_rho,
        center=center, e_t=t, e_rho=e_rho, e_theta=e_theta,
        kappa_hat=k1 * np.cos(theta) + k2 * np.sin(theta),
        a=a, a_prime=geometry.radius.a_prime(phi), a_aprime=geometry.radius.a_aprime(phi))


def jacobian_from_frame(eps, fr):
    return eps * np.sqrt((fr.a * (1 - eps * fr.a * fr.kappa_hat))**2 + (eps * fr.a_aprime)**2)


def normal_from_frame(eps, fr):
    """Unit normal pointing into the body, written with a a' so tips stay finite."""
    num = -fr.a[..., None] * fr.e_rho + eps * fr.a_aprime[..., None] * fr.e_t
    return num / np.sqrt(fr.a**2 + (eps * fr.a_aprime)**2)[..., None]


def _check_phi(geometry, phi):
    if np.any(np.abs(np.asarray(phi)) >= geometry.eta):
        raise DomainError("surface parameter |phi| must be below eta")


def surface_point(geometry, phi, theta):
    _check_phi(geometry, phi)
    return surface_frame(geometry, phi, theta).x


def surface_jacobian(geometry, phi, theta):
    _check_phi(geometry, phi)
    return jacobian_from_frame(geometry.epsilon, surface_frame(geometry, phi, theta))


def surface_normal(geometry, phi, theta):
    _check_phi(geometry, phi)
    return normal_from_frame(geometry.epsilon, surface_frame(geometry, phi, theta))


def nearest_point(centerline, x, lo, hi, samples=801):
    """Arclength in [lo, hi] of the centerline point closest to x, and the distance.

    Coarse sampling brackets the minimum; the foot of the perpendicular is
    then found as a root of (x - X(phi)).e_t(phi).
    """
    x = np.asarray(x, dtype=float)
    grid = np.linspace(lo, hi, samples)
    d = _rows(centerline.position(grid) - x)
    k = int(np.argmin(d))
    best = (float(d[k]), float(grid[k]))

    def slope(p):
        p = np.array(p)
        return float(np.dot(x - centerline.position(p), centerline.tangent(p)))

    for a, b in ((grid[max(k - 1, 0)], grid[k]), (grid[k], grid[min(k + 1, samples - 1)])):
        if a < b and slope(a) * slope(b) < 0:
            p = brentq(slope, a, b, xtol=1e-15, rtol=1e-15)
            best = min(best, (float(np.linalg.norm(centerline.position(np.array(p)) - x)), p))
    return float(best[1]), float(best[0])


def nearest_centerline_point(geometry, x):
    """Closest point on the fiber's own centerline [-eta, eta]."""
    return nearest_point(geometry.centerline, x, -geometry.eta, geometry.eta)


def is_inside(geometry, x, rel_tol=1e-9):
    """True when x lies strictly inside the fiber (tube coordinates)."""
    phi, dist = nearest_centerline_point(geometry, x)
    if dist >= geometry.r_max or abs(phi) >= geometry.eta:
        return False
    return dist < geometry.radius_at(phi) * (1 - rel_tol)


# ---------------------------------------------------------------- JSON

def _strict(doc, allowed, where):
    if not isinstance(doc, dict):
        raise InputError(f"{where} must be a JSON object")
    extra = set(doc) - set(allowed)
    if extra:
        raise InputError(f"unknown key {sorted(extra)[0]!r} in {where}")


def geometry_from_dict(doc, epsilon=None) -> SlenderBodyGeometry:
    """Build a geometry from {centerline, radius, stretch, frame}."""
    _strict(doc, ("centerline", "radius", "stretch", "frame"), "geometry")
    cl = doc.get("centerline", {"kind": "straight"})
    _strict(cl, ("kind", "params"), "geometry.centerline")
    rad = doc.get("radius", {})
    _strict(rad, ("kind", "epsilon"), "geometry.radius")
    st = doc.get("stretch", {"kind": "uniform"})
    _strict(st, ("kind",), "geometry.stretch")
    fr = doc.get("frame", {})
    _strict(fr, ("step", "seed_normal"), "geometry.frame")

    eps = rad.get("epsilon") if epsilon is None else epsilon
    if eps is None:
        raise InputError("geometry.radius.epsilon is required")
    if not isinstance(eps, (int, float)) or not 0 < eps <= 0.25:
        raise InputError(f"epsilon must lie in (0, 0.25], got {eps}")
    if st.get("kind", "uniform") != "uniform":
        raise InputError(f"unknown stretch kind {st.get('kind')!r}")
    line = build_centerline(cl.get("kind", "straight"), cl.get("params", {}))
    prof = radius_preset(rad.get("kind", "prolate"), eps)
    return build_geometry(line, prof, stretch_uniform(prof.eta),
                          step=float(fr.get("step", 1e-3)),
                          seed_normal=fr.get("seed_normal"))
