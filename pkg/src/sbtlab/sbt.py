"""
Slender-body velocity and pressure: stokeslets plus doublets spread along
the effective centerline t in [-1, 1],

    8 pi u(x) = int (S(R) + eps^2 a(t)^2 / 2 D(R)) f(t) dt,   R = x - X(t),
    4 pi p(x) = int R.f(t) / |R|^3 dt,

and the local asymptotic formula for the centerline velocity.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, InputError
from .geometry import is_inside, nearest_point, surface_frame
from .quadrature import QuadratureSpec, coarse_pair_rules, graded_rule, panel_rule

DEFAULT_QUAD = QuadratureSpec()
WARN_THRESHOLD = 1e-3
SINGULAR_SWITCH = 1e-5
L_FORMS = ("asymptotic", "lemma")


@dataclass(frozen=True)
class SourceRule:
    """Quadrature nodes on the effective centerline with everything the kernels need."""
    t: np.ndarray
    w: np.ndarray
    x: np.ndarray       # X(t)
    f: np.ndarray       # f(t)
    coef: np.ndarray    # eps^2 a(t)^2 / 2


def source_rule(geometry, f, t, w) -> SourceRule:
    a = geometry.radius.a(t)
    return SourceRule(t, w, geometry.centerline.position(t), f(t),
                      0.5 * (geometry.epsilon * a)**2)


def graded_source_rule(geometry, f, center, dist, quad) -> SourceRule:
    t, w = graded_rule(center, dist, quad)
    return source_rule(geometry, f, t, w)


def line_integrals(targets, rule: SourceRule, velocity=True, pressure=False,
                   gradient=False):
    """Velocity, pressure and velocity gradient at each target.

    Returns a dict with any of ``u`` (M, 3), ``p`` (M,) and ``grad``
    (M, 3, 3) with ``grad[m, i, k] = d u_i / d x_k``.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    R = targets[:, None, :] - rule.x[None, :, :]
    r2 = np.sum(R * R, axis=-1)
    inv = 1.0 / np.sqrt(r2)
    inv3 = inv / r2
    inv5 = inv3 / r2
    Rf = np.sum(R * rule.f[None], axis=-1)
    w, wc = rule.w, rule.w * rule.coef
    out = {}
    if velocity:
        scal = w * inv + wc * inv3
        rad = Rf * (w * inv3 - 3.0 * wc * inv5)
        u = scal @ rule.f + np.matmul(rad[:, None, :], R)[:, 0, :]
        out["u"] = u / (8.0 * np.pi)
    if pressure:
        out["p"] = (Rf * inv3) @ w / (4.0 * np.pi)
    if gradient:
        alpha = w * inv3 + 3.0 * wc * inv5
        gamma = w * inv3 - 3.0 * wc * inv5
        inv7 = inv5 / r2
        zeta = Rf * (-3.0 * w * inv5 + 15.0 * wc * inv7)
        g = -np.matmul(rule.f.T[None], alpha[..., None] * R)
        g += np.matmul((gamma[..., None] * R).transpose(0, 2, 1), rule.f)
        g += np.matmul((zeta[..., None] * R).transpose(0, 2, 1), R)
        g += np.sum(Rf * gamma, axis=1)[:, None, None] * np.eye(3)
        out["grad"] = g / (8.0 * np.pi)
    return out


def nearest_effective_point(geometry, x):
    """Closest point of the effective centerline [-1, 1] to x: (t, distance)."""
    return nearest_point(geometry.centerline, x, -1.0, 1.0, samples=401)


def _check_outside(geometry, x):
    if is_inside(geometry, x):
        raise DomainError(f"point {np.asarray(x).tolist()} lies inside the fiber")


def _warn_estimate(geometry, f, x, center, dist, quad, total):
    fine, coarse = coarse_pair_rules(center, dist, quad)
    diff = 0.0
    for (tf, wf), (tc, wc) in zip(fine, coarse):
        uf = line_integrals(x, source_rule(geometry, f, tf, wf))["u"][0]
        uc = line_integrals(x, source_rule(geometry, f, tc, wc))["u"][0]
        diff += np.linalg.norm(uf - uc)
    scale = np.linalg.norm(total)
    rel = diff / scale if scale > 0 else 0.0
    return rel > WARN_THRESHOLD, float(rel)


@dataclass(frozen=True)
class EvalInfo:
    quad_warn: bool
    refinement_change: float
    nearest_t: float
    distance: float


def sbt_velocity(geometry, f, x, quad: Optional[QuadratureSpec] = None,
                 return_info=False):
    """Slender-body velocity at a point outside the fiber."""
    quad = quad or DEFAULT_QUAD
    x = np.asarray(x, dtype=float)
    _check_outside(geometry, x)
    center, dist = nearest_effective_point(geometry, x)
    rule = graded_source_rule(geometry, f, center, dist, quad)
    u = line_integrals(x, rule)["u"][0]
    if not return_info:
        return u
    warn, rel = _warn_estimate(geometry, f, x[None], center, dist, quad, u)
    return u, EvalInfo(warn, rel, center, dist)


def sbt_pressure(geometry, f, x, quad: Optional[QuadratureSpec] = None):
    quad = quad or DEFAULT_QUAD
    x = np.asarray(x, dtype=float)
    _check_outside(geometry, x)
    center, dist = nearest_effective_point(geometry, x)
    rule = graded_source_rule(geometry, f, center, dist, quad)
    return float(line_integrals(x, rule, velocity=False, pressure=True)["p"][0])


def sbt_fields(geometry, f, points, quad: Optional[QuadratureSpec] = None):
    """Velocity, pressure and warning flag at many exterior points."""
    quad = quad or DEFAULT_QUAD
    points = np.atleast_2d(np.asarray(points, dtype=float))
    u = np.empty((len(points), 3))
    p = np.empty(len(points))
    warn = np.zeros(len(points), dtype=bool)
    for i, x in enumerate(points):
        _check_outside(geometry, x)
        center, dist = nearest_effective_point(geometry, x)
        rule = graded_source_rule(geometry, f, center, dist, quad)
        out = line_integrals(x, rule, pressure=True)
        u[i], p[i] = out["u"][0], out["p"][0]
        warn[i] = _warn_estimate(geometry, f, x[None], center, dist, quad, u[i])[0]
    return u, p, warn


def surface_rule(geometry, f, s, targets, quad) -> SourceRule:
    """Rule for targets on the cross section at phi(s): graded toward t = phi(s)."""
    phi = float(geometry.stretch.phi_of_s(s))
    center = min(max(phi, -1.0), 1.0)
    dist = np.min(np.linalg.norm(targets - geometry.centerline.position(np.array(center)), axis=-1))
    return graded_source_rule(geometry, f, center, dist, quad)


def sbt_surface_velocity(geometry, f, s, theta, quad: Optional[QuadratureSpec] = None):
    """Velocity on the fiber surface at (phi(s), theta); theta may be an array."""
    quad = quad or DEFAULT_QUAD
    if abs(s) > 1:
        raise DomainError("s must lie in [-1, 1]")
    phi = geometry.stretch.phi_of_s(s)
    scalar = np.ndim(theta) == 0
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x = surface_frame(geometry, np.full_like(theta, phi), theta).x
    u = line_integrals(x, surface_rule(geometry, f, s, x, quad))["u"]
    return u[0] if scalar else u


def log_coefficient(geometry, s, l_form="asymptotic"):
    """The logarithmic local coefficient of the centerline formula."""
    if l_form not in L_FORMS:
        raise InputError(f"l_form must be one of {L_FORMS}")
    ea2 = (geometry.epsilon * geometry.radius.a(np.asarray(s, dtype=float)))**2
    gap = 1.0 - np.asarray(s, dtype=float)**2
    inner = 4.0 * ea2 if l_form == "asymptotic" else ea2
    return np.log((2.0 * gap + 2.0 * np.sqrt(gap**2 + inner)) / ea2)


def _centerline_integrand(line, f, s, t, e_t, x2, fs, fps):
    w = s - t
    R = line.position(np.array(s)) - line.position(t)
    r = np.linalg.norm(R, axis=-1)
    ft = f(t)
    proj = np.eye(3) + np.outer(e_t, e_t)
    val = (ft / r[:, None] + R * (np.sum(R * ft, axis=-1) / r**3)[:, None]
           - (proj @ fs)[None, :] / np.abs(w)[:, None])
    near = np.abs(w) < SINGULAR_SWITCH
    if np.any(near):
        limit = proj @ fps + 0.5 * (np.outer(e_t, x2) + np.outer(x2, e_t)) @ fs
        val[near] = -np.sign(w[near])[:, None] * limit
    return val


def centerline_velocity(geometry, f, s, l_form="asymptotic", panels_per_unit=8,
                        nodes_per_panel=16):
    """Asymptotic centerline velocity u_C(s).

    8 pi u_C = [(I - 3 e_t e_t^T) + (I + e_t e_t^T) L(s)] f(s)
               + int [S(X(s) - X(t)) f(t) - (I + e_t e_t^T) f(s)/|s - t|] dt.
    The integrand jumps at t = s, so each side gets its own Gauss rule.
    """
    s = float(s)
    if abs(s) > 1:
        raise DomainError("s must lie in [-1, 1]")
    if not f.has_derivative and abs(s) == 1:
        raise InputError("force without derivative data cannot be used at s = +-1")
    line = geometry.centerline
    e_t = line.tangent(np.array(s))
    x2 = line.second_derivative(np.array(s))
    fs = f(np.array(s))
    fps = f.derivative(np.array(s))

    total = np.zeros(3)
    for lo, hi in ((-1.0, s), (s, 1.0)):
        if hi <= lo:
            continue
        count = max(int(np.ceil((hi - lo) * panels_per_unit)), 1)
        t, w = panel_rule(np.linspace(lo, hi, count + 1), nodes_per_panel)
        total += w @ _centerline_integrand(line, f, s, t, e_t, x2, fs, fps)

    L = float(log_coefficient(geometry, s, l_form))
    local = (np.eye(3) - 3 * np.outer(e_t, e_t)) + (np.eye(3) + np.outer(e_t, e_t)) * L
    return (local @ fs + total) / (8.0 * np.pi)
