"""
Residual diagnostics of the slender-body approximation on the fiber surface:
angular variation of the surface velocity, mismatch between the integrated
surface traction and the prescribed line force, and the gap between the
surface velocity and the asymptotic centerline velocity.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, InputError
from .geometry import (jacobian_from_frame, nearest_centerline_point, normal_from_frame,
                       surface_frame)
from .sbt import (DEFAULT_QUAD, centerline_velocity, graded_source_rule, line_integrals,
                  surface_rule)

FORCE_CONVENTIONS = ("stretch", "arclength")


def theta_grid(n):
    return 2.0 * np.pi * np.arange(n) / n


@dataclass
class CrossSection:
    """Fields on the ring of surface points over one cross section."""
    s: float
    phi: float
    theta: np.ndarray
    frame: object
    normal: np.ndarray
    jacobian: np.ndarray
    u: np.ndarray
    p: Optional[np.ndarray] = None
    grad: Optional[np.ndarray] = None


def cross_section(geometry, f, s, quad=None, theta=None, gradient=False) -> CrossSection:
    quad = quad or DEFAULT_QUAD
    s = float(s)
    if abs(s) > 1:
        raise DomainError("s must lie in [-1, 1]")
    theta = (theta_grid(quad.theta_nodes) if theta is None
             else np.atleast_1d(np.asarray(theta, dtype=float)))
    phi = float(geometry.stretch.phi_of_s(s))
    fr = surface_frame(geometry, np.full_like(theta, phi), theta)
    rule = surface_rule(geometry, f, s, fr.x, quad)
    out = line_integrals(fr.x, rule, pressure=gradient, gradient=gradient)
    eps = geometry.epsilon
    return CrossSection(s, phi, theta, fr, normal_from_frame(eps, fr),
                        jacobian_from_frame(eps, fr), out["u"], out.get("p"), out.get("grad"))


# ---------------------------------------------------------------- angular residual

def theta_residual(geometry, f, s, quad=None):
    """Surface velocity minus its angular mean: (values per angle, max norm)."""
    cs = cross_section(geometry, f, s, quad)
    resid = cs.u - cs.u.mean(axis=0)
    return resid, float(np.max(np.linalg.norm(resid, axis=1)))


# ---------------------------------------------------------------- stress

@dataclass
class StressSample:
    location: tuple
    strain_rate_normal: np.ndarray   # 2 E(u) n
    pressure: float
    traction: np.ndarray             # (2E - pI) n
    normal: np.ndarray
    e_rho_part: np.ndarray
    e_t_part: np.ndarray
    stress: np.ndarray               # full Cartesian stress tensor


def _strain_parts(grad, fr):
    """Normal and tangential strain-rate combinations built from directional derivatives.

    With u_v = (grad u) v for v in {e_rho, e_theta, e_t}:
      E_rho = -u_rho - (u_rho.e_rho) e_rho - (u_theta.e_rho) e_theta - (u_t.e_rho) e_t
      E_t   =  u_t + (u_t.e_t) e_t + (u_rho.e_t) e_rho + (u_theta.e_t) e_theta
    so that 2 E n = (E_rho + eps a' E_t) / sqrt(1 + eps^2 a'^2).
    """
    er, eth, et = fr.e_rho, fr.e_theta, fr.e_t
    u_r = np.einsum("mik,mk->mi", grad, er)
    u_th = np.einsum("mik,mk->mi", grad, eth)
    u_t = np.einsum("mik,mk->mi", grad, et)
    dot = lambda a, b: np.sum(a * b, axis=-1)[:, None]
    e_rho = -u_r - dot(u_r, er) * er - dot(u_th, er) * eth - dot(u_t, er) * et
    e_t = u_t + dot(u_t, et) * et + dot(u_r, et) * er + dot(u_th, et) * eth
    return e_rho, e_t


def _strain_normal(eps, fr, e_rho, e_t):
    # multiplied through by a so the tips (a = 0, a' infinite) stay finite
    a, aap = fr.a[:, None], fr.a_aprime[:, None]
    return (a * e_rho + eps * aap * e_t) / np.sqrt(a**2 + (eps * aap)**2)


def surface_stress_ring(geometry, f, s, quad=None, theta=None):
    cs = cross_section(geometry, f, s, quad, theta, gradient=True)
    e_rho, e_t = _strain_parts(cs.grad, cs.frame)
    two_en = _strain_normal(geometry.epsilon, cs.frame, e_rho, e_t)
    traction = two_en - cs.p[:, None] * cs.normal
    return cs, e_rho, e_t, two_en, traction


def surface_stress(geometry, f, s, theta, quad=None) -> StressSample:
    """Stress on the surface at (phi(s), theta) from the analytic velocity gradient."""
    cs, e_rho, e_t, two_en, traction = surface_stress_ring(geometry, f, s, quad, [theta])
    g = cs.grad[0]
    stress = g + g.T - cs.p[0] * np.eye(3)
    return StressSample((float(s), float(theta)), two_en[0], float(cs.p[0]), traction[0],
                        cs.normal[0], e_rho[0], e_t[0], stress)


def fd_stress_oracle(geometry, f, point, h, quad=None, rule=None):
    """Stress tensor at an exterior point by central differences of velocity.

    All stencil points share one quadrature rule so that quadrature error
    is a smooth function of position and does not pollute the differences.
    """
    quad = quad or DEFAULT_QUAD
    if not h > 0:
        raise InputError("finite-difference step must be positive")
    x = np.asarray(point, dtype=float)
    phi, dist = nearest_centerline_point(geometry, x)
    clearance = dist - (geometry.radius_at(phi) if abs(phi) < geometry.eta else 0.0)
    if clearance < 2 * h * (1 - 1e-9):
        raise DomainError(f"oracle point is {clearance:.3g} from the surface, needs >= 2h")
    if rule is None:
        center = float(np.clip(phi, -1.0, 1.0))
        d = np.linalg.norm(x - geometry.centerline.position(np.array(center)))
        rule = graded_source_rule(geometry, f, center, d, quad)
    stencil = x + h * np.concatenate([np.eye(3), -np.eye(3)])
    out = line_integrals(np.vstack([stencil, x]), rule, pressure=True)
    u = out["u"]
    grad = ((u[:3] - u[3:6]) / (2 * h)).T      # grad[i, k] = d u_i / d x_k
    return grad + grad.T - out["p"][-1] * np.eye(3)


def fd_surface_stress(geometry, f, s, theta, h, quad=None):
    """Oracle stress at a surface point.

    Evaluated at three outward offsets (3h, 6h, 9h) and extrapolated to the
    surface with the quadratic through them.
    """
    quad = quad or DEFAULT_QUAD
    phi = float(geometry.stretch.phi_of_s(s))
    fr = surface_frame(geometry, np.array([phi]), np.array([theta]))
    outward = -normal_from_frame(geometry.epsilon, fr)[0]
    x0 = fr.x[0]
    center = float(np.clip(phi, -1.0, 1.0))
    d = np.linalg.norm(x0 - geometry.centerline.position(np.array(center)))
    rule = graded_source_rule(geometry, f, center, d, quad)
    sig = [fd_stress_oracle(geometry, f, x0 + k * h * outward, h, quad, rule)
           for k in (3, 6, 9)]
    return 3.0 * sig[0] - 3.0 * sig[1] + sig[2]


# ---------------------------------------------------------------- total force

@dataclass
class ForceBreakdown:
    f_sb: np.ndarray        # integrated traction
    F_tilde: np.ndarray     # same integral with the stretch-free surface weight
    F_rho: np.ndarray       # normal-strain and pressure part of F_tilde
    F_t: np.ndarray         # tangential part of F_tilde


def _force_from_ring(geometry, s, cs, e_rho, e_t, traction, convention):
    if convention not in FORCE_CONVENTIONS:
        raise InputError(f"force convention must be one of {FORCE_CONVENTIONS}")
    eps = geometry.epsilon
    weight = 2.0 * np.pi / len(cs.theta)
    scale = float(geometry.stretch.derivative(np.array(s))) if convention == "stretch" else 1.0
    f_sb = weight * scale * (cs.jacobian @ traction)
    fr = cs.frame
    a, aap = fr.a[0], fr.a_aprime[0]
    p = cs.p[:, None]
    F_rho = weight * eps * a * np.sum(e_rho + p * fr.e_rho, axis=0)
    F_t = weight * eps**2 * aap * np.sum(e_t - p * fr.e_t, axis=0)
    return ForceBreakdown(f_sb, F_rho + F_t, F_rho, F_t)


def sbt_force(geometry, f, s, quad=None, convention="stretch", parts=False):
    """Total traction over the cross section at phi(s), per unit s."""
    cs, e_rho, e_t, _, traction = surface_stress_ring(geometry, f, s, quad)
    out = _force_from_ring(geometry, s, cs, e_rho, e_t, traction, convention)
    return out if parts else out.f_sb


# ---------------------------------------------------------------- centerline gap

def centerline_gap(geometry, f, s, quad=None, l_form="asymptotic"):
    """Largest distance over the ring between surface and centerline velocity."""
    cs = cross_section(geometry, f, s, quad)
    uc = centerline_velocity(geometry, f, s, l_form)
    return float(np.max(np.linalg.norm(cs.u - uc, axis=1)))


# ---------------------------------------------------------------- all at once

@dataclass
class ResidualSample:
    s: float
    theta_residual_sup: float
    force_residual: np.ndarray
    centerline_gap: float
    force_minus_F_tilde: float = 0.0
    F_t_norm: float = 0.0
    F_rho_residual: float = 0.0


def residual_sample(geometry, f, s, quad=None, l_form="asymptotic",
                    convention="stretch") -> ResidualSample:
    """All three residuals at one s, sharing a single pass over the ring."""
    cs, e_rho, e_t, _, traction = surface_stress_ring(geometry, f, s, quad)
    fb = _force_from_ring(geometry, s, cs, e_rho, e_t, traction, convention)
    mean = cs.u.mean(axis=0)
    theta_sup = float(np.max(np.linalg.norm(cs.u - mean, axis=1)))
    uc = centerline_velocity(geometry, f, s, l_form)
    gap = float(np.max(np.linalg.norm(cs.u - uc, axis=1)))
    fs = f(np.array(s))
    return ResidualSample(float(s), theta_sup, fb.f_sb - fs, gap,
                          float(np.linalg.norm(fb.f_sb - fb.F_tilde)),
                          float(np.linalg.norm(fb.F_t)),
                          float(np.linalg.norm(fb.F_rho - fs)))
