"""
Convergence harness: epsilon sweeps of the residuals, power-law fits, and
brute-force numerical checks of the integral estimates behind the error
theory.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad as adaptive_quad
from scipy.special import beta, betainc

from .errors import InputError
from .forces import ForceDensity, constant_force, decay_norms, force_from_spec, parabolic_force
from .geometry import (build_centerline, build_geometry, geometry_from_dict, radius_preset,
                       stretch_uniform, surface_frame)
from .quadrature import QuadratureSpec, graded_rule, panel_rule
from .residuals import residual_sample, cross_section
from .sbt import L_FORMS, _warn_estimate, log_coefficient

DEFAULT_LADDER = (0.1, 0.05, 0.025, 0.0125)


# ---------------------------------------------------------------- fits

@dataclass(frozen=True)
class ScalingFit:
    model: str
    p: float
    C: float
    r_squared: float
    q: float = 0.0

    def predict(self, eps):
        eps = np.asarray(eps, dtype=float)
        return self.C * eps**self.p * np.abs(np.log(eps))**self.q


def fit_scaling(pairs, model="pow", q=1.0) -> ScalingFit:
    """Least-squares fit of err = C eps^p, or err = C eps^p |log eps|^q with q fixed."""
    data = np.asarray(pairs, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or len(data) < 3:
        raise InputError("fit needs at least three (eps, err) pairs")
    eps, err = data[:, 0], data[:, 1]
    if np.any(err <= 0) or np.any(eps <= 0):
        raise InputError("fit needs strictly positive eps and err")
    if model == "pow":
        q = 0.0
    elif model == "log":
        if q not in (1.0, 1.5):
            raise InputError("log-corrected model takes q in {1, 3/2}")
        if np.any(eps >= 1):
            raise InputError("log-corrected model needs eps < 1")
    else:
        raise InputError(f"unknown model {model!r}")
    x = np.log(eps)
    y = np.log(err) - q * np.log(np.abs(x))
    A = np.column_stack([x, np.ones_like(x)])
    (p, logc), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([p, logc])
    ss_tot = float(np.sum((y - y.mean())**2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot == 0 or ss_res <= 1e-28 * max(ss_tot, 1.0) else 1.0 - ss_res / ss_tot
    return ScalingFit(model, float(p), float(np.exp(logc)), float(min(max(r2, 0.0), 1.0)), float(q))


# ---------------------------------------------------------------- closed forms

def d_mn(m, n):
    """int_R tau^m / (tau^2 + 1)^(n/2) d tau by adaptive quadrature."""
    if n < m + 2:
        raise InputError("d_mn diverges unless n >= m + 2")
    val, _ = adaptive_quad(lambda t: t**m / (t * t + 1.0)**(n / 2), -np.inf, np.inf,
                           epsabs=0, epsrel=1e-13, limit=400)
    return val


def moment_antiderivative(m, n, c, x):
    """int_0^x t^m / (t^2 + c^2)^(n/2) dt in closed form (c > 0, x >= 0).

    n >= m + 2 goes through the incomplete beta function after t = c tan(u);
    the borderline n = m + 1 is written out for m <= 2.
    """
    x = np.asarray(x, dtype=float)
    if n >= m + 2:
        a, b = (m + 1) / 2, (n - m - 1) / 2
        z = x**2 / (x**2 + c**2)
        return c**(m + 1 - n) * 0.5 * betainc(a, b, z) * beta(a, b)
    if n == m + 1:
        if m == 0:
            return np.arcsinh(x / c)
        if m == 1:
            return 0.5 * np.log1p((x / c)**2)
        if m == 2:
            return np.arcsinh(x / c) - x / np.sqrt(x**2 + c**2)
    raise InputError(f"no closed form for (m, n) = ({m}, {n})")


def _moment_quad(m, n, c, lo, hi):
    # |t|^m / (t^2 + c^2)^(n/2) over [lo, hi], split at the origin
    def g(t):
        return abs(t)**m / (t * t + c * c)**(n / 2)

    total = 0.0
    for a, b in ((lo, min(hi, 0.0)), (max(lo, 0.0), hi)):
        if b > a:
            pts = None if c == 0 else [x for x in (a + c, b - c) if a < x < b] or None
            total += adaptive_quad(g, a, b, epsabs=0, epsrel=1e-12, limit=400,
                                   points=pts)[0]
    return total


# ---------------------------------------------------------------- integral bound

@dataclass
class LemmaCheckReport:
    lemma: str
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self):
        if "passed" in self.summary:
            return bool(self.summary["passed"])
        return all(r["passed"] for r in self.rows)

    @property
    def failures(self):
        return [r for r in self.rows if not r["passed"]]


def check_integral_lemma(m, n, epsilon, profile=None, s_grid=None, stretch=None):
    """Constant-free bound on int |x|^m / (x^2 + (eps a)^2)^(n/2) over [phi(s)-1, phi(s)+1].

    Bound: 4 |log(eps a)| when n = m + 1, pi (eps a)^(m+1-n) when n >= m + 2.
    """
    m, n = int(m), int(n)
    if m < 0 or n < m + 1:
        raise InputError("integral bound needs m >= 0 and n >= m + 1")
    if not 0 < epsilon <= 0.25:
        raise InputError("epsilon must lie in (0, 1/4]")
    profile = profile or radius_preset("prolate", epsilon)
    stretch = stretch or stretch_uniform(profile.eta)
    s_grid = np.linspace(-1.0, 1.0, 21) if s_grid is None else np.asarray(s_grid, dtype=float)
    report = LemmaCheckReport("integral-bound")
    for s in s_grid:
        phi = float(stretch.phi_of_s(s))
        c = float(epsilon * profile.a(phi))
        lo, hi = phi - 1.0, phi + 1.0
        lhs = _moment_quad(m, n, c, lo, hi)
        if c == 0:
            rhs = np.inf
        elif n == m + 1:
            rhs = 4.0 * abs(np.log(c))
        else:
            rhs = np.pi * c**(m + 1 - n)
        closed = np.nan
        if m <= 2 and c > 0:
            F = lambda x: float(moment_antiderivative(m, n, c, abs(x)))
            closed = (F(hi) + F(lo)) if lo < 0 else (F(hi) - F(lo))
        report.rows.append({"m": m, "n": n, "epsilon": float(epsilon), "s": float(s),
                            "eps_a": c, "lhs": lhs, "rhs_bound": rhs,
                            "closed_form": closed, "passed": bool(lhs <= rhs)})
    return report


# ---------------------------------------------------------------- R bounds

@dataclass(frozen=True)
class CenterlineDifferences:
    R: np.ndarray          # X(phi) - X(phi - sbar) + eps a e_rho
    R0: np.ndarray         # X(phi) - X(phi - sbar)
    eps_a: np.ndarray
    remainder_bound: float  # kappa_max / 2
    doublet_slope: np.ndarray  # A with a^2(phi - sbar) = a^2(phi) + sbar A


def centerline_differences(geometry, s, sbar, theta) -> CenterlineDifferences:
    s, sbar, theta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s, sbar, theta)))
    phi = geometry.stretch.phi_of_s(s)
    fr = surface_frame(geometry, phi, theta)
    line = geometry.centerline
    R0 = fr.center - line.position(phi - sbar)
    eps_a = geometry.epsilon * fr.a
    a2 = geometry.radius.a(phi - sbar)**2
    with np.errstate(invalid="ignore", divide="ignore"):
        A = np.where(sbar != 0, (a2 - fr.a**2) / sbar, 0.0)
    return CenterlineDifferences(R0 + eps_a[..., None] * fr.e_rho, R0, eps_a,
                                 0.5 * geometry.kappa_max, A)


def check_R_bounds(geometry, sample_count=100_000, seed=0):
    """Sample (s, sbar, theta) and test the two-sided comparison of |R| with sqrt(sbar^2 + (eps a)^2)."""
    rng = np.random.default_rng(seed)
    s = rng.uniform(-1.0, 1.0, sample_count)
    theta = rng.uniform(0.0, 2 * np.pi, sample_count)
    phi = geometry.stretch.phi_of_s(s)
    sbar = phi - rng.uniform(-1.0, 1.0, sample_count)   # source point t in [-1, 1]
    cd = centerline_differences(geometry, s, sbar, theta)
    r = np.linalg.norm(cd.R, axis=-1)
    model = np.sqrt(sbar**2 + cd.eps_a**2)
    slack = 1e-12 * (1.0 + r)
    excess = np.abs(r - model) - cd.remainder_bound * (1 + 1e-9) * sbar**2 - slack
    c_bar = float(np.max(np.abs(geometry.radius.a_aprime(np.linspace(-geometry.eta, geometry.eta, 20001)))))
    ok = model > 0
    return {
        "samples": int(sample_count),
        "upper_bound_passed": bool(np.all(excess <= 0)),
        "max_upper_excess": float(np.max(excess)),
        "lower_constant": float(np.min(r[ok] / model[ok])),
        "kappa_max": geometry.kappa_max,
        "c_gamma": geometry.c_gamma,
        "doublet_slope_ratio": float(np.max(np.abs(cd.doublet_slope)) / (2 * c_bar)) if c_bar else 0.0,
    }


# ---------------------------------------------------------------- scaling lemmas

SCALING_LEMMAS = ("kernel-moment", "kernel-moment-eps", "decay-aux", "odd-moment",
                  "even-moment-limit", "centerline-log")


def _family(centerline, eps):
    line = build_centerline(*centerline) if isinstance(centerline, tuple) else centerline
    return build_geometry(line, radius_preset("prolate", eps))


def _g_preset(g):
    if isinstance(g, ForceDensity):
        return g
    if g == "constant":
        return constant_force([1.0, 0.0, 0.0])
    if g in ("parabolic", "parabolic-decay"):
        return parabolic_force([1.0, 0.0, 0.0])
    raise InputError(f"unknown g preset {g!r}")


def _moment_integral(geometry, g, s, theta, m, n, signed):
    """int sbar^m g(phi - sbar) / |R|^n over sbar in [phi-1, phi+1], graded at sbar = 0."""
    phi = float(geometry.stretch.phi_of_s(s))
    ea = float(geometry.epsilon * geometry.radius.a(phi))
    t, w = graded_rule(phi, max(ea, 1e-14), QuadratureSpec(nodes_per_panel=24))
    sbar = phi - t
    cd = centerline_differences(geometry, np.full_like(t, s), sbar, np.full_like(t, theta))
    r = np.linalg.norm(cd.R, axis=-1)
    gv = g(t)[:, 0]
    pw = sbar**m if signed else np.abs(sbar)**m
    return float(w @ (pw * gv / r**n)), phi, ea


def _centerline_log_lhs(geometry, g, s, theta, n, l_form):
    line = geometry.centerline
    ea = float(geometry.epsilon * geometry.radius.a(s))
    gs = float(g(np.array(s))[0])
    fr = surface_frame(geometry, np.array(s), np.array(theta))
    # near-singular part with the tube offset
    t, w = graded_rule(s, max(ea, 1e-14), QuadratureSpec(nodes_per_panel=24))
    st = s - t
    Rt = line.position(np.array(s)) - line.position(t) + ea * fr.e_rho
    first = w @ (np.abs(st)**(n - 1) * g(t)[:, 0] / np.linalg.norm(Rt, axis=-1)**n)
    # regularized part: jump at t = s, so one rule per side
    second = 0.0
    for lo, hi in ((-1.0, s), (s, 1.0)):
        if hi <= lo:
            continue
        tt, ww = panel_rule(np.linspace(lo, hi, max(int(np.ceil(8 * (hi - lo))), 1) + 1), 24)
        d = s - tt
        Rc = np.linalg.norm(line.position(np.array(s)) - line.position(tt), axis=-1)
        second += ww @ (np.abs(d)**(n - 1) * g(tt)[:, 0] / Rc**n - gs / np.abs(d))
    # negative logarithmic coefficient of the centerline estimate
    L = -float(log_coefficient(geometry, s, l_form))
    return abs(first - second + L * gs + (n - 1) * gs)


@dataclass
class ScalingLemmaReport:
    lemma: str
    m: int
    n: int
    g: str
    epsilons: list
    sup_ratio: list
    window_ratio: float
    growth: float
    passed: bool
    rows: list = field(default_factory=list)
    limit_errors: Optional[list] = None

    def to_dict(self):
        return asdict(self)


def check_scaling_lemmas(lemma, m, n, g="constant", centerline=("straight", {}),
                         epsilons=DEFAULT_LADDER, s_grid=None, thetas=(0.0, np.pi / 2),
                         l_form="lemma") -> ScalingLemmaReport:
    """Integrate a lemma's left side over an epsilon ladder and divide by its scaling form.

    The constants are not explicit, so the check is that the sup over s of
    LHS / scaling does not grow along the ladder by more than a factor 4.
    """
    if lemma not in SCALING_LEMMAS:
        raise InputError(f"unknown lemma {lemma!r}; choose from {SCALING_LEMMAS}")
    m, n = int(m), int(n)
    gf = _g_preset(g)
    norms = decay_norms(gf)
    if lemma in ("kernel-moment", "kernel-moment-eps") and n < m + 1:
        raise InputError("kernel moments need n >= m + 1")
    if lemma == "odd-moment" and (m % 2 != 1 or n < m + 2):
        raise InputError("odd-moment needs odd m and n >= m + 2")
    if lemma == "even-moment-limit" and (m % 2 != 0 or n % 2 != 1 or n < m + 3):
        raise InputError("even-moment-limit needs even m and odd n >= m + 3")
    if lemma == "centerline-log" and n not in (1, 3):
        raise InputError("centerline-log takes n in {1, 3}")
    if lemma == "decay-aux" and n < 1:
        raise InputError("decay-aux takes a power n >= 1")
    if lemma in ("decay-aux", "odd-moment") and not np.isfinite(norms.ca_norm):
        raise InputError(f"{lemma} needs g with a finite square-root-weighted norm")

    if s_grid is None:
        s_grid = np.linspace(0.0, 0.9, 10) if lemma == "decay-aux" else np.linspace(-0.9, 0.9, 19)
    s_grid = np.asarray(s_grid, dtype=float)
    dmn = d_mn(m, n) if lemma == "even-moment-limit" else None

    sup_ratio, limit_err, rows = [], [], []
    for eps in epsilons:
        geo = _family(centerline, eps)
        best, worst_limit = 0.0, 0.0
        for s in s_grid:
            for th in thetas:
                extra = {}
                if lemma in ("kernel-moment", "kernel-moment-eps"):
                    lhs, phi, ea = _moment_integral(geo, lambda t: np.ones((len(t), 1)), s, th, m, n, False)
                    a = ea / eps
                    if lemma == "kernel-moment":
                        scale = abs(np.log(ea)) if n == m + 1 else ea**(m + 1 - n)
                    else:
                        scale = abs(np.log(eps)) if n == m + 1 else eps**(m - n) * a**(m + 2 - n)
                        extra["ratio_log_eps_a"] = lhs / abs(np.log(ea)) if n == m + 1 else np.nan
                elif lemma == "decay-aux":
                    phi = float(geo.stretch.phi_of_s(s))
                    a = float(geo.radius.a(phi))
                    lhs = abs(float(gf(np.array(s))[0])) / ((phi - 1)**2 + (eps * a)**2)**(n / 2)
                    scale = eps**(1 - n) * a**(-n) * norms.ca_norm
                elif lemma == "odd-moment":
                    lhs, phi, ea = _moment_integral(geo, gf, s, th, m, n, True)
                    lhs = abs(lhs)
                    a = ea / eps
                    if n == m + 2:
                        scale = norms.c1_norm * abs(np.log(ea)) + norms.ca_norm / a
                    else:
                        scale = (norms.c1_norm * ea**(m + 2 - n)
                                 + norms.ca_norm * eps**(m + 2 - n) * a**(m + 1 - n))
                elif lemma == "even-moment-limit":
                    lhs, phi, ea = _moment_integral(geo, gf, s, th, m, n, True)
                    a = ea / eps
                    gs = float(gf(np.array(s))[0])
                    limit = ea**(m + 1 - n) * dmn * gs
                    if abs(limit) > 0:
                        worst_limit = max(worst_limit, abs(lhs - limit) / abs(limit))
                        extra["limit_rel_error"] = abs(lhs - limit) / abs(limit)
                    if np.isfinite(norms.ca_norm):
                        scale = (norms.c1_norm * ea**(m + 2 - n)
                                 + norms.ca_norm * eps**(m + 2 - n) * a**(m + 1 - n))
                    else:
                        scale = norms.c1_norm * ea**(m + 2 - n)
                    lhs = abs(lhs - limit)
                else:
                    lhs = _centerline_log_lhs(geo, gf, s, th, n, l_form)
                    scale = eps * abs(np.log(eps)) * norms.c1_norm
                ratio = lhs / scale
                best = max(best, ratio)
                rows.append({"epsilon": eps, "s": float(s), "theta": float(th),
                             "lhs": float(lhs), "scale": float(scale), "ratio": float(ratio), **extra})
        sup_ratio.append(best)
        limit_err.append(worst_limit)

    sr = np.asarray(sup_ratio)
    window = float(sr.max() / sr.min()) if sr.min() > 0 else np.inf
    growth = float(sr.max() / sr[0]) if sr[0] > 0 else np.inf
    return ScalingLemmaReport(lemma, m, n, gf.kind, list(map(float, epsilons)),
                              list(map(float, sr)), window, growth, bool(growth <= 4.0), rows,
                              list(map(float, limit_err)) if lemma == "even-moment-limit" else None)


# ---------------------------------------------------------------- sweep

@dataclass
class SweepConfig:
    epsilons: Sequence[float] = DEFAULT_LADDER
    geometry: dict = field(default_factory=lambda: {"centerline": {"kind": "straight"},
                                                    "radius": {"kind": "prolate"}})
    force: str = "parabolic:1,0,0"
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    s_points: int = 101
    window: Optional[float] = 0.9
    l_form: str = "asymptotic"
    force_convention: str = "stretch"
    threads: int = 1

    def validate(self):
        eps = np.asarray(self.epsilons, dtype=float)
        if eps.ndim != 1 or len(eps) < 1:
            raise InputError("epsilons must be a non-empty list")
        if np.any(np.diff(eps) >= 0):
            raise InputError("epsilons must be strictly decreasing")
        if np.any(eps <= 0) or np.any(eps > 0.25):
            raise InputError("every epsilon must lie in (0, 0.25]")
        if self.s_points < 3:
            raise InputError("s_points must be at least 3")
        if self.window is not None and not 0 < self.window <= 1:
            raise InputError("window must lie in (0, 1]")
        if self.l_form not in L_FORMS:
            raise InputError(f"l_form must be one of {L_FORMS}")
        if int(self.threads) < 1:
            raise InputError("threads must be >= 1")
        force_from_spec(self.force)


@dataclass
class SweepReport:
    config: SweepConfig
    rows: list                 # one summary dict per epsilon
    samples: dict              # epsilon -> list of ResidualSample
    fits: dict
    metadata: dict

    def column(self, name):
        return [(r["epsilon"], r[name]) for r in self.rows]


SWEEP_COLUMNS = ("theta_residual_max", "force_residual_max", "centerline_gap_max",
                 "force_minus_F_tilde_max", "F_t_max", "F_rho_residual_max")


def chebyshev_grid(n):
    return -np.cos(np.pi * np.arange(n) / (n - 1))


def resolve_threads(threads=None):
    env = os.environ.get("SBT_LAB_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError:
            raise InputError(f"SBT_LAB_THREADS must be an integer, got {env!r}")
    threads = 1 if threads is None else int(threads)
    if threads < 1:
        raise InputError("thread count must be >= 1")
    return threads


def _sample_task(geo, f, s, cfg):
    rs = residual_sample(geo, f, s, cfg.quadrature, cfg.l_form, cfg.force_convention)
    # refinement-change estimate at one angle per cross section
    cs = cross_section(geo, f, s, cfg.quadrature, theta=np.array([0.0]))
    phi = float(geo.stretch.phi_of_s(s))
    center = min(max(phi, -1.0), 1.0)
    dist = float(np.linalg.norm(cs.frame.x[0] - geo.centerline.position(np.array(center))))
    warn = _warn_estimate(geo, f, cs.frame.x, center, dist, cfg.quadrature, cs.u[0])[0]
    return rs, bool(warn)


def epsilon_sweep(config: SweepConfig, threads=None) -> SweepReport:
    """Residual maxima over the s grid for every epsilon of the ladder."""
    config.validate()
    threads = resolve_threads(config.threads if threads is None else threads)
    f = force_from_spec(config.force)
    geos = [geometry_from_dict(config.geometry, epsilon=float(e)) for e in config.epsilons]
    s_grid = chebyshev_grid(config.s_points)
    tasks = [(i, s) for i in range(len(geos)) for s in s_grid]

    start = time.perf_counter()
    run = lambda task: _sample_task(geos[task[0]], f, task[1], config)
    if threads == 1:
        results = [run(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, tasks))
    elapsed = time.perf_counter() - start

    rows, samples = [], {}
    k = 0
    for i, eps in enumerate(config.epsilons):
        chunk = results[k:k + len(s_grid)]
        k += len(s_grid)
        samp = [r for r, _ in chunk]
        samples[float(eps)] = samp
        inside = [r for r in samp if config.window is None or abs(r.s) <= config.window + 1e-12]
        rows.append({
            "epsilon": float(eps),
            "theta_residual_max": max(r.theta_residual_sup for r in inside),
            "force_residual_max": max(float(np.linalg.norm(r.force_residual)) for r in inside),
            "centerline_gap_max": max(r.centerline_gap for r in inside),
            "force_minus_F_tilde_max": max(r.force_minus_F_tilde for r in inside),
            "F_t_max": max(r.F_t_norm for r in inside),
            "F_rho_residual_max": max(r.F_rho_residual for r in inside),
            "quad_warnings": int(sum(w for _, w in chunk)),
        })

    fits = {}
    if len(rows) >= 3:
        for name in SWEEP_COLUMNS:
            pairs = [(r["epsilon"], r[name]) for r in rows]
            if all(v > 0 for _, v in pairs):
                fits[name] = {"pow": asdict(fit_scaling(pairs, "pow")),
                              "log": asdict(fit_scaling(pairs, "log", 1.0))}
    meta = {"threads": threads, "runtime_s": elapsed,
            "quad_warnings": int(sum(r["quad_warnings"] for r in rows))}
    return SweepReport(config, rows, samples, fits, meta)
