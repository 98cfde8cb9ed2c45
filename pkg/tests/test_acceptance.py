"""Acceptance criteria 1-10; each test records one pass/fail line."""
import filecmp
import json
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from sbtlab.analysis import (SweepConfig, check_integral_lemma, check_scaling_lemmas, epsilon_sweep,
                             fit_scaling)
from sbtlab.cli import run
from sbtlab.forces import constant_force, parabolic_force
from sbtlab.geometry import (build_bishop_frame, build_centerline, build_geometry, radius_preset,
                             surface_frame)
from sbtlab.io import read_table
from sbtlab.kernels import doublet, stokeslet
from sbtlab.quadrature import QuadratureSpec
from sbtlab.residuals import fd_surface_stress, surface_stress
from sbtlab.sbt import centerline_velocity, graded_source_rule, line_integrals, log_coefficient, \
    nearest_effective_point

LADDER = (0.1, 0.05, 0.025, 0.0125)
SUITE_START = time.perf_counter()


def record(key, ok, detail):
    ACCEPTANCE[str(key)] = (bool(ok), detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _laplacian_fd(fn, x, h):
    out = -6.0 * fn(x)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        out = out + fn(x + e) + fn(x - e)
    return out / h**2


def test_criterion_01_doublet_is_half_laplacian_of_stokeslet():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    pts = rng.normal(size=(100, 3))
    pts *= (rng.uniform(0.5, 2.0, 100) / np.linalg.norm(pts, axis=1))[:, None]

    def rel_err(h):
        lap = _laplacian_fd(stokeslet, pts, h)
        D = doublet(pts)
        return np.linalg.norm(0.5 * lap - D, axis=(1, 2)) / np.linalg.norm(D, axis=(1, 2))

    e1, e2 = rel_err(1e-3), rel_err(5e-4)
    order = np.log2(np.median(e1 / e2))
    elapsed = time.perf_counter() - start
    ok = e1.max() <= 1e-4 and 1.8 <= order <= 2.2 and elapsed < 1.0
    record(1, ok, f"max rel err {e1.max():.2e} at h=1e-3, observed order {order:.2f}, {elapsed:.3f}s")


def test_criterion_02_stokes_equations_residual():
    start = time.perf_counter()
    g = build_geometry(build_centerline("circular-arc", {"radius": 2.0}), radius_preset("prolate", 0.1))
    f = parabolic_force([1.0, 0.5, -0.3])
    quad = QuadratureSpec(nodes_per_panel=24)
    rng = np.random.default_rng(11)
    worst, quad_change, ratios = 0.0, 0.0, []
    for _ in range(20):
        phi = rng.uniform(-1.0, 1.0)
        fr = surface_frame(g, np.array(phi), np.array(rng.uniform(0, 2 * np.pi)))
        x = fr.center + rng.uniform(0.3, 1.0) * fr.e_rho
        c, dist = nearest_effective_point(g, x)
        rule = graded_source_rule(g, f, c, dist, quad)
        finer = graded_source_rule(g, f, c, dist, QuadratureSpec(nodes_per_panel=32))
        quad_change = max(quad_change, np.max(np.abs(line_integrals(x, rule)["u"] - line_integrals(x, finer)["u"])))

        def resid(h):
            vel = lambda y: line_integrals(np.atleast_2d(y), rule)["u"][0]
            prs = lambda y: line_integrals(np.atleast_2d(y), rule, velocity=False, pressure=True)["p"][0]
            E = np.eye(3) * h
            grad_p = np.array([(prs(x + E[k]) - prs(x - E[k])) / (2 * h) for k in range(3)])
            div = sum((vel(x + E[k])[k] - vel(x - E[k])[k]) / (2 * h) for k in range(3))
            mom = -_laplacian_fd(vel, x, h) + grad_p
            return max(np.max(np.abs(mom)), abs(div))

        r1 = resid(1e-3)
        ratios.append(r1 / resid(5e-4))
        worst = max(worst, r1)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and quad_change <= 1e-8 and elapsed < 30
    record(2, ok, f"max |-lap u + grad p|, |div u| = {worst:.2e} at h=1e-3 "
                  f"(h-halving ratio {np.median(ratios):.2f}), quadrature change {quad_change:.1e}, "
                  f"{elapsed:.1f}s")


def test_criterion_03_frame_quality():
    arc = build_centerline("circular-arc", {"radius": 2.0})
    helix = build_centerline("analytic", {"curve": "helix", "radius": 0.5, "pitch": 0.3})
    drift = 0.0
    for line in (arc, helix):
        # no re-orthonormalization: this measures the integrator's own drift
        fr = build_bishop_frame(line, step=1e-3, reorthonormalize=False)
        assert fr.phi[-1] - fr.phi[0] == pytest.approx(3.0)
        drift = max(drift, fr.orthonormality_defect())
    fr = build_bishop_frame(arc, step=1e-3)
    curv = np.max(np.abs(fr.kappa1**2 + fr.kappa2**2 - np.sum(arc.second_derivative(fr.phi)**2, axis=1)))
    ok = drift <= 1e-8 and curv <= 1e-6
    record(3, ok, f"orthonormality drift {drift:.1e} over arclength 3, curvature mismatch {curv:.1e}")


def test_criterion_04_integral_bound_exact():
    start = time.perf_counter()
    fails, total, worst = 0, 0, 0.0
    for eps in (0.1, 0.05, 0.025):
        for m in range(4):
            for n in range(m + 1, m + 5):
                rep = check_integral_lemma(m, n, eps, s_grid=np.linspace(-1, 1, 21))
                total += len(rep.rows)
                fails += len(rep.failures)
                worst = max(worst, max(r["lhs"] / r["rhs_bound"] for r in rep.rows))
    elapsed = time.perf_counter() - start
    ok = fails == 0 and elapsed < 60
    record(4, ok, f"{total - fails}/{total} checks pass, max lhs/bound {worst:.3f}, {elapsed:.1f}s")


def test_criterion_05_even_moment_limit():
    errs = {}
    for m, n in ((0, 3), (0, 5), (2, 5)):
        rep = check_scaling_lemmas("even-moment-limit", m, n, "constant", epsilons=LADDER)
        errs[(m, n)] = rep.limit_errors
    final = {k: v[-1] for k, v in errs.items()}
    ok = all(v <= 0.05 for v in final.values())
    record(5, ok, "rel error at eps=0.0125: " + ", ".join(f"{k}: {v:.2e}" for k, v in final.items()))


@pytest.fixture(scope="module")
def prolate_sweep():
    cfg = SweepConfig(epsilons=LADDER, force="parabolic:1,0,0", s_points=101, window=0.9)
    start = time.perf_counter()
    rep = epsilon_sweep(cfg, threads=1)
    return rep, time.perf_counter() - start


def test_criterion_06_theta_residual_rate(prolate_sweep):
    rep, elapsed = prolate_sweep
    fit = fit_scaling(rep.column("theta_residual_max"), "log", 1.0)
    pure = fit_scaling(rep.column("theta_residual_max"), "pow")
    warn = rep.metadata["quad_warnings"]
    ok = 0.8 <= fit.p <= 1.2 and fit.r_squared >= 0.98 and elapsed < 600 and warn == 0
    record(6, ok, f"log-corrected p={fit.p:.3f} r2={fit.r_squared:.4f} (pure power p={pure.p:.3f}), "
                  f"quad warnings {warn}, sweep {elapsed:.1f}s")


def test_criterion_07_force_residual_rate(prolate_sweep):
    rep, _ = prolate_sweep
    fres = fit_scaling(rep.column("force_residual_max"), "pow")
    diff = fit_scaling(rep.column("force_minus_F_tilde_max"), "pow")
    ft = fit_scaling(rep.column("F_t_max"), "pow")
    ok = fres.p >= 0.8 and fres.r_squared >= 0.95 and diff.p >= 0.8 and ft.p >= 0.8
    record(7, ok, f"|f_SB - f| p={fres.p:.3f} r2={fres.r_squared:.4f}; |f_SB - F~| p={diff.p:.3f}; "
                  f"|F~_t| p={ft.p:.3f}")


def test_criterion_08_centerline_gap_rate(prolate_sweep):
    rep, _ = prolate_sweep
    fit = fit_scaling(rep.column("centerline_gap_max"), "log", 1.0)
    g = build_geometry(build_centerline("straight", {}), radius_preset("prolate", 0.1))
    L0 = float(log_coefficient(g, 0.0))
    u = centerline_velocity(g, constant_force([1.0, 0.0, 0.0]), 0.0)
    hand = np.array([(1.0 + L0) / (8 * np.pi), 0.0, 0.0])
    mismatch = np.max(np.abs(u - hand))
    ok = 0.8 <= fit.p <= 1.2 and fit.r_squared >= 0.95 and mismatch <= 1e-8
    record(8, ok, f"log-corrected p={fit.p:.3f} r2={fit.r_squared:.4f}; straight constant-force "
                  f"centerline mismatch {mismatch:.1e}")


def test_criterion_09_stress_against_oracle():
    g = build_geometry(build_centerline("circular-arc", {"radius": 2.0}), radius_preset("prolate", 0.1))
    f = parabolic_force([1.0, 0.5, -0.3])
    h = 1e-5
    tol = max(1e-6, 10 * h**2)
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(20):
        s, th = rng.uniform(-0.95, 0.95), rng.uniform(0, 2 * np.pi)
        worst = max(worst, np.max(np.abs(surface_stress(g, f, s, th).stress - fd_surface_stress(g, f, s, th, h))))
    record(9, worst <= tol, f"max |sigma - sigma_fd| = {worst:.2e} at h={h:g} (tolerance {tol:.0e})")


def _sweep_cli(folder, threads):
    folder.mkdir()
    cfg = folder / "sweep.json"
    cfg.write_text(json.dumps({"epsilons": list(LADDER), "force": "parabolic:1,0,0", "s_points": 101}))
    assert run(["sweep", "--config", str(cfg), "--out", str(folder / "report.json"),
                "--threads", str(threads)]) == 0
    return [folder / f"report_eps{i}.csv" for i in range(len(LADDER))]


def _body(path):
    return [ln for ln in path.read_bytes().splitlines() if not ln.startswith(b"#")]


def test_criterion_10_determinism(tmp_path):
    a = _sweep_cli(tmp_path / "a", 1)
    b = _sweep_cli(tmp_path / "b", 1)
    c = _sweep_cli(tmp_path / "c", 8)
    same_bytes = all(_body(x) == _body(y) for x, y in zip(a, b))
    same_files = all(filecmp.cmp(x, y, shallow=False) for x, y in zip(a, b))
    diff = max(np.max(np.abs(read_table(x)[2] - read_table(y)[2])) for x, y in zip(a, c))
    elapsed = time.perf_counter() - SUITE_START
    ok = same_bytes and diff <= 1e-12 and elapsed < 1800
    record(10, ok, f"1-thread CSV bodies identical: {same_bytes} (whole files: {same_files}); "
                   f"8-thread max diff {diff:.1e}; acceptance suite so far {elapsed:.0f}s")
