import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sbtlab.analysis import (SweepConfig, check_R_bounds, check_integral_lemma, check_scaling_lemmas,
                             d_mn, epsilon_sweep, fit_scaling, moment_antiderivative)
from sbtlab.errors import InputError
from sbtlab.geometry import radius_preset
from sbtlab.quadrature import QuadratureSpec

EPS = np.array([0.1, 0.05, 0.025, 0.0125])


def test_fit_exact_power():
    fit = fit_scaling(np.c_[EPS, 3 * EPS])
    assert fit.p == pytest.approx(1.0, abs=1e-12) and fit.C == pytest.approx(3.0)
    assert fit.r_squared == 1.0


def test_fit_exact_log_model():
    for q in (1.0, 1.5):
        fit = fit_scaling(np.c_[EPS, EPS * np.abs(np.log(EPS))**q], "log", q)
        assert fit.p == pytest.approx(1.0, abs=1e-12) and fit.r_squared == 1.0


@settings(max_examples=30)
@given(st.floats(1e-3, 1e3), st.lists(st.floats(1e-6, 1), min_size=4, max_size=4))
def test_fit_scale_equivariant(lam, errs):
    a = fit_scaling(np.c_[EPS, errs])
    b = fit_scaling(np.c_[EPS, lam * np.array(errs)])
    assert b.p == pytest.approx(a.p, abs=1e-9)
    assert b.C == pytest.approx(lam * a.C, rel=1e-9)
    assert 0 <= a.r_squared <= 1


def test_fit_rejects_bad_input():
    with pytest.raises(InputError):
        fit_scaling([(0.1, 1), (0.05, 0), (0.01, 1)])
    with pytest.raises(InputError):
        fit_scaling([(0.1, 1), (0.05, 1)])
    with pytest.raises(InputError):
        fit_scaling(np.c_[EPS, EPS], "log", 2.0)


def test_integral_bound_examples():
    rep = check_integral_lemma(0, 1, 0.0125, s_grid=[0.0])
    row = rep.rows[0]
    assert row["lhs"] == pytest.approx(2 * np.arcsinh(1 / row["eps_a"]), rel=1e-12)
    rep = check_integral_lemma(0, 2, 0.05, s_grid=[0.0])
    c = rep.rows[0]["eps_a"]
    assert rep.rows[0]["lhs"] == pytest.approx(2 / c * np.arctan(1 / c), rel=1e-12)
    rep = check_integral_lemma(1, 2, 0.1, s_grid=[0.0])
    c = rep.rows[0]["eps_a"]
    assert rep.rows[0]["lhs"] == pytest.approx(np.log((1 + c**2) / c**2), rel=1e-12)
    assert rep.passed


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2), st.integers(1, 4), st.floats(1e-3, 1), st.floats(1e-4, 2))
def test_closed_forms_match_quadrature(m, dn, c, x):
    from scipy.integrate import quad
    n = m + dn
    exact = moment_antiderivative(m, n, c, x)
    pts = [c] if c < x else None
    num = quad(lambda t: t**m / (t * t + c * c)**(n / 2), 0, x, epsabs=0, epsrel=1e-12,
               limit=200, points=pts)[0]
    assert exact == pytest.approx(num, rel=1e-9, abs=1e-14)
    assert moment_antiderivative(m, n, c, 0.0) == 0.0


def test_integral_bound_errors():
    with pytest.raises(InputError):
        check_integral_lemma(2, 2, 0.1)
    with pytest.raises(InputError):
        check_integral_lemma(0, 1, 0.3)


def test_d_mn_values():
    assert d_mn(0, 3) == pytest.approx(2.0, rel=1e-12)
    assert d_mn(0, 2) == pytest.approx(np.pi, rel=1e-12)
    assert d_mn(2, 5) == pytest.approx(2.0 / 3.0, rel=1e-12)
    with pytest.raises(InputError):
        d_mn(2, 3)


@pytest.mark.parametrize("which", ["straight", "arc"])
def test_R_bounds(which, straight01, arc01):
    g = straight01 if which == "straight" else arc01
    rep = check_R_bounds(g, sample_count=20000, seed=1)
    assert rep["upper_bound_passed"]
    assert rep["lower_constant"] >= 0.5 * min(1.0, g.c_gamma)
    assert rep["doublet_slope_ratio"] <= 1.0


def test_scaling_lemma_examples():
    rep = check_scaling_lemmas("kernel-moment", 0, 1)
    assert all(0.4 <= r <= 4 for r in rep.sup_ratio)
    assert rep.passed and rep.window_ratio <= 4
    rep = check_scaling_lemmas("odd-moment", 1, 3, "parabolic")
    assert rep.passed
    rep = check_scaling_lemmas("even-moment-limit", 0, 3, "constant", epsilons=(0.05, 0.025, 0.0125))
    assert rep.limit_errors[-1] <= 0.05
    assert rep.limit_errors == sorted(rep.limit_errors, reverse=True)


@pytest.mark.parametrize("args", [("odd-moment", 2, 4, "parabolic"),
                                  ("even-moment-limit", 1, 4, "constant"),
                                  ("even-moment-limit", 0, 4, "constant"),
                                  ("centerline-log", 0, 2, "parabolic"),
                                  ("odd-moment", 1, 3, "constant"),
                                  ("nonsense", 0, 1, "constant")])
def test_scaling_lemma_parity_errors(args):
    with pytest.raises(InputError):
        check_scaling_lemmas(*args)


def test_sweep_zero_force_and_validation():
    rep = epsilon_sweep(SweepConfig(epsilons=(0.1, 0.05), force="constant:0,0,0", s_points=5))
    for row in rep.rows:
        assert row["theta_residual_max"] == 0 and row["force_residual_max"] == 0
        assert row["centerline_gap_max"] == 0
    for bad in ((0.05, 0.1), (0.3,), ()):
        with pytest.raises(InputError):
            epsilon_sweep(SweepConfig(epsilons=bad))


def test_sweep_quadrature_converged():
    base = epsilon_sweep(SweepConfig(epsilons=(0.05,), s_points=21)).rows[0]
    fine = epsilon_sweep(SweepConfig(epsilons=(0.05,), s_points=21,
                                     quadrature=QuadratureSpec(nodes_per_panel=32, theta_nodes=128))).rows[0]
    for k in ("theta_residual_max", "force_residual_max", "centerline_gap_max"):
        assert abs(base[k] - fine[k]) <= 1e-6 * base[k]


def test_sweep_threads_env(monkeypatch):
    cfg = SweepConfig(epsilons=(0.1, 0.05), s_points=7)
    one = epsilon_sweep(cfg)
    monkeypatch.setenv("SBT_LAB_THREADS", "3")
    three = epsilon_sweep(cfg)
    assert three.metadata["threads"] == 3
    for a, b in zip(one.rows, three.rows):
        assert a == b
    monkeypatch.setenv("SBT_LAB_THREADS", "many")
    with pytest.raises(InputError):
        epsilon_sweep(cfg)


def test_curved_fiber_residual_rates():
    geo = {"centerline": {"kind": "circular-arc", "params": {"radius": 2.0}}, "radius": {"kind": "prolate"}}
    rep = epsilon_sweep(SweepConfig(geometry=geo, s_points=51))
    theta = fit_scaling(rep.column("theta_residual_max"), "log", 1.0)
    gap = fit_scaling(rep.column("centerline_gap_max"), "log", 1.0)
    force = fit_scaling(rep.column("force_residual_max"), "pow")
    assert 0.8 <= theta.p <= 1.2 and 0.8 <= gap.p <= 1.2
    assert force.p >= 0.8
    for col in ("theta_residual_max", "force_residual_max", "centerline_gap_max"):
        vals = [v for _, v in rep.column(col)]
        assert vals == sorted(vals, reverse=True)
