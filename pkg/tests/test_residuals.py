import numpy as np
import pytest

from sbtlab.errors import DomainError, InputError
from sbtlab.forces import constant_force, parabolic_force
from sbtlab.geometry import surface_frame
from sbtlab.residuals import (centerline_gap, fd_stress_oracle, fd_surface_stress, residual_sample,
                              sbt_force, surface_stress, theta_residual)


def test_surface_stress_matches_oracle(arc01):
    f = parabolic_force([1.0, 0.5, -0.3])
    for s, th in ((0.0, 0.7), (0.62, 3.9), (-0.9, 5.5)):
        a = surface_stress(arc01, f, s, th).stress
        b = fd_surface_stress(arc01, f, s, th, 1e-5)
        assert np.max(np.abs(a - b)) < 1e-6


def test_integer_angle_same_as_float(arc01):
    f = parabolic_force([1.0, 0.0, 0.0])
    a = surface_stress(arc01, f, 0.5, 2)
    b = surface_stress(arc01, f, 0.5, 2.0)
    assert np.array_equal(a.stress, b.stress)


def test_traction_is_stress_times_normal(arc01):
    f = parabolic_force([0.3, 1.0, 0.2])
    for s, th in ((0.1, 1.0), (0.8, 4.0)):
        smp = surface_stress(arc01, f, s, th)
        assert np.allclose(smp.traction, smp.stress @ smp.normal, atol=1e-12)
        assert np.allclose(smp.strain_rate_normal - smp.pressure * smp.normal, smp.traction)


def test_oracle_needs_clearance(arc01):
    fr = surface_frame(arc01, np.array(0.0), np.array(0.0))
    x = fr.center + (arc01.epsilon * fr.a + 1e-4) * fr.e_rho
    with pytest.raises(DomainError):
        fd_stress_oracle(arc01, constant_force([1, 0, 0]), x, 1e-4)
    with pytest.raises(InputError):
        fd_stress_oracle(arc01, constant_force([1, 0, 0]), [1, 1, 1], 0.0)


def test_zero_force_all_residuals_zero(arc01):
    r = residual_sample(arc01, constant_force([0, 0, 0]), 0.3)
    assert r.theta_residual_sup == 0 and r.centerline_gap == 0
    assert np.all(r.force_residual == 0)


def test_axial_force_on_straight_fiber_is_axisymmetric(straight01):
    # tangential constant force: the flow is axisymmetric so u is theta-independent
    _, sup = theta_residual(straight01, constant_force([0, 0, 1]), 0.0)
    assert sup < 1e-14


def test_force_close_to_line_force(straight01):
    f = parabolic_force([1.0, 0.0, 0.0])
    parts = sbt_force(straight01, f, 0.2, parts=True)
    assert np.allclose(parts.F_tilde, parts.F_rho + parts.F_t)
    assert np.linalg.norm(parts.f_sb - f(np.array(0.2))) < 0.03
    # the two conventions differ by the stretch derivative
    a = sbt_force(straight01, f, 0.2, convention="stretch")
    b = sbt_force(straight01, f, 0.2, convention="arclength")
    assert np.allclose(a, straight01.eta * b)
    with pytest.raises(InputError):
        sbt_force(straight01, f, 0.2, convention="bogus")


def test_residual_sample_consistent(arc01):
    f = parabolic_force([1.0, 0.2, 0.0])
    r = residual_sample(arc01, f, -0.4)
    assert r.theta_residual_sup == pytest.approx(theta_residual(arc01, f, -0.4)[1], rel=1e-12)
    assert r.centerline_gap == pytest.approx(centerline_gap(arc01, f, -0.4), rel=1e-12)
    assert np.allclose(r.force_residual, sbt_force(arc01, f, -0.4) - f(np.array(-0.4)), atol=1e-13)
    with pytest.raises(DomainError):
        residual_sample(arc01, f, 1.5)
