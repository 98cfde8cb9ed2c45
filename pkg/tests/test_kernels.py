import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sbtlab.errors import SingularEvaluationError
from sbtlab.kernels import doublet, kernel_jets, pressure_kernel, stokeslet, stokeslet_stress

vec = st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3).map(np.array)
nonzero = vec.filter(lambda x: np.linalg.norm(x) > 0.05)


def _rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    return q * np.sign(np.diag(r))


@given(nonzero)
def test_kernels_symmetric(x):
    assert np.allclose(stokeslet(x), stokeslet(x).T, atol=0)
    assert np.allclose(doublet(x), doublet(x).T, atol=0)


@given(nonzero, st.floats(0.1, 10))
def test_homogeneity(x, lam):
    assert np.allclose(stokeslet(lam * x), stokeslet(x) / lam, rtol=1e-12)
    assert np.allclose(doublet(lam * x), doublet(x) / lam**3, rtol=1e-12)


def test_rotation_equivariance(rng):
    for _ in range(20):
        q = _rotation(rng)
        x = rng.normal(size=3)
        assert np.allclose(stokeslet(q @ x), q @ stokeslet(x) @ q.T, rtol=1e-12, atol=1e-14)
        assert np.allclose(doublet(q @ x), q @ doublet(x) @ q.T, rtol=1e-12, atol=1e-14)


def test_known_values():
    x = np.array([2.0, 0.0, 0.0])
    assert np.allclose(stokeslet(x), np.diag([1.0, 0.5, 0.5]))
    assert np.allclose(doublet(x), np.diag([-0.25, 0.125, 0.125]))
    assert pressure_kernel(x, np.array([1.0, 0, 0])) == pytest.approx(1 / (16 * np.pi))


def test_doublet_traceless_and_divergence_free_stokeslet(rng):
    x = rng.normal(size=(50, 3))
    assert np.allclose(np.trace(doublet(x), axis1=-2, axis2=-1), 0, atol=1e-12)
    S, D = kernel_jets(x)
    # d_j S_ij = 0 and d_j D_ij = 0
    assert np.allclose(np.einsum("mijj->mi", S.gradient), 0, atol=1e-10)
    assert np.allclose(np.einsum("mijj->mi", D.gradient), 0, atol=1e-10)


def test_gradients_match_differences(rng):
    x = rng.uniform(0.5, 1.5, size=(30, 3)) * rng.choice([-1, 1], size=(30, 3))
    S, D = kernel_jets(x)
    h = 1e-5
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        dS = (stokeslet(x + e) - stokeslet(x - e)) / (2 * h)
        dD = (doublet(x + e) - doublet(x - e)) / (2 * h)
        assert np.allclose(S.gradient[..., k], dS, atol=1e-7)
        assert np.allclose(D.gradient[..., k], dD, atol=1e-6)


def test_stress_closed_form(rng):
    x = rng.normal(size=3)
    f = rng.normal(size=3)
    # sigma = grad u + grad u^T - p I with u = S f / 8pi
    h = 1e-6
    g = np.empty((3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        g[:, k] = (stokeslet(x + e) @ f - stokeslet(x - e) @ f) / (2 * h) / (8 * np.pi)
    expect = g + g.T - pressure_kernel(x, f) * np.eye(3)
    assert np.allclose(stokeslet_stress(x, f), expect, atol=1e-8)


def test_origin_raises():
    with pytest.raises(SingularEvaluationError):
        stokeslet(np.zeros(3))
    with pytest.raises(ZeroDivisionError):
        doublet(np.zeros(3))
