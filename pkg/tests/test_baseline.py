import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmdfusion.baseline import DEFAULT_PARTICLES, monte_carlo_propagate
from dmdfusion.dynamics import LinearSystem
from dmdfusion.iod import GaussianBelief
from oracles import rk4_transition

A = np.array([[0.0, 1.0], [-1.0, -0.1]])


def test_default_particle_count():
    assert DEFAULT_PARTICLES == 200


def test_zero_dynamics_mean_stays():
    b = GaussianBelief(np.array([1.0, -1.0]), np.diag([0.04, 0.09]))
    tr = monte_carlo_propagate(b, LinearSystem(), 200, 0.1, 20, seed=4)
    se = np.sqrt(np.diag(b.cov) / 200)
    assert np.all(np.abs(tr.mean - b.mean) <= 3 * se)
    assert len(tr) == 21 and tr.n_excluded == 0


def test_linear_gaussian_propagation():
    b = GaussianBelief(np.array([1.0, 0.0]), np.array([[0.2, 0.05], [0.05, 0.1]]))
    dt, n = 0.1, 30
    tr = monte_carlo_propagate(b, LinearSystem(A), 10_000, dt, n, seed=1)
    Phi = np.linalg.matrix_power(rk4_transition(A, dt), n)
    P = Phi @ b.cov @ Phi.T
    assert np.linalg.norm(tr.cov[-1] - P) / np.linalg.norm(P) < 0.05
    assert np.linalg.norm(tr.mean[-1] - Phi @ b.mean) < 3 * np.sqrt(np.trace(P) / 10_000)


@given(st.integers(0, 2**20), st.sampled_from([2, 3, 5]))
def test_deterministic_regardless_of_chunking(seed, workers):
    b = GaussianBelief(np.array([1.0, 0.0]), 0.1 * np.eye(2))
    a = monte_carlo_propagate(b, LinearSystem(A), 30, 0.1, 10, seed=seed)
    c = monte_carlo_propagate(b, LinearSystem(A), 30, 0.1, 10, seed=seed, workers=workers)
    assert a.mean.tobytes() == c.mean.tobytes()
    assert a.cov.tobytes() == c.cov.tobytes()


def test_unbiased_covariance_and_psd():
    b = GaussianBelief(np.zeros(2), np.eye(2))
    tr = monte_carlo_propagate(b, LinearSystem(), 5, 0.1, 1, seed=2)
    from dmdfusion.baseline import draw_particles

    x = draw_particles(b, 5, 2)
    np.testing.assert_allclose(tr.cov[0], np.cov(x.T, ddof=1), atol=1e-14)
    assert np.all(np.linalg.eigvalsh(tr.cov).min(axis=1) >= -1e-12)
    assert np.all(tr.stderr >= 0)


def test_divergent_particles_excluded():
    # unstable mode: particles started far out blow past 1e6 x their initial norm
    b = GaussianBelief(np.array([1.0]), np.array([[1.0]]))
    tr = monte_carlo_propagate(b, LinearSystem(np.array([[3.0]])), 50, 1.0, 20, seed=0)
    assert tr.n_excluded == 50
    assert tr.n_active[0] == 50


def test_needs_two_particles():
    with pytest.raises(ValueError):
        monte_carlo_propagate(GaussianBelief(np.zeros(2), np.eye(2)), LinearSystem(), 1, 0.1, 1)
