import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import spearmanr

from dmdfusion.consistency import (
    eigenvalue_stability,
    formula_trace,
    residual_stats,
    residuals,
    variance_growth,
)
from dmdfusion.dynamics import Pendulum, propagate
from dmdfusion.measurements import NoiseSpec, add_noise
from dmdfusion.rng import child_rng
from dmdfusion.surrogate import FixedRank, HankelParams, fit
from oracles import quadrature_sinusoid


def _linear_series(n=200):
    M = np.array([[0.98, -0.15], [0.15, 0.98]])
    z = np.empty((n, 2))
    z[0] = [1.0, 0.3]
    for k in range(n - 1):
        z[k + 1] = M @ z[k]
    return z


def test_exact_linear_residuals_vanish():
    z = _linear_series()
    m = fit(z, HankelParams(3, FixedRank(2)))
    res = residuals(m, z)
    assert res.shape == (z.shape[0] - 3, 2)
    assert np.max(np.abs(res)) < 1e-10
    st_ = residual_stats(res)
    assert np.max(np.abs(st_.mean)) <= 1e-10 and np.max(np.abs(st_.cov)) <= 1e-10


def test_residual_dimension_mismatch():
    m = fit(_linear_series(), HankelParams(3, FixedRank(2)))
    with pytest.raises(ValueError):
        residuals(m, np.ones((50, 3)))


def test_noisy_residual_covariance_near_R():
    z = quadrature_sinusoid(600)
    R = np.diag([1e-4, 2e-4])
    covs = []
    for s in range(50):
        y = add_noise(z, NoiseSpec(R=R), child_rng(s, "resid"))
        m = fit(y, HankelParams(50, FixedRank(2)))
        covs.append(residual_stats(residuals(m, y)).cov)
    C = np.mean(covs, axis=0)
    assert np.linalg.norm(C - R) / np.linalg.norm(R) < 0.1


def test_damped_pendulum_residuals_grow_past_training():
    z = propagate(Pendulum(m=0.5, c=2e-3), [0.3, 0.0], 0.01, 12_000).states[:, :1]
    m = fit(z[:2001], HankelParams(200, FixedRank(4)))
    res = np.abs(residuals(m, z)[:, 0])
    smooth = np.convolve(res, np.ones(400) / 400, mode="valid")
    assert spearmanr(np.arange(smooth.size), smooth).statistic > 0.9
    assert res[-2000:].mean() > res[:1800].mean()


def test_constant_residuals():
    c = np.array([0.5, -2.0])
    st_ = residual_stats(np.tile(c, (10, 1)))
    np.testing.assert_allclose(st_.mean, c)
    np.testing.assert_allclose(st_.cov, 0.0, atol=1e-15)
    assert st_.n == 10
    with pytest.raises(ValueError):
        residual_stats(np.ones((1, 2)))


def test_iid_mean_clt_bound():
    R = np.diag([1.0, 4.0])
    n = 400
    hits = 0
    for s in range(100):
        e = add_noise(np.zeros((n, 2)), NoiseSpec(R=R), child_rng(s, "clt"))
        hits += np.linalg.norm(residual_stats(e).mean) <= 3 * np.sqrt(np.trace(R) / n)
    assert hits >= 99


@given(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), st.integers(0, 1000))
def test_deterministic_part_decomposes(c, seed):
    noise = add_noise(np.zeros((100, 2)), NoiseSpec(R=np.eye(2)), child_rng(seed, "mix"))
    both = residual_stats(noise + np.array(c))
    alone = residual_stats(noise)
    np.testing.assert_allclose(both.mean - np.array(c), alone.mean, atol=1e-12)
    np.testing.assert_allclose(both.cov, alone.cov, atol=1e-10)


def test_growth_zero_for_noise_free_linear():
    z = _linear_series(400)
    vg = variance_growth(z, NoiseSpec(R=np.zeros((2, 2))), HankelParams(3, FixedRank(2)), 200, 100, n_ensemble=3)
    assert np.max(vg.empirical_trace) < 1e-16
    assert vg.trace_R == 0.0


def test_growth_noisy_sinusoid():
    z = quadrature_sinusoid(1200)
    noise = NoiseSpec.relative(5.0)
    vg = variance_growth(z, noise, HankelParams(50, FixedRank(2)), 600, 400, n_ensemble=50, seed=0)
    assert vg.spearman > 0.8
    assert np.all(vg.empirical_trace >= vg.trace_R)
    assert np.all(vg.empirical_trace >= vg.trace_R * (1 - 0.1))
    assert vg.horizons[0] == 1 and vg.horizons.size == 400
    assert np.all(vg.formula_trace > vg.trace_R)


def test_growth_horizon_precondition():
    with pytest.raises(ValueError):
        variance_growth(np.ones((10, 1)), NoiseSpec.relative(1.0), HankelParams(2), 8, 5)


def test_formula_trace_includes_R():
    z = _linear_series()
    m = fit(z, HankelParams(3, FixedRank(2)))
    R = np.diag([0.1, 0.2])
    base = formula_trace(m, z, np.zeros((2, 2)))
    assert formula_trace(m, z, R) == pytest.approx(base + 0.3)
    # for an exact fit the second moment term is the mean energy of the next sample
    nxt = z[3:]
    assert base == pytest.approx(np.mean(np.sum(nxt**2, axis=1)), rel=1e-9)


def test_eigenvalue_stability_unbiased():
    z = quadrature_sinusoid(600)
    ref, mean, se = eigenvalue_stability(z, NoiseSpec.relative(2.0), HankelParams(50, FixedRank(2)), n_ensemble=50)
    assert np.all(np.abs(mean.real - ref.real) <= 2 * se.real + 1e-15)
    assert np.all(np.abs(mean.imag - ref.imag) <= 2 * se.imag + 1e-15)
