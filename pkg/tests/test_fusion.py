import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmdfusion.dynamics import LinearSystem, Trajectory, propagate
from dmdfusion.errors import FilterDivergenceError, NumericalError
from dmdfusion.fusion import FilterConfig, RealSource, SurrogateSource, predict, run_filter, update
from dmdfusion.iod import GaussianBelief
from dmdfusion.measurements import MeasurementKind, MeasurementModel
from dmdfusion.surrogate import FixedRank, HankelParams, fit
from oracles import kalman_filter, rk4_transition

FULL2 = MeasurementModel(MeasurementKind.FULL_STATE, 2)
POS2 = MeasurementModel(MeasurementKind.POSITION_ONLY, 2)
OSC = np.array([[0.0, 1.0], [-1.0, -0.05]])


def test_config_validation():
    with pytest.raises(ValueError):
        FilterConfig(Q=np.array([[1.0, 2.0], [0.0, 1.0]]), R=np.eye(1))
    with pytest.raises(ValueError):
        FilterConfig(Q=np.eye(2), R=-np.eye(1))


def test_predict_zero_dynamics_identity():
    b = GaussianBelief(np.array([0.3, -0.1]), np.diag([2.0, 0.5]))
    out = predict(b, LinearSystem(), np.zeros((2, 2)), 0.1)
    np.testing.assert_array_equal(out.mean, b.mean)
    np.testing.assert_allclose(out.cov, b.cov, atol=1e-10)


def test_predict_linear_lyapunov_step():
    P = np.array([[1.0, 0.2], [0.2, 0.5]])
    Q = np.diag([1e-3, 2e-3])
    b = GaussianBelief(np.array([1.0, 0.0]), P)
    dt = 0.1
    out = predict(b, LinearSystem(OSC), Q, dt)
    Phi = rk4_transition(OSC, dt)
    np.testing.assert_allclose(out.cov, Phi @ P @ Phi.T + Q, atol=1e-10)
    np.testing.assert_allclose(out.mean, Phi @ b.mean, atol=1e-14)


def test_predict_trace_grows_for_rotation():
    w = 1.0
    rot = LinearSystem(np.array([[0.0, w], [-w, 0.0]]))
    b = GaussianBelief(np.zeros(2), np.diag([1.0, 0.3]))
    Q = 1e-3 * np.eye(2)
    tr = [np.trace(b.cov)]
    for _ in range(100):
        b = predict(b, rot, Q, 0.01)
        tr.append(np.trace(b.cov))
    assert np.all(np.diff(tr) >= 0)


def test_update_perfect_measurement():
    b = GaussianBelief(np.array([1.0, 2.0]), np.eye(2))
    z = np.array([1.5, 1.0])
    post, innov = update(b, z, FULL2, 1e-12 * np.eye(2))
    np.testing.assert_allclose(post.mean, z, atol=1e-6)
    np.testing.assert_allclose(innov, z - b.mean)


def test_update_uninformative_measurement():
    b = GaussianBelief(np.array([1.0, 2.0]), np.eye(2))
    post, _ = update(b, np.array([100.0, -50.0]), FULL2, 1e12 * np.eye(2))
    np.testing.assert_allclose(post.mean, b.mean, rtol=1e-6)
    np.testing.assert_allclose(post.cov, b.cov, rtol=1e-6)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_scalar_bayes(P, R):
    m = MeasurementModel(MeasurementKind.FULL_STATE, 1)
    b = GaussianBelief(np.array([0.0]), np.array([[P]]))
    for joseph in (True, False):
        post, _ = update(b, np.array([1.0]), m, np.array([[R]]), joseph=joseph)
        assert post.cov[0, 0] == pytest.approx(1.0 / (1.0 / P + 1.0 / R), rel=1e-10)
        assert post.mean[0] == pytest.approx(P / (P + R), rel=1e-10)


def test_singular_innovation_raises():
    b = GaussianBelief(np.zeros(2), np.zeros((2, 2)))
    with pytest.raises(NumericalError) as ei:
        update(b, np.zeros(2), FULL2, np.zeros((2, 2)))
    assert ei.value.condition_number is not None


spd2 = st.tuples(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(-0.9, 0.9)).map(
    lambda t: np.array([[t[0], t[2] * np.sqrt(t[0] * t[1])], [t[2] * np.sqrt(t[0] * t[1]), t[1]]])
)


@given(spd2, spd2, st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_joseph_matches_standard_and_psd(P, R, z):
    b = GaussianBelief(np.zeros(2), P)
    pj, _ = update(b, np.array(z), FULL2, R, joseph=True)
    ps, _ = update(b, np.array(z), FULL2, R, joseph=False)
    if np.linalg.cond(P + R) < 1e6:
        np.testing.assert_allclose(pj.cov, ps.cov, atol=1e-8 * max(1.0, np.abs(P).max()))
        np.testing.assert_allclose(pj.mean, ps.mean, atol=1e-8 * max(1.0, np.abs(z).max()))
    assert np.linalg.eigvalsh(pj.cov).min() >= -1e-10


@given(
    st.tuples(st.floats(0.01, 10), st.floats(0.01, 10)),
    st.tuples(st.floats(0.01, 10), st.floats(0.01, 10)),
    st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
    st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
)
def test_update_contracts_toward_measurement(pd, rd, x, z):
    b = GaussianBelief(np.array(x), np.diag(pd))
    post, _ = update(b, np.array(z), FULL2, np.diag(rd))
    assert np.all(np.abs(post.mean - z) <= np.abs(np.array(x) - z) + 1e-12)


def _linear_setup(n_steps=1000, dt=0.05, seed=0):
    rng = np.random.default_rng(seed)
    truth = propagate(LinearSystem(OSC), [1.0, 0.0], dt, n_steps)
    R = np.array([[1e-2]])
    zs = truth.states[:, :1] + 0.1 * rng.standard_normal((n_steps + 1, 1))
    Q = np.diag([1e-6, 1e-5])
    b0 = GaussianBelief(np.array([0.8, 0.3]), np.diag([0.1, 0.2]))
    return truth, zs, b0, FilterConfig(Q=Q, R=R)


def test_filter_matches_reference_kalman():
    truth, zs, b0, cfg = _linear_setup()
    tr = run_filter(b0, truth, LinearSystem(OSC), POS2, RealSource(zs), cfg)
    Phi = rk4_transition(OSC, truth.dt)
    H = np.array([[1.0, 0.0]])
    m_ref, P_ref = kalman_filter(b0.mean, b0.cov, Phi, H, cfg.Q, cfg.R, zs)
    assert np.max(np.abs(tr.mean - m_ref)) < 1e-10
    assert np.max(np.abs(tr.cov - P_ref)) < 1e-10


def test_trace_invariants():
    truth, zs, b0, cfg = _linear_setup(200)
    tr = run_filter(b0, truth, LinearSystem(OSC), POS2, RealSource(zs), cfg)
    assert len(tr) == len(truth)
    for k in range(1, len(tr)):
        S = tr.innovation_cov[k]
        assert np.allclose(S, S.T) and np.linalg.eigvalsh(S).min() > 0
        assert np.linalg.eigvalsh(tr.cov[k]).min() >= -1e-10
    assert np.all(np.isnan(tr.innovation[0]))


def test_exact_filter_on_exact_system():
    truth = propagate(LinearSystem(OSC), [1.0, 0.0], 0.05, 300)
    b0 = GaussianBelief(np.array([1.2, -0.3]), np.eye(2))
    cfg = FilterConfig(Q=np.zeros((2, 2)), R=1e-14 * np.eye(2))
    tr = run_filter(b0, truth, LinearSystem(OSC), FULL2, RealSource(truth.states), cfg)
    assert np.linalg.norm(tr.mean[-1] - truth.states[-1]) < 1e-8


def test_surrogate_source_matches_real_on_linear_truth():
    dt = 0.05
    truth = propagate(LinearSystem(OSC), [1.0, 0.0], dt, 800)
    z = truth.states[:, :1]
    model = fit(z[:401], HankelParams(4, FixedRank(2)), dt=dt)
    win = truth.segment(400)
    b0 = GaussianBelief(truth.states[400] + [0.05, -0.05], np.diag([1e-2, 1e-2]))
    cfg = FilterConfig(Q=1e-8 * np.eye(2), R=np.array([[1e-4]]))
    real = run_filter(b0, win, LinearSystem(OSC), POS2, RealSource(z[400:]), cfg)
    sur = run_filter(b0, win, LinearSystem(OSC), POS2, SurrogateSource(model, 400), cfg)
    assert np.max(np.abs(real.mean - sur.mean)) < 1e-6


def test_source_shape_checked():
    truth, zs, b0, cfg = _linear_setup(20)
    with pytest.raises(ValueError):
        run_filter(b0, truth, LinearSystem(OSC), POS2, RealSource(zs[:5]), cfg)


def test_divergence_detected():
    truth = Trajectory(np.zeros((10, 1)), 0.0, 1.0)
    m = MeasurementModel(MeasurementKind.FULL_STATE, 1)
    zs = 1e9 * np.ones((10, 1))
    b0 = GaussianBelief(np.array([1.0]), np.eye(1))
    cfg = FilterConfig(Q=np.eye(1), R=1e-6 * np.eye(1))
    with pytest.raises(FilterDivergenceError) as ei:
        run_filter(b0, truth, LinearSystem(np.zeros((1, 1))), m, RealSource(zs), cfg)
    assert ei.value.step == 1
