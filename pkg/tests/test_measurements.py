import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmdfusion.dynamics import OMEGA_EARTH, R_EARTH, elements_to_cartesian
from dmdfusion.errors import GeometryError, InvalidStateError
from dmdfusion.harness.scenarios import ISS
from dmdfusion.measurements import (
    COLUMBUS,
    GroundStation,
    MeasurementKind,
    MeasurementModel,
    MeasurementSeries,
    NoiseSpec,
    add_noise,
    full_state,
    measurement_jacobian,
    position_only,
    range_az_el,
)
from dmdfusion.rng import child_rng


def test_position_only_projection():
    np.testing.assert_array_equal(position_only([1, 2, 3, 4, 5, 6]), [1, 2, 3])
    with pytest.raises(InvalidStateError):
        position_only([1, 2, 3])


def test_position_only_jacobian_exact():
    H = measurement_jacobian(MeasurementModel(MeasurementKind.POSITION_ONLY, 6), np.arange(6.0))
    np.testing.assert_array_equal(H, np.hstack([np.eye(3), np.zeros((3, 3))]))


def test_full_state_passthrough():
    x = np.array([0.3, -0.2])
    m = MeasurementModel(MeasurementKind.FULL_STATE, 2)
    np.testing.assert_array_equal(m.h(x), x)
    np.testing.assert_array_equal(full_state(x), x)
    np.testing.assert_array_equal(m.jacobian(x), np.eye(2))


def test_zenith_geometry():
    st_ = GroundStation(30.0, 45.0, 0.5)
    t = 1234.0
    up = st_.sez_rotation(t)[2]
    x = np.r_[st_.position_eci(t) + 400.0 * up, 0, 0, 0]
    rho, az, el = range_az_el(x, st_, t)
    assert el == pytest.approx(math.pi / 2, abs=1e-7)
    assert rho == pytest.approx(400.0, rel=1e-12)


def test_due_north_on_horizon():
    st_ = GroundStation(10.0, -20.0, 0.0)
    t = 50.0
    south = st_.sez_rotation(t)[0]
    x = np.r_[st_.position_eci(t) - 900.0 * south, 0, 0, 0]
    rho, az, el = range_az_el(x, st_, t)
    assert min(az, 2 * math.pi - az) < 1e-12
    assert abs(el) < 1e-12


def test_due_east_is_quarter_turn():
    st_ = GroundStation(10.0, -20.0, 0.0)
    east = st_.sez_rotation(0.0)[1]
    _, az, _ = range_az_el(np.r_[st_.position_eci(0.0) + 500.0 * east, 0, 0, 0], st_, 0.0)
    assert az == pytest.approx(math.pi / 2, abs=1e-12)


def _rae_oracle(r_eci, lat_deg, lon_deg, alt, t, gmst0=0.0, w=OMEGA_EARTH, re=R_EARTH):
    # ECI -> ECEF by rotating about z by the Greenwich angle,
    # then ECEF -> ENU with the classical lat/lon matrices
    th = gmst0 + w * t
    Rz = np.array([[math.cos(th), math.sin(th), 0], [-math.sin(th), math.cos(th), 0], [0, 0, 1]])
    r_ecef = Rz @ r_eci
    lat, lon = math.radians(lat_deg), math.radians(lon_deg)
    site = (re + alt) * np.array([math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)])
    d = r_ecef - site
    east = np.array([-math.sin(lon), math.cos(lon), 0])
    north = np.array([-math.sin(lat) * math.cos(lon), -math.sin(lat) * math.sin(lon), math.cos(lat)])
    up = np.array([math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)])
    e, n, u = d @ east, d @ north, d @ up
    rho = math.sqrt(e * e + n * n + u * u)
    return np.array([rho, math.atan2(e, n) % (2 * math.pi), math.asin(u / rho)])


def test_iss_against_independent_chain():
    x = elements_to_cartesian(ISS)
    for t in (0.0, 600.0, 4321.0):
        z = range_az_el(x, COLUMBUS, t)
        ref = _rae_oracle(x[:3], COLUMBUS.latitude, COLUMBUS.longitude, COLUMBUS.altitude, t)
        assert z[0] == pytest.approx(ref[0], rel=1e-12)
        assert abs(z[1] - ref[1]) < 1e-9 and abs(z[2] - ref[2]) < 1e-9


def test_station_coincident_rejected():
    with pytest.raises(GeometryError):
        range_az_el(np.r_[COLUMBUS.position_eci(0.0), 0, 0, 0], COLUMBUS, 0.0)


def test_station_validation():
    with pytest.raises(ValueError):
        GroundStation(91.0, 0.0)
    with pytest.raises(ValueError):
        GroundStation(0.0, 0.0, -1.0)


def _state(draw_r):
    return np.r_[draw_r, 1.0, -2.0, 0.5]


vec3 = st.tuples(st.floats(-40000, 40000), st.floats(-40000, 40000), st.floats(-40000, 40000))


@given(vec3, st.floats(0, 86400))
def test_rae_ranges_and_distance(r, t):
    r = np.array(r)
    if np.linalg.norm(r - COLUMBUS.position_eci(t)) < 1.0:
        r = r + 10000.0
    rho, az, el = range_az_el(_state(r), COLUMBUS, t)
    assert 0 <= az < 2 * math.pi
    assert -math.pi / 2 <= el <= math.pi / 2
    dist = np.linalg.norm(r - COLUMBUS.position_eci(t))
    assert rho == pytest.approx(dist, rel=1e-12)


def test_range_row_is_line_of_sight():
    m = MeasurementModel(MeasurementKind.RANGE_AZ_EL, 6, COLUMBUS)
    x = elements_to_cartesian(ISS)
    t = 120.0
    H = m.jacobian(x, t)
    los = x[:3] - COLUMBUS.position_eci(t)
    los /= np.linalg.norm(los)
    np.testing.assert_allclose(H[0, :3], los, atol=1e-7)
    np.testing.assert_array_equal(H[:, 3:], 0.0)


def test_rae_jacobian_degenerate_at_zenith():
    m = MeasurementModel(MeasurementKind.RANGE_AZ_EL, 6, COLUMBUS)
    up = COLUMBUS.sez_rotation(0.0)[2]
    with pytest.raises(GeometryError):
        m.jacobian(np.r_[COLUMBUS.position_eci(0.0) + 500 * up, 0, 0, 0], 0.0)


def test_azimuth_residual_wraps():
    m = MeasurementModel(MeasurementKind.RANGE_AZ_EL, 6, COLUMBUS)
    d = m.residual(np.array([1.0, 0.01, 0.0]), np.array([1.0, 2 * math.pi - 0.01, 0.0]))
    assert d[1] == pytest.approx(0.02, abs=1e-12)


def test_zero_noise_is_identity():
    z = np.arange(6.0).reshape(2, 3)
    out = add_noise(z, NoiseSpec(R=np.zeros((3, 3))), child_rng(0, "t"))
    np.testing.assert_array_equal(out, z)


def test_noise_covariance_statistics():
    R = np.array([[2.0, 0.3], [0.3, 0.5]])
    draws = add_noise(np.zeros((100_000, 2)), NoiseSpec(R=R), child_rng(3, "stats"))
    C = np.cov(draws.T)
    assert np.linalg.norm(C - R) / np.linalg.norm(R) < 0.05


def test_rae_noise_spec_values():
    spec = NoiseSpec.diagonal((1.0, 0.01, 0.01))
    np.testing.assert_allclose(np.sqrt(np.diag(spec.R)), [1.0, 0.01, 0.01])


def test_relative_noise_uses_component_rms():
    clean = np.c_[np.full(100, 3.0), np.full(100, -4.0)]
    R = NoiseSpec.relative(5.0).effective_R(clean)
    np.testing.assert_allclose(np.diag(R), [(0.05 * 3) ** 2, (0.05 * 4) ** 2])


def test_noise_rejects_bad_covariance():
    with pytest.raises(ValueError):
        NoiseSpec(R=np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        NoiseSpec(R=np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        add_noise(np.zeros(3), NoiseSpec(R=np.eye(2)), child_rng(0, "x"))


@given(st.integers(0, 2**32))
def test_noise_bit_reproducible(seed):
    z = np.ones((20, 3))
    spec = NoiseSpec.relative(5.0)
    a = add_noise(z, spec, child_rng(seed, "sensor"))
    b = add_noise(z, spec, child_rng(seed, "sensor"))
    assert a.tobytes() == b.tobytes()


def test_series_shape():
    s = MeasurementSeries(np.arange(5.0), 0.1)
    assert s.p == 1 and len(s) == 5 and len(s.head(3)) == 3
