"""Measurement functions, their Jacobians, sensor noise and station geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import OMEGA_EARTH, R_EARTH, _norm3
from .errors import GeometryError, InvalidStateError

TWO_PI = 2.0 * math.pi


class MeasurementKind(str, Enum):
    FULL_STATE = "full_state"
    POSITION_ONLY = "position_only"
    RANGE_AZ_EL = "range_az_el"


@dataclass(frozen=True)
class GroundStation:
    latitude: float  # deg
    longitude: float  # deg
    altitude: float = 0.0  # km
    gmst0: float = 0.0  # rad
    earth_rate: float = OMEGA_EARTH
    earth_radius: float = R_EARTH

    def __post_init__(self):
        if abs(self.latitude) > 90 or self.altitude < 0:
            raise ValueError(f"invalid station geometry {self}")

    def sidereal_angle(self, t):
        """Local sidereal angle (longitude + Earth rotation) at time t."""
        return self.gmst0 + self.earth_rate * t + math.radians(self.longitude)

    def position_eci(self, t):
        # spherical Earth
        lat = math.radians(self.latitude)
        lst = self.sidereal_angle(t)
        rs = self.earth_radius + self.altitude
        return rs * np.array([math.cos(lat) * math.cos(lst), math.cos(lat) * math.sin(lst), math.sin(lat)])

    def sez_rotation(self, t):
        """Rows are the south, east and zenith unit vectors in the inertial frame."""
        lat = math.radians(self.latitude)
        lst = self.sidereal_angle(t)
        sl, cl = math.sin(lat), math.cos(lat)
        st, ct = math.sin(lst), math.cos(lst)
        return np.array(
            [
                [sl * ct, sl * st, -cl],
                [-st, ct, 0.0],
                [cl * ct, cl * st, sl],
            ]
        )


COLUMBUS = GroundStation(latitude=39.9612, longitude=-82.9988, altitude=0.275)


@dataclass(frozen=True)
class MeasurementSeries:
    samples: np.ndarray  # (N, p)
    dt: float
    kind: MeasurementKind = MeasurementKind.FULL_STATE
    t0: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2:
            raise ValueError("samples must be (N, p)")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def p(self):
        return self.samples.shape[1]

    def head(self, n):
        return MeasurementSeries(self.samples[:n], self.dt, self.kind, self.t0)


# --- measurement functions -----------------------------------------------------


def wrap_2pi(a):
    """Map angles to [0, 2pi); a tiny negative input would otherwise round to 2pi."""
    out = np.mod(a, TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out) if np.ndim(out) else (0.0 if out >= TWO_PI else float(out))


def full_state(x):
    return np.asarray(x, dtype=float).copy()


def position_only(x):
    """Position block of the state: first three components of a 6-state,
    first component of a 2-state."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n not in (2, 6):
        raise InvalidStateError(f"position-only measurement needs a 2- or 6-state, got {n}")
    return x[..., : n // 2].copy()


def range_az_el(x, station: GroundStation, t):
    """Range (km), azimuth clockwise from north in [0, 2pi), elevation."""
    x = np.asarray(x, dtype=float)
    rho_vec = x[:3] - station.position_eci(t)
    rho = float(np.linalg.norm(rho_vec))
    if rho == 0.0:
        raise GeometryError("object coincides with the station")
    s, e, z = station.sez_rotation(t) @ rho_vec
    az = wrap_2pi(math.atan2(e, -s))
    el = math.asin(max(-1.0, min(1.0, z / rho)))
    return np.array([rho, az, el])


@dataclass(frozen=True)
class MeasurementModel:
    """Bundles a measurement kind with the geometry it needs."""

    kind: MeasurementKind
    n: int
    station: GroundStation | None = None

    def __post_init__(self):
        if self.kind is MeasurementKind.RANGE_AZ_EL and self.station is None:
            raise ValueError("range/azimuth/elevation measurements need a station")

    @property
    def p(self):
        if self.kind is MeasurementKind.FULL_STATE:
            return self.n
        if self.kind is MeasurementKind.POSITION_ONLY:
            return self.n // 2
        return 3

    @property
    def angle_mask(self):
        """Components that live on a circle and need wrapped differences."""
        mask = np.zeros(self.p, dtype=bool)
        if self.kind is MeasurementKind.RANGE_AZ_EL:
            mask[1] = True
        return mask

    def h(self, x, t=0.0):
        if self.kind is MeasurementKind.FULL_STATE:
            return full_state(x)
        if self.kind is MeasurementKind.POSITION_ONLY:
            return position_only(x)
        return range_az_el(x, self.station, t)

    def residual(self, z, z_pred):
        d = np.asarray(z, dtype=float) - z_pred
        m = self.angle_mask
        if m.any():
            d[m] = (d[m] + math.pi) % TWO_PI - math.pi
        return d

    def jacobian(self, x, t=0.0):
        return measurement_jacobian(self, x, t)

    def series(self, states, times, dt):
        samples = np.array([self.h(s, t) for s, t in zip(states, times)])
        return MeasurementSeries(samples, dt, self.kind, float(times[0]))


def measurement_jacobian(model: MeasurementModel, x, t=0.0, rel_step=1e-6):
    """p x n Jacobian of h at x; exact selection matrices for linear kinds."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if model.kind is MeasurementKind.FULL_STATE:
        return np.eye(n)
    if model.kind is MeasurementKind.POSITION_ONLY:
        p = n // 2
        return np.hstack([np.eye(p), np.zeros((p, n - p))])

    z0 = model.h(x, t)
    if math.cos(z0[2]) < 1e-6:
        raise GeometryError("azimuth undefined at zenith/nadir; Jacobian degenerate")
    H = np.zeros((3, n))
    scale = max(float(_norm3(x[:3])), 1.0)
    for i in range(3):
        h = rel_step * scale
        dx = np.zeros(n)
        dx[i] = h
        H[:, i] = model.residual(model.h(x + dx, t), model.h(x - dx, t)) / (2.0 * h)
    return H


# --- noise -------------------------------------------------------------------


class NoiseMode(str, Enum):
    ABSOLUTE = "absolute"
    RELATIVE_PERCENT = "relative_percent"


@dataclass(frozen=True)
class NoiseSpec:
    """Sensor noise. ``R`` is an absolute covariance; in relative mode
    ``percent`` sets the per-component standard deviation as a fraction of
    the clean series RMS."""

    R: np.ndarray | None = None
    mode: NoiseMode = NoiseMode.ABSOLUTE
    percent: float = 0.0

    def __post_init__(self):
        if self.mode is NoiseMode.ABSOLUTE:
            if self.R is None:
                raise ValueError("absolute noise needs a covariance R")
            R = np.atleast_2d(np.asarray(self.R, dtype=float))
            _check_psd(R)
            object.__setattr__(self, "R", R)
        elif self.percent < 0:
            raise ValueError("percent must be non-negative")

    @classmethod
    def diagonal(cls, sigmas):
        return cls(R=np.diag(np.square(sigmas)))

    @classmethod
    def relative(cls, percent):
        return cls(mode=NoiseMode.RELATIVE_PERCENT, percent=percent)

    def effective_R(self, reference=None):
        if self.mode is NoiseMode.ABSOLUTE:
            return self.R
        if reference is None:
            raise ValueError("relative noise needs the clean reference series")
        ref = np.atleast_2d(np.asarray(reference, dtype=float))
        rms = np.sqrt(np.mean(ref**2, axis=0))
        return np.diag((self.percent / 100.0 * rms) ** 2)


def _check_psd(R, tol=1e-12):
    if R.shape[0] != R.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(R, R.T, atol=tol, rtol=0):
        raise ValueError("covariance must be symmetric")
    w = np.linalg.eigvalsh(R)
    if w.min() < -tol * max(1.0, abs(w.max())):
        raise ValueError("covariance must be positive semi-definite")


def noise_factor(R):
    """Matrix L with L @ L.T == R for PSD R."""
    w, V = np.linalg.eigh(R)
    return V * np.sqrt(np.clip(w, 0.0, None))


def add_noise(z, spec: NoiseSpec, rng: np.random.Generator, reference=None):
    """Return ``z`` plus zero-mean Gaussian noise drawn from ``spec``.

    ``z`` may be one sample (p,) or a series (N, p). In relative mode the
    RMS is taken from ``reference`` (defaults to ``z`` itself).
    """
    z = np.asarray(z, dtype=float)
    R = spec.effective_R(z if reference is None else reference)
    p = z.shape[-1]
    if R.shape != (p, p):
        raise ValueError(f"noise dimension {R.shape} does not match samples of size {p}")
    if not np.any(R):
        return z.copy()
    L = noise_factor(R)
    draws = rng.standard_normal(z.shape)
    return z + draws @ L.T
