"""Initial state determination from a short batch of measurements."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import MU_EARTH
from .errors import GeometryError
from .measurements import GroundStation


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).copy()
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float)).copy()
        n = mean.size
        if cov.shape != (n, n):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of size {n}")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if not np.allclose(cov, cov.T, atol=1e-10 * scale, rtol=0):
            raise ValueError("covariance is not symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-12 * scale:
            raise ValueError("covariance is not positive semi-definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def _trusted(cls, mean, cov):
        # internal fast path for filter steps whose output is symmetric by construction
        obj = object.__new__(cls)
        object.__setattr__(obj, "mean", mean)
        object.__setattr__(obj, "cov", cov)
        return obj

    @property
    def dim(self):
        return self.mean.size

    def sample(self, rng, size=None):
        w, V = np.linalg.eigh(self.cov)
        L = V * np.sqrt(np.clip(w, 0, None))
        shape = (self.dim,) if size is None else (size, self.dim)
        return self.mean + rng.standard_normal(shape) @ L.T


def finite_difference_velocity(r1, r2, r3, dt):
    """Central-difference velocity at the epoch of ``r2``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return (np.asarray(r3, dtype=float) - np.asarray(r1, dtype=float)) / (2.0 * dt)


def herrick_gibbs(r1, r2, r3, t1, t2, t3, mu=MU_EARTH, max_coplanar_deg=3.0, max_sep_deg=5.0):
    """Velocity at t2 from three closely spaced position fixes.

    Taylor-series combination with gravity-gradient corrections (Herrick-Gibbs).
    Raises :class:`GeometryError` for collinear or non-coplanar fixes and warns
    when the angular spacing is too wide for the expansion to be accurate.
    """
    r1, r2, r3 = (np.asarray(r, dtype=float) for r in (r1, r2, r3))
    if not t1 < t2 < t3:
        raise ValueError("epochs must be strictly increasing")
    n1, n2, n3 = (np.linalg.norm(r) for r in (r1, r2, r3))
    c23 = np.cross(r2, r3)
    c12 = np.cross(r1, r2)
    if np.linalg.norm(c23) <= 1e-12 * n2 * n3 or np.linalg.norm(c12) <= 1e-12 * n1 * n2:
        raise GeometryError("position fixes are collinear")
    alpha = math.degrees(math.asin(min(1.0, abs(np.dot(c23 / np.linalg.norm(c23), r1 / n1)))))
    if alpha > max_coplanar_deg:
        raise GeometryError(f"fixes are {alpha:.2f} deg out of plane")
    sep12 = math.degrees(math.acos(np.clip(r1 @ r2 / (n1 * n2), -1, 1)))
    sep23 = math.degrees(math.acos(np.clip(r2 @ r3 / (n2 * n3), -1, 1)))
    if max(sep12, sep23) > max_sep_deg:
        warnings.warn(
            f"Herrick-Gibbs spacing {max(sep12, sep23):.2f} deg exceeds {max_sep_deg} deg",
            stacklevel=2,
        )

    dt21, dt31, dt32 = t2 - t1, t3 - t1, t3 - t2
    g1 = dt32 * (1.0 / (dt21 * dt31) + mu / (12.0 * n1**3))
    g2 = (dt32 - dt21) * (1.0 / (dt21 * dt32) + mu / (12.0 * n2**3))
    g3 = dt21 * (1.0 / (dt32 * dt31) + mu / (12.0 * n3**3))
    return -g1 * r1 + g2 * r2 + g3 * r3


def rae_to_position(z, station: GroundStation, t):
    """Invert a noiseless (range, azimuth, elevation) fix to an inertial position."""
    rho, az, el = z
    ce = math.cos(el)
    sez = rho * np.array([-ce * math.cos(az), ce * math.sin(az), math.sin(el)])
    return station.position_eci(t) + station.sez_rotation(t).T @ sez


def initial_belief(x0, pos_sigma, vel_sigma) -> GaussianBelief:
    """Diagonal Gaussian around ``x0``; first half of the state is position."""
    if not (pos_sigma > 0 and vel_sigma > 0):
        raise ValueError("sigmas must be positive")
    x0 = np.asarray(x0, dtype=float)
    half = x0.size // 2
    var = np.r_[np.full(half, pos_sigma**2), np.full(x0.size - half, vel_sigma**2)]
    return GaussianBelief(x0, np.diag(var))
