"""Continuous-time models, a fixed-step RK4 integrator and orbit utilities.

Every derivative function accepts either a single state of shape ``(n,)`` or
a batch of shape ``(..., n)`` and works component-wise along the last axis,
so the same code path drives single trajectories, finite-difference Jacobians
and particle ensembles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .errors import (
    ImpactError,
    IntegrationOverflowError,
    InvalidStateError,
    SingularityError,
    UnsupportedOrbitError,
)

MU_EARTH = 398600.4418  # km^3/s^2
R_EARTH = 6378.1363  # km
J2_EARTH = 1.08262668e-3
OMEGA_EARTH = 7.292115e-5  # rad/s
EARTH_MOON_MASS_RATIO = 0.012150585


# --- models -----------------------------------------------------------------


@dataclass(frozen=True)
class Pendulum:
    """Damped simple pendulum, state (theta, theta_dot)."""

    m: float = 0.5
    c: float = 0.0
    L: float = 1.0
    g: float = 9.81

    dim = 2

    def __post_init__(self):
        if not (self.m > 0 and self.L > 0 and self.g > 0 and self.c >= 0):
            raise ValueError(f"invalid pendulum parameters {self}")

    def deriv(self, x, check=True):
        return pendulum_deriv(x, self, check=check)


@dataclass(frozen=True)
class VanDerPol:
    mu: float = 2.0

    dim = 2

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("Van der Pol damping parameter must be positive")

    def deriv(self, x, check=True):
        return vdp_deriv(x, self.mu, check=check)


@dataclass(frozen=True)
class DragParams:
    """Cannonball drag over an exponential atmosphere.

    ``ballistic`` is C_D*A/m in m^2/kg, densities in kg/m^3, heights in km.
    """

    rho0: float = 3.614e-13
    h0: float = 700.0
    scale_height: float = 88.667
    ballistic: float = 0.02
    earth_rate: float = OMEGA_EARTH


@dataclass(frozen=True)
class TwoBody:
    """Point-mass gravity with optional J2 and drag; km, km/s."""

    mu: float = MU_EARTH
    j2: bool = False
    drag: DragParams | None = None
    body_radius: float = R_EARTH
    j2_coeff: float = J2_EARTH

    dim = 6

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("gravitational parameter must be positive")

    def deriv(self, x, check=True):
        return twobody_deriv(x, self, check=check)


@dataclass(frozen=True)
class Cr3bp:
    """Circular restricted three-body problem in the nondimensional rotating frame."""

    mass_ratio: float = EARTH_MOON_MASS_RATIO

    dim = 6

    def __post_init__(self):
        if not 0 < self.mass_ratio < 1:
            raise ValueError("mass ratio must lie in (0, 1)")

    def deriv(self, x, check=True):
        return cr3bp_deriv(x, self.mass_ratio, check=check)


@dataclass(frozen=True)
class LinearSystem:
    """x_dot = A x. With A = 0 this is the zero-dynamics model."""

    A: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def dim(self):
        return self.A.shape[0]

    def deriv(self, x, check=True):
        x = _as_state(x, self.dim, check)
        return x @ self.A.T


DynamicsModel = Union[Pendulum, VanDerPol, TwoBody, Cr3bp, LinearSystem]


@dataclass(frozen=True)
class OrbitalElements:
    """Classical elements; a in km, angles in degrees."""

    a: float
    e: float
    i: float
    raan: float
    argp: float
    true_anomaly: float

    def __post_init__(self):
        if not self.a > 0:
            raise UnsupportedOrbitError("semi-major axis must be positive")
        if not 0 <= self.e < 1:
            raise UnsupportedOrbitError(f"eccentricity {self.e} outside [0, 1)")
        if not 0 <= self.i <= 180:
            raise UnsupportedOrbitError(f"inclination {self.i} outside [0, 180]")


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    t0: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if np.ndim(self.states) != 2:
            raise ValueError("states must be a 2-D array (steps, dim)")

    def __len__(self):
        return self.states.shape[0]

    @property
    def dim(self):
        return self.states.shape[1]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(len(self))

    def segment(self, start, stop=None):
        """Sub-trajectory with the time origin shifted to ``start``."""
        stop = len(self) if stop is None else stop
        return Trajectory(self.states[start:stop], self.t0 + start * self.dt, self.dt)


# --- derivatives ------------------------------------------------------------


def _as_state(x, n, check=True):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (n,):
        raise InvalidStateError(f"expected state dimension {n}, got shape {x.shape}")
    if check and not np.isfinite(x).all():
        raise InvalidStateError("state contains non-finite values")
    return x


def pendulum_deriv(x, params: Pendulum, check=True):
    x = _as_state(x, 2, check)
    out = np.empty_like(x)
    out[..., 0] = x[..., 1]
    out[..., 1] = -(params.g / params.L) * np.sin(x[..., 0])
    if params.c != 0.0:
        out[..., 1] -= (params.c / params.m) * x[..., 1]
    return out


def vdp_deriv(x, mu, check=True):
    x = _as_state(x, 2, check)
    x1, x2 = x[..., 0], x[..., 1]
    out = np.empty_like(x)
    out[..., 0] = x2
    out[..., 1] = mu * (1.0 - x1 * x1) * x2 - x1
    return out


def _norm3(v):
    # explicit sum keeps results identical between single states and batches
    return np.sqrt(v[..., 0] * v[..., 0] + v[..., 1] * v[..., 1] + v[..., 2] * v[..., 2])


def twobody_deriv(x, model: TwoBody, check=True):
    x = _as_state(x, 6, check)
    r = x[..., :3]
    v = x[..., 3:]
    rn = _norm3(r)
    if check:
        if np.any(rn == 0.0):
            raise SingularityError("two-body dynamics evaluated at the origin")
        if model.body_radius > 0 and np.any(rn < model.body_radius):
            raise ImpactError(f"radius {np.min(rn):.3f} km below body radius")
    rn3 = rn * rn * rn
    acc = -model.mu * r / rn3[..., None]

    if model.j2:
        z2 = (r[..., 2] * r[..., 2]) / (rn * rn)
        k = -1.5 * model.j2_coeff * model.mu * model.body_radius**2 / (rn3 * rn * rn)
        acc = acc + np.stack(
            [
                k * r[..., 0] * (1.0 - 5.0 * z2),
                k * r[..., 1] * (1.0 - 5.0 * z2),
                k * r[..., 2] * (3.0 - 5.0 * z2),
            ],
            axis=-1,
        )

    if model.drag is not None:
        d = model.drag
        w = d.earth_rate
        v_rel = np.stack([v[..., 0] + w * r[..., 1], v[..., 1] - w * r[..., 0], v[..., 2]], axis=-1)
        h = rn - model.body_radius
        rho = d.rho0 * np.exp(-(h - d.h0) / d.scale_height)
        # rho*B is in 1/m; factor 1e3 converts to 1/km
        coeff = -0.5e3 * rho * d.ballistic * _norm3(v_rel)
        acc = acc + coeff[..., None] * v_rel

    return np.concatenate([v, acc], axis=-1)


def cr3bp_deriv(x, mass_ratio, check=True):
    x = _as_state(x, 6, check)
    mu = mass_ratio
    px, py, pz = x[..., 0], x[..., 1], x[..., 2]
    vx, vy, vz = x[..., 3], x[..., 4], x[..., 5]
    d1 = px + mu
    d2 = px - 1.0 + mu
    r1 = np.sqrt(d1 * d1 + py * py + pz * pz)
    r2 = np.sqrt(d2 * d2 + py * py + pz * pz)
    if check and (np.any(r1 == 0.0) or np.any(r2 == 0.0)):
        raise SingularityError("CR3BP state coincides with a primary")
    k1 = (1.0 - mu) / (r1 * r1 * r1)
    k2 = mu / (r2 * r2 * r2)
    ax = 2.0 * vy + px - k1 * d1 - k2 * d2
    ay = -2.0 * vx + py - k1 * py - k2 * py
    az = -k1 * pz - k2 * pz
    return np.stack([vx, vy, vz, ax, ay, az], axis=-1)


# --- integration ------------------------------------------------------------


def rk4_step(model: DynamicsModel, x, dt, check=True, step=None):
    """One classical Runge-Kutta step of size ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = _as_state(x, model.dim, check)
    k1 = model.deriv(x, check=check)
    k2 = model.deriv(x + 0.5 * dt * k1, check=check)
    k3 = model.deriv(x + 0.5 * dt * k2, check=check)
    k4 = model.deriv(x + dt * k3, check=check)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if check and not np.all(np.isfinite(out)):
        raise IntegrationOverflowError("RK4 step produced non-finite state", step)
    return out


def propagate(model: DynamicsModel, x0, dt, n_steps, t0=0.0) -> Trajectory:
    """Integrate ``n_steps`` fixed RK4 steps; returns ``n_steps + 1`` states."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    x = _as_state(x0, model.dim)
    out = np.empty((n_steps + 1, model.dim))
    out[0] = x
    for k in range(n_steps):
        try:
            x = rk4_step(model, x, dt, step=k)
        except SingularityError as exc:
            raise type(exc)(str(exc), step=k) from exc
        except InvalidStateError as exc:
            raise IntegrationOverflowError(str(exc), step=k) from exc
        out[k + 1] = x
    return Trajectory(out, t0, dt)


def jacobian(model: DynamicsModel, x, dt, rel_step=1e-5):
    """Central-difference Jacobian of the discrete map x -> rk4_step(x, dt)."""
    x = _as_state(x, model.dim)
    n = x.size
    h = rel_step * np.maximum(np.abs(x), 1.0)
    pert = np.concatenate([x + np.diag(h), x - np.diag(h)])
    f = rk4_step(model, pert, dt)
    return (f[:n] - f[n:]).T / (2.0 * h)


# --- orbit utilities ----------------------------------------------------------


def orbital_period(a, mu=MU_EARTH):
    return 2.0 * math.pi * math.sqrt(a**3 / mu)


def elements_to_cartesian(el: OrbitalElements, mu=MU_EARTH):
    if not 0 <= el.e < 1:
        raise UnsupportedOrbitError("only elliptic orbits are supported")
    i, raan, argp, f = np.radians([el.i, el.raan, el.argp, el.true_anomaly])
    p = el.a * (1.0 - el.e**2)
    r = p / (1.0 + el.e * math.cos(f))
    r_pf = np.array([r * math.cos(f), r * math.sin(f), 0.0])
    v_pf = math.sqrt(mu / p) * np.array([-math.sin(f), el.e + math.cos(f), 0.0])

    cO, sO = math.cos(raan), math.sin(raan)
    ci, si = math.cos(i), math.sin(i)
    cw, sw = math.cos(argp), math.sin(argp)
    rot = np.array(
        [
            [cO * cw - sO * sw * ci, -cO * sw - sO * cw * ci, sO * si],
            [sO * cw + cO * sw * ci, -sO * sw + cO * cw * ci, -cO * si],
            [sw * si, cw * si, ci],
        ]
    )
    return np.concatenate([rot @ r_pf, rot @ v_pf])


def cartesian_to_elements(x, mu=MU_EARTH) -> OrbitalElements:
    """Inverse of :func:`elements_to_cartesian`.

    Degenerate cases follow the usual conventions: for equatorial orbits the
    node is set to zero, for circular orbits the argument of periapsis is.
    """
    x = _as_state(x, 6)
    r, v = x[:3], x[3:]
    rn = np.linalg.norm(r)
    vn2 = v @ v
    h = np.cross(r, v)
    hn = np.linalg.norm(h)
    e_vec = np.cross(v, h) / mu - r / rn
    e = np.linalg.norm(e_vec)
    energy = 0.5 * vn2 - mu / rn
    if energy >= 0 or e >= 1:
        raise UnsupportedOrbitError("state is not on an elliptic orbit")
    a = -mu / (2.0 * energy)
    inc = math.acos(np.clip(h[2] / hn, -1.0, 1.0))
    node = np.array([-h[1], h[0], 0.0])
    nn = np.linalg.norm(node)
    tiny = 1e-11

    raan = math.atan2(node[1], node[0]) if nn > tiny * hn else 0.0
    node_dir = np.array([math.cos(raan), math.sin(raan), 0.0])
    # in-plane axis 90 deg ahead of the node
    q_dir = np.cross(h / hn, node_dir)

    if e > tiny:
        argp = math.atan2(e_vec @ q_dir, e_vec @ node_dir)
        p_dir = e_vec / e
        w_dir = np.cross(h / hn, p_dir)
        f = math.atan2(r @ w_dir, r @ p_dir)
    else:
        argp = 0.0
        f = math.atan2(r @ q_dir, r @ node_dir)

    wrap = lambda ang: math.degrees(ang) % 360.0  # noqa: E731
    return OrbitalElements(a, e, math.degrees(inc), wrap(raan), wrap(argp), wrap(f))


def specific_energy(x, mu=MU_EARTH):
    x = np.asarray(x, dtype=float)
    return 0.5 * np.sum(x[..., 3:] ** 2, axis=-1) - mu / np.linalg.norm(x[..., :3], axis=-1)


def angular_momentum(x):
    x = np.asarray(x, dtype=float)
    return np.cross(x[..., :3], x[..., 3:])


def pendulum_energy(x, params: Pendulum):
    """Mechanical energy per unit m*L^2."""
    x = np.asarray(x, dtype=float)
    return 0.5 * x[..., 1] ** 2 + (params.g / params.L) * (1.0 - np.cos(x[..., 0]))


def jacobi_constant(x, mass_ratio=EARTH_MOON_MASS_RATIO):
    x = np.asarray(x, dtype=float)
    mu = mass_ratio
    px, py, pz = x[..., 0], x[..., 1], x[..., 2]
    r1 = np.sqrt((px + mu) ** 2 + py**2 + pz**2)
    r2 = np.sqrt((px - 1 + mu) ** 2 + py**2 + pz**2)
    v2 = np.sum(x[..., 3:] ** 2, axis=-1)
    return px**2 + py**2 + 2 * (1 - mu) / r1 + 2 * mu / r2 - v2


def lagrange_l1(mass_ratio=EARTH_MOON_MASS_RATIO):
    """x-coordinate of L1 (between the primaries) in the rotating frame."""
    mu = mass_ratio

    def fx(x):
        return x - (1 - mu) / (x + mu) ** 2 + mu / (x - 1 + mu) ** 2

    return brentq(fx, -mu + 1e-6, 1 - mu - 1e-6, xtol=1e-15, rtol=1e-15)


def xz_plane_return_time(model: DynamicsModel, x0, dt, max_time, direction=1):
    """Time of the first crossing of y = 0 in ``direction`` after leaving x0.

    Used to recover the period of symmetric periodic orbits (halo, Lyapunov)
    started on the xz-plane. The crossing is bracketed with fixed steps and
    refined by bisection on a partial RK4 step.
    """
    x = np.asarray(x0, dtype=float)
    t = 0.0
    n_max = int(math.ceil(max_time / dt))
    for k in range(n_max):
        x_next = rk4_step(model, x, dt, step=k)
        crossed = (x[1] * direction < 0) and (x_next[1] * direction >= 0)
        if crossed and k > 0:
            lo, hi = 0.0, dt
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if rk4_step(model, x, mid)[1] * direction < 0:
                    lo = mid
                else:
                    hi = mid
            return t + 0.5 * (lo + hi)
        x = x_next
        t += dt
    raise ValueError("no plane crossing found within max_time")
