"""Extended Kalman filter fusing placeholder dynamics with measurements.

The measurement stream is either the real sensor series or the forecasts of
a fitted surrogate; the filter itself does not care which.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import DynamicsModel, Trajectory, jacobian, rk4_step
from .errors import FilterDivergenceError, NumericalError
from .iod import GaussianBelief
from .measurements import MeasurementModel
from .surrogate import DmdModel, forecast_many


@dataclass(frozen=True, eq=False)
class FilterConfig:
    Q: np.ndarray
    R: np.ndarray
    joseph: bool = True
    divergence_factor: float = 1e6

    def __post_init__(self):
        for name in ("Q", "R"):
            M = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if not np.allclose(M, M.T) or np.linalg.eigvalsh(M).min() < -1e-12 * max(1.0, np.abs(M).max()):
                raise ValueError(f"{name} must be symmetric positive semi-definite")
            object.__setattr__(self, name, M)


@dataclass(eq=False)
class FilterTrace:
    """Per-step record. Row 0 is the initial belief; no update happens there."""

    prior_mean: np.ndarray
    prior_cov: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    innovation: np.ndarray
    innovation_cov: np.ndarray
    gain_norm: np.ndarray
    times: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self):
        return self.mean.shape[0]


def predict(belief: GaussianBelief, model: DynamicsModel, Q, dt) -> GaussianBelief:
    mean = rk4_step(model, belief.mean, dt)
    F = jacobian(model, belief.mean, dt)
    P = F @ belief.cov @ F.T + Q
    return GaussianBelief._trusted(mean, 0.5 * (P + P.T))


def _update(belief: GaussianBelief, z, meas: MeasurementModel, R, t=0.0, joseph=True):
    x = belief.mean
    P = belief.cov
    H = meas.jacobian(x, t)
    innov = meas.residual(z, meas.h(x, t))
    S = H @ P @ H.T + R
    S = 0.5 * (S + S.T)
    w = np.linalg.eigvalsh(S)
    cond = w[-1] / w[0] if w[0] > 0 else np.inf
    if not np.isfinite(cond) or cond > 1e14:
        raise NumericalError(f"innovation covariance is singular (cond {cond:.3e})", cond)
    K = np.linalg.solve(S, H @ P).T
    mean = x + K @ innov
    I_KH = np.eye(x.size) - K @ H
    if joseph:
        P_post = I_KH @ P @ I_KH.T + K @ R @ K.T
    else:
        P_post = I_KH @ P
    P_post = 0.5 * (P_post + P_post.T)
    return GaussianBelief._trusted(mean, P_post), innov, S, K


def update(belief: GaussianBelief, z, meas: MeasurementModel, R, t=0.0, joseph=True):
    """Measurement update; returns (posterior, innovation)."""
    post, innov, _, _ = _update(belief, z, meas, np.atleast_2d(R), t, joseph)
    return post, innov


# --- measurement sources ------------------------------------------------------


class RealSource:
    """Measurements collected by the sensor, row i aligned with filter step i."""

    def __init__(self, samples):
        self.samples = np.atleast_2d(np.asarray(samples, dtype=float))

    def __call__(self, steps):
        steps = np.asarray(steps)
        if steps.size and steps.max() >= self.samples.shape[0]:
            raise ValueError(f"measurement series of length {self.samples.shape[0]} does not cover step {steps.max()}")
        return self.samples[steps]


class SurrogateSource:
    """Surrogate forecasts; filter step i maps to training index ``offset + i``.

    ``decode`` maps the surrogate's output space back to measurement space
    (used when angles were lifted to cos/sin pairs for training).
    """

    def __init__(self, model: DmdModel, offset: int, decode: Callable | None = None):
        self.model = model
        self.offset = offset
        self.decode = decode

    def __call__(self, steps):
        out = forecast_many(self.model, np.asarray(steps) + self.offset)
        return out if self.decode is None else self.decode(out)


def run_filter(
    belief0: GaussianBelief,
    truth: Trajectory,
    placeholder: DynamicsModel,
    meas: MeasurementModel,
    source,
    cfg: FilterConfig,
) -> FilterTrace:
    """Alternate predict/update over the time grid of ``truth``.

    ``truth`` only fixes the grid (t0, dt, length); row i of the returned trace
    is the estimate at ``truth.times[i]``.
    """
    n_rows = len(truth)
    n = belief0.dim
    p = meas.p
    times = truth.times
    z_all = np.atleast_2d(source(np.arange(n_rows)))
    if z_all.shape != (n_rows, p):
        raise ValueError(f"measurement source returned shape {z_all.shape}, expected {(n_rows, p)}")

    prior_mean = np.empty((n_rows, n))
    prior_cov = np.empty((n_rows, n, n))
    mean = np.empty((n_rows, n))
    cov = np.empty((n_rows, n, n))
    innovation = np.full((n_rows, p), np.nan)
    innovation_cov = np.full((n_rows, p, p), np.nan)
    gain = np.full(n_rows, np.nan)

    prior_mean[0] = mean[0] = belief0.mean
    prior_cov[0] = cov[0] = belief0.cov
    limit = cfg.divergence_factor * max(np.linalg.norm(belief0.mean), 1e-300)
    belief = belief0
    for k in range(1, n_rows):
        prior = predict(belief, placeholder, cfg.Q, truth.dt)
        belief, innov, S, K = _update(prior, z_all[k], meas, cfg.R, times[k], cfg.joseph)
        if not np.all(np.isfinite(belief.mean)) or np.linalg.norm(belief.mean) > limit:
            raise FilterDivergenceError("posterior mean diverged", k)
        prior_mean[k], prior_cov[k] = prior.mean, prior.cov
        mean[k], cov[k] = belief.mean, belief.cov
        innovation[k], innovation_cov[k] = innov, S
        gain[k] = np.linalg.norm(K)
    return FilterTrace(prior_mean, prior_cov, mean, cov, innovation, innovation_cov, gain, times)
