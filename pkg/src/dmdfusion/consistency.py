"""Empirical checks of the autoregressive view of a Hankel-DMD fit.

The fitted operator A acts on delay-embedded columns; its top block is the
autoregressive predictor of the newest measurement. Residuals are
e = z_{k+1} - (A z_k)_top on training data, and extrapolation error is
tracked per forecast horizon over a seeded noise ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from .measurements import NoiseSpec, add_noise
from .rng import child_rng
from .surrogate import DmdModel, HankelParams, build_hankel, fit, forecast_many


@dataclass(frozen=True, eq=False)
class ResidualStats:
    mean: np.ndarray
    cov: np.ndarray
    n: int
    horizon_trace: np.ndarray | None = None


def _samples(series):
    z = getattr(series, "samples", series)
    z = np.asarray(z, dtype=float)
    return z[:, None] if z.ndim == 1 else z


def residuals(model: DmdModel, series):
    """One-step residuals of the newest block, one row per Hankel column."""
    z = _samples(series)
    if z.shape[1] != model.p:
        raise ValueError(f"series dimension {z.shape[1]} does not match model p={model.p}")
    X, Xp = build_hankel(z, model.delays)
    pred = model.operator_apply(X)
    return (Xp[: model.p] - pred[: model.p]).T


def residual_stats(res) -> ResidualStats:
    res = np.atleast_2d(np.asarray(res, dtype=float))
    n = res.shape[0]
    if n < 2:
        raise ValueError("need at least two residuals")
    mean = res.mean(axis=0)
    d = res - mean
    return ResidualStats(mean, d.T @ d / (n - 1), n)


def formula_trace(model: DmdModel, train, R):
    """trace(R + [A E(z z^T) A^T]_top) with E(z z^T) the time-averaged embedding moment."""
    z = _samples(train)
    X, _ = build_hankel(z, model.delays)
    AX = model.operator_apply(X)[: model.p]
    return float(np.trace(np.atleast_2d(R)) + np.sum(AX**2) / X.shape[1])


@dataclass(frozen=True, eq=False)
class VarianceGrowth:
    horizons: np.ndarray  # steps past the end of training, 1..H
    empirical_trace: np.ndarray
    formula_trace: np.ndarray
    trace_R: float
    forecast_error_trace: np.ndarray  # model part only (no sensor noise)

    @property
    def spearman(self):
        return float(spearmanr(self.horizons, self.empirical_trace).statistic)


def variance_growth(
    clean,
    noise: NoiseSpec,
    params: HankelParams,
    train_len: int,
    horizon: int,
    n_ensemble=50,
    seed=0,
) -> VarianceGrowth:
    """Extrapolation error covariance trace per horizon over a noise ensemble.

    Each member refits the surrogate on an independently corrupted training
    window and forecasts ``horizon`` steps past it. The error of a forecast
    against a future noisy measurement is (forecast - clean) - v with v
    independent of the fit, so its second moment is the ensemble average of
    |forecast - clean|^2 plus trace(R); the sensor term is added exactly
    instead of being sampled.
    """
    z = _samples(clean)
    if train_len + horizon > z.shape[0]:
        raise ValueError("clean series shorter than training window plus horizon")
    R = noise.effective_R(z[:train_len])
    spec = NoiseSpec(R=R)
    trace_R = float(np.trace(R))
    ks = np.arange(train_len, train_len + horizon)
    sq = np.zeros(horizon)
    formula = 0.0
    for e in range(n_ensemble):
        noisy = add_noise(z[:train_len], spec, child_rng(seed, "variance-growth", e))
        model = fit(noisy, params)
        err = forecast_many(model, ks) - z[ks]
        sq += np.sum(err**2, axis=1)
        formula += formula_trace(model, noisy, R)
    sq /= n_ensemble
    formula /= n_ensemble
    return VarianceGrowth(
        horizons=np.arange(1, horizon + 1),
        empirical_trace=sq + trace_R,
        formula_trace=np.full(horizon, formula),
        trace_R=trace_R,
        forecast_error_trace=sq,
    )


def eigenvalue_stability(clean, noise: NoiseSpec, params: HankelParams, n_ensemble=50, seed=0, n_dominant=2):
    """Ensemble mean and standard error of the dominant eigenvalues under refits.

    Returns (reference, mean, stderr) for the ``n_dominant`` leading
    eigenvalues, matched to the noise-free fit by nearest neighbour.
    """
    z = _samples(clean)
    ref = fit(z, params).eigenvalues[:n_dominant]
    spec = NoiseSpec(R=noise.effective_R(z))
    draws = np.empty((n_ensemble, ref.size), dtype=complex)
    for e in range(n_ensemble):
        lam = fit(add_noise(z, spec, child_rng(seed, "eig-stability", e)), params).eigenvalues
        draws[e] = [lam[np.argmin(np.abs(lam - r))] for r in ref]
    mean = draws.mean(axis=0)
    stderr = (np.std(draws.real, axis=0, ddof=1) + 1j * np.std(draws.imag, axis=0, ddof=1)) / np.sqrt(n_ensemble)
    return ref, mean, stderr
