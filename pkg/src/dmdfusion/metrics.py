"""Normalized trajectory error and covariance containment."""

from __future__ import annotations

import numpy as np

from .errors import InvalidStateError


def _split(n, split):
    return n // 2 if split is None else split


def error_terms(truth_states, est_states, split=None, velocity=True, normalizer=None):
    """Per-step normalized position and velocity error terms.

    ``normalizer`` is the (max position norm, max velocity norm) pair; by
    default it is taken over ``truth_states``.
    """
    truth_states = np.asarray(truth_states, dtype=float)
    est_states = np.asarray(est_states, dtype=float)
    if truth_states.shape != est_states.shape:
        raise ValueError(f"shape mismatch {truth_states.shape} vs {est_states.shape}")
    s = _split(truth_states.shape[1], split)
    if normalizer is None:
        normalizer = trajectory_normalizer(truth_states, split)
    pos_max, vel_max = normalizer
    if pos_max == 0 or (velocity and vel_max == 0):
        raise InvalidStateError("degenerate trajectory: zero normalizer")
    pos = np.linalg.norm(est_states[:, :s] - truth_states[:, :s], axis=1) / pos_max
    if not velocity:
        return pos
    vel = np.linalg.norm(est_states[:, s:] - truth_states[:, s:], axis=1) / vel_max
    return pos + vel


def trajectory_normalizer(truth_states, split=None):
    truth_states = np.asarray(truth_states, dtype=float)
    s = _split(truth_states.shape[1], split)
    pos_max = float(np.max(np.linalg.norm(truth_states[:, :s], axis=1)))
    vel_max = float(np.max(np.linalg.norm(truth_states[:, s:], axis=1))) if s < truth_states.shape[1] else 0.0
    return pos_max, vel_max


def normalized_error(truth, est, k0, k, offset=0, split=None, velocity=True):
    """Window-averaged normalized 2-norm error.

    eps = 1/(k - k0) * sum_{i=k0..k} (|dpos_i| / max|pos| + |dvel_i| / max|vel|)

    ``truth`` is a Trajectory or (N, n) array over the full horizon and sets the
    normalizers. ``est[j]`` is the estimate at truth index ``offset + j``;
    ``k0`` and ``k`` are truth indices (inclusive).
    """
    states = getattr(truth, "states", truth)
    states = np.asarray(states, dtype=float)
    est = np.asarray(est, dtype=float)
    if not k > k0:
        raise ValueError("need k > k0")
    if k0 < offset or k >= offset + est.shape[0] or k >= states.shape[0]:
        raise IndexError("summation window outside the available estimates")
    norm = trajectory_normalizer(states, split)
    terms = error_terms(
        states[k0 : k + 1], est[k0 - offset : k - offset + 1], split, velocity, normalizer=norm
    )
    return float(np.sum(terms) / (k - k0))


def cumulative_error(terms):
    """Running version of the windowed metric: c_i = sum_{j<=i} t_j / i, c_0 = t_0."""
    terms = np.asarray(terms, dtype=float)
    denom = np.maximum(np.arange(terms.size), 1)
    return np.cumsum(terms) / denom


def sigma_containment(truth_states, means, covs, n_sigma=3.0):
    """Fraction of steps with |est_i - truth_i| <= n_sigma * sqrt(P_ii), per component."""
    truth_states = np.asarray(truth_states, dtype=float)
    err = np.abs(np.asarray(means, dtype=float) - truth_states)
    sig = np.sqrt(np.clip(np.diagonal(np.asarray(covs, dtype=float), axis1=1, axis2=2), 0, None))
    return np.mean(err <= n_sigma * sig, axis=0)
