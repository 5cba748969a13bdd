"""Placeholder-only forecasting by Monte Carlo propagation of the initial belief."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import DynamicsModel, rk4_step
from .iod import GaussianBelief
from .rng import child_rng

DEFAULT_PARTICLES = 200


@dataclass(eq=False)
class EnsembleTrace:
    mean: np.ndarray  # (N+1, n)
    cov: np.ndarray  # (N+1, n, n), unbiased
    n_active: np.ndarray  # (N+1,)
    n_excluded: int

    def __len__(self):
        return self.mean.shape[0]

    @property
    def stderr(self):
        """Monte Carlo standard error of the ensemble mean."""
        var = np.diagonal(self.cov, axis1=1, axis2=2)
        return np.sqrt(var / self.n_active[:, None])


def draw_particles(belief: GaussianBelief, n_particles, seed):
    """One independent stream per particle, so draws do not depend on chunking."""
    w, V = np.linalg.eigh(belief.cov)
    L = V * np.sqrt(np.clip(w, 0, None))
    eps = np.stack([child_rng(seed, "mc-particle", i).standard_normal(belief.dim) for i in range(n_particles)])
    return belief.mean + eps @ L.T


def _propagate_chunk(model, x0, dt, n_steps, factor):
    out = np.empty((n_steps + 1,) + x0.shape)
    alive = np.ones(x0.shape[0], dtype=bool)
    death = np.full(x0.shape[0], n_steps + 1)
    limit = factor * np.maximum(np.linalg.norm(x0, axis=1), 1e-300)
    x = x0.copy()
    out[0] = x
    with np.errstate(all="ignore"):
        for k in range(n_steps):
            nxt = rk4_step(model, x, dt, check=False)
            bad = ~np.all(np.isfinite(nxt), axis=1) | (np.linalg.norm(nxt, axis=1) > limit)
            newly = bad & alive
            if np.any(newly):
                alive &= ~newly
                death[newly] = k + 1
            # dead particles keep their last finite state and are masked out below
            nxt[~alive] = x[~alive]
            x = nxt
            out[k + 1] = x
    return out, death


def monte_carlo_propagate(
    belief: GaussianBelief,
    model: DynamicsModel,
    n_particles=DEFAULT_PARTICLES,
    dt=1.0,
    n_steps=1,
    seed=0,
    workers=1,
    divergence_factor=1e6,
) -> EnsembleTrace:
    """Propagate ``n_particles`` draws and reduce to per-step mean and covariance.

    Particles excluded for divergence (non-finite or norm beyond
    ``divergence_factor`` times their initial norm) are dropped from every step
    after the one where they diverged.
    """
    if n_particles < 2:
        raise ValueError("need at least two particles")
    x0 = draw_particles(belief, n_particles, seed)
    bounds = np.linspace(0, n_particles, max(1, int(workers)) + 1).astype(int)
    chunks = [x0[a:b] for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if len(chunks) == 1:
        results = [_propagate_chunk(model, chunks[0], dt, n_steps, divergence_factor)]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            results = list(pool.map(lambda c: _propagate_chunk(model, c, dt, n_steps, divergence_factor), chunks))
    states = np.concatenate([r[0] for r in results], axis=1)  # (N+1, particles, n)

    death = np.concatenate([r[1] for r in results])

    n = belief.dim
    mean = np.empty((n_steps + 1, n))
    cov = np.empty((n_steps + 1, n, n))
    n_active = np.empty(n_steps + 1, dtype=int)
    for k in range(n_steps + 1):
        active = states[k, death > k]
        n_active[k] = active.shape[0]
        if n_active[k] < 2:
            # too few survivors for an unbiased estimate
            mean[k] = active[0] if n_active[k] else np.nan
            cov[k] = np.nan
            continue
        mean[k] = active.mean(axis=0)
        d = active - mean[k]
        cov[k] = d.T @ d / (active.shape[0] - 1)
    return EnsembleTrace(mean, cov, n_active, int(np.sum(death <= n_steps)))
