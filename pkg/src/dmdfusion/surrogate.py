"""Hankel-DMD surrogate for measurement series.

A series z(0..N-1) of p-vectors is delay-embedded into a block-Hankel pair
(X, X'), the best-fit linear operator on the leading singular subspace of X
is eigendecomposed, and forecasts are the real part of the modal expansion
sum_m b_m lambda_m^k psi_m read off the newest block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import RankDeficiencyError, SeriesTooShortError
from .measurements import MeasurementSeries, wrap_2pi


@dataclass(frozen=True)
class FixedRank:
    r: int

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("rank must be at least 1")

    def select(self, s):
        return min(self.r, s.size)


@dataclass(frozen=True)
class EnergyThreshold:
    """Smallest rank whose singular values carry fraction ``eta`` of the energy."""

    eta: float

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError("energy threshold must lie in (0, 1]")

    def select(self, s):
        energy = np.cumsum(s**2)
        if energy[-1] == 0:
            return 1
        frac = energy / energy[-1]
        return int(min(np.searchsorted(frac, self.eta) + 1, s.size))


RankPolicy = Union[FixedRank, EnergyThreshold]

NOISE_FREE_POLICY = EnergyThreshold(1.0 - 1e-10)
NOISY_POLICY = EnergyThreshold(0.9999)


@dataclass(frozen=True)
class HankelParams:
    delays: int
    rank: RankPolicy = NOISE_FREE_POLICY

    def __post_init__(self):
        if self.delays < 2:
            raise ValueError("need at least two delays")


def default_delays(n_samples, p, cap=200):
    """Delay depth giving a roughly square Hankel matrix (p*l ~ N - l), capped."""
    return int(max(2, min(math.ceil(n_samples / (p + 1)), cap)))


@dataclass(frozen=True, eq=False)
class DmdModel:
    eigenvalues: np.ndarray  # (r,) complex
    modes: np.ndarray  # (p*l, r) complex
    amplitudes: np.ndarray  # (r,) complex
    dt: float
    delays: int
    p: int
    train_len: int
    singular_values: np.ndarray | None = None
    basis: np.ndarray | None = None  # retained left singular vectors U_r
    reduced_operator: np.ndarray | None = None  # U_r^T A U_r

    def __post_init__(self):
        r = self.eigenvalues.size
        if self.modes.shape != (self.p * self.delays, r) or self.amplitudes.shape != (r,):
            raise ValueError("inconsistent DMD model dimensions")
        for arr in (self.eigenvalues, self.modes, self.amplitudes):
            arr.setflags(write=False)

    @property
    def rank(self):
        return self.eigenvalues.size

    @property
    def frequencies(self):
        """Continuous-time angular frequencies (rad per time unit)."""
        return np.angle(self.eigenvalues) / self.dt

    @property
    def mode_energy(self):
        """Contribution |b_m| * |psi_m| of each mode to the first snapshot."""
        return np.abs(self.amplitudes) * np.linalg.norm(self.modes, axis=0)

    def dominant_frequency(self):
        return float(abs(self.frequencies[np.argmax(self.mode_energy)]))

    def operator_apply(self, X):
        """Apply the fitted embedded-space operator to the columns of X.

        Uses U_r A_tilde U_r^T when the SVD basis is kept, otherwise the
        spectral form Psi Lambda Psi^+ (e.g. for models loaded from disk).
        """
        if self.basis is not None and self.reduced_operator is not None:
            return self.basis @ (self.reduced_operator @ (self.basis.T @ X))
        coeffs = np.linalg.lstsq(self.modes, X, rcond=None)[0]
        return (self.modes @ (self.eigenvalues[:, None] * coeffs)).real


def _samples(series):
    if isinstance(series, MeasurementSeries):
        return series.samples, series.dt
    arr = np.asarray(series, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr, 1.0


def build_hankel(series, delays):
    """Block-Hankel pair (X, X') with newest sample on top of each column.

    Column j of X is [z(j+l-1); ...; z(j)] and X'[:, j] is the same window
    advanced by one step, so m = N - l columns are available.
    """
    z, _ = _samples(series)
    n, p = z.shape
    if delays < 1:
        raise ValueError("delays must be positive")
    if n < delays + 1:
        raise SeriesTooShortError(f"series of length {n} too short for {delays} delays")
    m = n - delays
    X = np.empty((p * delays, m))
    Xp = np.empty((p * delays, m))
    for b in range(delays):
        lag = delays - 1 - b
        X[b * p : (b + 1) * p] = z[lag : lag + m].T
        Xp[b * p : (b + 1) * p] = z[lag + 1 : lag + 1 + m].T
    return X, Xp


def fit(series, params: HankelParams, dt=None) -> DmdModel:
    """Exact DMD on the Hankel pair of ``series``."""
    z, series_dt = _samples(series)
    dt = series_dt if dt is None else dt
    if not np.all(np.isfinite(z)):
        raise ValueError("series contains non-finite samples")
    n, p = z.shape
    l = params.delays
    if n < l + 2:
        raise SeriesTooShortError(f"need at least {l + 2} samples, got {n}")

    X, Xp = build_hankel(z, l)
    U, s, Vh = np.linalg.svd(X, full_matrices=False)
    r = params.rank.select(s)
    tol = s[0] * max(X.shape) * np.finfo(float).eps
    if s[0] == 0 or s[r - 1] <= tol:
        raise RankDeficiencyError(
            f"retained singular value {s[r - 1]:.3e} is numerically zero (rank {r})"
        )
    Ur, sr, Vr = U[:, :r], s[:r], Vh[:r].conj().T
    XpV = Xp @ (Vr / sr)
    A_tilde = Ur.T @ XpV
    lam, W = np.linalg.eig(A_tilde)
    modes = XpV @ W
    b = np.linalg.lstsq(modes, X[:, 0], rcond=None)[0]

    order = np.lexsort((-np.round(np.angle(lam), 12), -np.round(np.abs(lam), 12)))
    return DmdModel(
        eigenvalues=lam[order],
        modes=modes[:, order],
        amplitudes=b[order],
        dt=dt,
        delays=l,
        p=p,
        train_len=n,
        singular_values=s,
        basis=Ur,
        reduced_operator=A_tilde,
    )


def forecast_many(model: DmdModel, ks):
    """Forecasts at measurement indices ``ks``; returns (len(ks), p).

    Index k refers to the time grid of the training series. Indices before
    the first full window are read from the lower blocks of the first
    reconstructed column, later ones from the newest block.
    """
    ks = np.atleast_1d(np.asarray(ks))
    if np.any(ks < 0):
        raise ValueError("forecast index must be non-negative")
    p, l = model.p, model.delays
    out = np.empty((ks.size, p))
    late = ks >= l - 1
    if np.any(late):
        cols = (ks[late] - (l - 1)).astype(float)
        powers = model.eigenvalues[None, :] ** cols[:, None]
        out[late] = ((powers * model.amplitudes) @ model.modes[:p].T).real
    if np.any(~late):
        first = (model.modes @ model.amplitudes).real
        for i in np.flatnonzero(~late):
            blk = l - 1 - int(ks[i])
            out[i] = first[blk * p : (blk + 1) * p]
    return out


def forecast(model: DmdModel, k):
    return forecast_many(model, [k])[0]


def reconstruction_error(model: DmdModel, series):
    z, _ = _samples(series)
    if z.shape[0] == 0:
        raise ValueError("empty series")
    pred = forecast_many(model, np.arange(z.shape[0]))
    scale = np.max(np.linalg.norm(z, axis=1))
    return float(np.max(np.linalg.norm(pred - z, axis=1)) / scale)


# --- angle lifting ---------------------------------------------------------------


def lift_angles(samples, angle_mask):
    """Replace each angular column by its (cos, sin) pair so the series is continuous."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    cols = []
    for j, is_angle in enumerate(angle_mask):
        if is_angle:
            cols += [np.cos(samples[:, j]), np.sin(samples[:, j])]
        else:
            cols.append(samples[:, j])
    return np.stack(cols, axis=1)


def unlift_angles(lifted, angle_mask):
    lifted = np.atleast_2d(np.asarray(lifted, dtype=float))
    cols = []
    j = 0
    for is_angle in angle_mask:
        if is_angle:
            cols.append(wrap_2pi(np.arctan2(lifted[:, j + 1], lifted[:, j])))
            j += 2
        else:
            cols.append(lifted[:, j])
            j += 1
    return np.stack(cols, axis=1)


# --- text export -------------------------------------------------------------------


def _cplx_text(v):
    return f"{float(v.real)!r} {float(v.imag)!r}"


def save_model(model: DmdModel, path):
    path = Path(path)
    lines = [
        "# hankel-dmd surrogate",
        "[meta]",
        f"dt = {float(model.dt)!r}",
        f"delays = {model.delays}",
        f"p = {model.p}",
        f"rank = {model.rank}",
        f"train_len = {model.train_len}",
        "[eigenvalues]",
    ]
    lines += [_cplx_text(v) for v in model.eigenvalues]
    lines.append("[amplitudes]")
    lines += [_cplx_text(v) for v in model.amplitudes]
    lines.append("[modes]")
    for row in model.modes:
        lines.append(" ".join(_cplx_text(v) for v in row))
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(path)


def load_model(path) -> DmdModel:
    section = None
    meta: dict[str, str] = {}
    rows: dict[str, list[list[float]]] = {"eigenvalues": [], "amplitudes": [], "modes": []}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            section = line.strip("[]")
            continue
        if section == "meta":
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
        else:
            rows[section].append([float(v) for v in line.split()])

    def cplx(values):
        a = np.asarray(values, dtype=float)
        return a[..., 0::2] + 1j * a[..., 1::2]

    r = int(meta["rank"])
    return DmdModel(
        eigenvalues=cplx(rows["eigenvalues"]).reshape(r),
        modes=cplx(rows["modes"]).reshape(-1, r),
        amplitudes=cplx(rows["amplitudes"]).reshape(r),
        dt=float(meta["dt"]),
        delays=int(meta["delays"]),
        p=int(meta["p"]),
        train_len=int(meta["train_len"]),
    )
