"""Scenario pipeline: truth, measurements, surrogate, IOD, three forecasting modes, metrics."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..baseline import EnsembleTrace, monte_carlo_propagate
from ..consistency import ResidualStats, formula_trace, residual_stats, residuals
from ..dynamics import OrbitalElements, Trajectory, VanDerPol, elements_to_cartesian, propagate, rk4_step
from ..errors import DmdFusionError, StageError
from ..fusion import FilterConfig, FilterTrace, RealSource, SurrogateSource, run_filter
from ..iod import GaussianBelief, finite_difference_velocity, herrick_gibbs, initial_belief, rae_to_position
from ..measurements import MeasurementKind, MeasurementModel, MeasurementSeries, NoiseSpec, add_noise, wrap_2pi
from ..metrics import error_terms, sigma_containment, trajectory_normalizer
from ..rng import child_rng
from ..surrogate import DmdModel, HankelParams, default_delays, fit, forecast_many, lift_angles, unlift_angles
from .config import IodMethod, IodSource, ScenarioConfig

log = logging.getLogger(__name__)

MODES = ("placeholder", "dmd_ekf", "hypothetical_ekf")


@dataclass(eq=False)
class ModeTrace:
    """Estimates of one forecasting mode over the forecast window."""

    mean: np.ndarray
    cov: np.ndarray
    innovation_norm: np.ndarray


@dataclass(eq=False)
class ConsistencyReport:
    residuals: ResidualStats
    horizon_error_trace: np.ndarray  # |forecast - clean|^2 + trace(R), per forecast step
    formula_trace: float
    trace_R: float


@dataclass(eq=False)
class ScenarioResult:
    config: ScenarioConfig
    truth: Trajectory
    clean: MeasurementSeries
    noisy: MeasurementSeries
    surrogate: DmdModel
    initial_belief: GaussianBelief
    traces: dict[str, ModeTrace]
    errors: dict[str, float]
    instantaneous: dict[str, np.ndarray]
    containment: dict[str, np.ndarray]
    consistency: ConsistencyReport
    raw: dict = field(default_factory=dict)

    @property
    def window(self):
        """Truth indices of the forecast window, inclusive."""
        T = self.config.train_steps
        return T, T + self.config.forecast_steps


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, (DmdFusionError, ValueError, ArithmeticError, np.linalg.LinAlgError)):
            raise StageError(self.name, exc) from exc
        return False


def measurement_model(cfg: ScenarioConfig) -> MeasurementModel:
    return MeasurementModel(cfg.meas_kind, cfg.dim, cfg.station)


def initial_state(cfg: ScenarioConfig):
    if isinstance(cfg.initial, OrbitalElements):
        mu = getattr(cfg.truth_model, "mu")
        x0 = elements_to_cartesian(cfg.initial, mu)
    else:
        x0 = np.asarray(cfg.initial, dtype=float)
    if cfg.warmup_time > 0:
        n = int(round(cfg.warmup_time / cfg.dt))
        x0 = propagate(cfg.truth_model, x0, cfg.dt, n).states[-1]
    return x0


def generate_truth(cfg: ScenarioConfig) -> Trajectory:
    return propagate(cfg.truth_model, initial_state(cfg), cfg.dt, cfg.train_steps + cfg.forecast_steps)


def synthesize_measurements(cfg: ScenarioConfig, truth: Trajectory):
    meas = measurement_model(cfg)
    clean = meas.series(truth.states, truth.times, cfg.dt)
    if cfg.noise is None:
        return clean, clean, np.zeros((meas.p, meas.p))
    # the noise scale is fixed by the training window the sensor has seen
    R = cfg.noise.effective_R(clean.samples[: cfg.train_steps + 1])
    noisy = add_noise(clean.samples, NoiseSpec(R=R), child_rng(cfg.seed, "sensor-noise"))
    return clean, MeasurementSeries(noisy, cfg.dt, clean.kind, clean.t0), R


class SurrogateEncoding:
    """Invertible map from measurement space to the space the surrogate is trained in.

    ``angles`` lifts each angular channel to a (cos, sin) pair. ``topocentric``
    turns (range, azimuth, elevation) into the station-frame vector (S, E, Z)
    plus a scaled squared range; both are sums of sinusoids for a periodic
    orbit seen from a rotating station, which the angle form is not.
    """

    def __init__(self, meas: MeasurementModel, kind: str = "angles", range_scale: float = 1.0):
        self.meas = meas
        self.kind = kind if meas.angle_mask.any() else "identity"
        self.range_scale = range_scale

    @classmethod
    def for_training(cls, meas, kind, train):
        if kind == "topocentric" and meas.kind is MeasurementKind.RANGE_AZ_EL:
            return cls(meas, kind, float(np.sqrt(np.mean(train[:, 0] ** 2))))
        return cls(meas, "angles")

    def encode(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if self.kind == "identity":
            return z
        if self.kind == "angles":
            return lift_angles(z, self.meas.angle_mask)
        rho, az, el = z.T
        ce = np.cos(el)
        return np.stack(
            [-rho * ce * np.cos(az), rho * ce * np.sin(az), rho * np.sin(el), rho**2 / self.range_scale], axis=1
        )

    def decode(self, c):
        c = np.atleast_2d(np.asarray(c, dtype=float))
        if self.kind == "angles":
            return unlift_angles(c, self.meas.angle_mask)
        s, e, up, q = c.T
        rho = np.sqrt(np.clip(q * self.range_scale, 0.0, None))
        az = wrap_2pi(np.arctan2(e, -s))
        el = np.arcsin(np.clip(up / np.sqrt(s * s + e * e + up * up), -1.0, 1.0))
        return np.stack([rho, az, el], axis=1)

    @property
    def decoder(self):
        return None if self.kind == "identity" else self.decode

    def covariance(self, R, reference):
        """Sensor covariance carried into the encoded space, averaged over ``reference``."""
        if self.kind == "identity":
            return R
        reference = np.atleast_2d(reference)
        p = reference.shape[1]
        out = 0.0
        for zk in reference[:: max(1, reference.shape[0] // 200)]:
            J = np.empty((self.encode(zk).shape[1], p))
            for j in range(p):
                h = 1e-6 * max(abs(zk[j]), 1.0)
                dz = np.zeros(p)
                dz[j] = h
                J[:, j] = (self.encode(zk + dz)[0] - self.encode(zk - dz)[0]) / (2 * h)
            out = out + J @ R @ J.T
        n = len(reference[:: max(1, reference.shape[0] // 200)])
        return out / n


def fit_surrogate(cfg: ScenarioConfig, samples):
    n = cfg.train_steps + 1
    delays = cfg.delays or default_delays(n, samples.shape[1])
    return fit(samples[:n], HankelParams(delays, cfg.rank), dt=cfg.dt)


def determine_initial_belief(cfg, meas, truth, noisy, model, encoding) -> GaussianBelief:
    """Belief at the first forecast epoch from the last three training epochs."""
    T = cfg.train_steps
    ks = np.array([T - 2, T - 1, T])
    if cfg.iod_method is IodMethod.EXACT:
        return initial_belief(truth.states[T], cfg.pos_sigma, cfg.vel_sigma)
    if cfg.iod_source is IodSource.SURROGATE:
        z = encoding.decode(forecast_many(model, ks)) if encoding.decoder else forecast_many(model, ks)
    else:
        z = noisy.samples[ks]
    times = truth.times[ks]

    if meas.kind is MeasurementKind.RANGE_AZ_EL:
        r = np.array([rae_to_position(zi, cfg.station, ti) for zi, ti in zip(z, times)])
    elif meas.kind is MeasurementKind.POSITION_ONLY:
        r = z
    else:
        r = z[:, : cfg.dim // 2]

    if cfg.iod_method is IodMethod.HERRICK_GIBBS:
        v = herrick_gibbs(r[0], r[1], r[2], *times, mu=cfg.placeholder_model.mu)
    else:
        v = finite_difference_velocity(r[0], r[1], r[2], cfg.dt)
    x_mid = np.concatenate([r[1], v])
    x_T = rk4_step(cfg.placeholder_model, x_mid, cfg.dt)
    return initial_belief(x_T, cfg.pos_sigma, cfg.vel_sigma)


def filter_config(cfg: ScenarioConfig, R_sensor, meas: MeasurementModel) -> FilterConfig:
    Q = np.diag(cfg.q_diag) if cfg.q_diag else np.zeros((cfg.dim, cfg.dim))
    R = np.diag(np.square(cfg.r_diag)) if cfg.r_diag is not None else R_sensor
    if R.shape != (meas.p, meas.p):
        raise ValueError("configured R does not match the measurement dimension")
    return FilterConfig(Q=Q, R=R, joseph=cfg.joseph)


def _as_mode(trace) -> ModeTrace:
    if isinstance(trace, FilterTrace):
        innov = np.linalg.norm(trace.innovation, axis=1)
        return ModeTrace(trace.mean, trace.cov, innov)
    assert isinstance(trace, EnsembleTrace)
    return ModeTrace(trace.mean, trace.cov, np.full(len(trace), np.nan))


def run_scenario(cfg: ScenarioConfig, workers=1) -> ScenarioResult:
    """Run the full pipeline; deterministic for a fixed ``cfg.seed``.

    ``workers`` > 1 evaluates the three forecasting modes concurrently; the
    output is identical to the sequential run.
    """
    T, F = cfg.train_steps, cfg.forecast_steps
    meas = measurement_model(cfg)
    with _Stage("truth"):
        truth = generate_truth(cfg)
    with _Stage("measurements"):
        clean, noisy, R_sensor = synthesize_measurements(cfg, truth)
    with _Stage("surrogate"):
        encoding = SurrogateEncoding.for_training(meas, cfg.encoding, noisy.samples[: T + 1])
        sur_samples = encoding.encode(noisy.samples)
        model = fit_surrogate(cfg, sur_samples)
    with _Stage("iod"):
        belief0 = determine_initial_belief(cfg, meas, truth, noisy, model, encoding)
    with _Stage("filter-setup"):
        fcfg = filter_config(cfg, R_sensor, meas)

    window = truth.segment(T)
    jobs = {
        "placeholder": lambda: monte_carlo_propagate(
            belief0, cfg.placeholder_model, cfg.n_particles, cfg.dt, F, seed=cfg.seed
        ),
        "dmd_ekf": lambda: run_filter(
            belief0, window, cfg.placeholder_model, meas, SurrogateSource(model, T, encoding.decoder), fcfg
        ),
        "hypothetical_ekf": lambda: run_filter(
            belief0, window, cfg.placeholder_model, meas, RealSource(noisy.samples[T:]), fcfg
        ),
    }

    def run(name):
        with _Stage(name):
            return jobs[name]()

    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(MODES))) as pool:
            raw = dict(zip(MODES, pool.map(run, MODES)))
    else:
        raw = {name: run(name) for name in MODES}
    traces = {name: _as_mode(raw[name]) for name in MODES}

    with _Stage("metrics"):
        norm = trajectory_normalizer(truth.states)
        inst = {
            name: error_terms(window.states, tr.mean, normalizer=norm) for name, tr in traces.items()
        }
        # eps over the whole window: sum over k0..k divided by (k - k0)
        errors = {name: float(np.sum(v) / F) for name, v in inst.items()}
        containment = {name: sigma_containment(window.states, tr.mean, tr.cov) for name, tr in traces.items()}

    with _Stage("consistency"):
        R_sur = encoding.covariance(R_sensor, clean.samples[: T + 1])
        consistency = _consistency(model, sur_samples, encoding.encode(clean.samples), R_sur, T, F)

    log.info("%s: %s", cfg.name, ", ".join(f"{k}={v:.3e}" for k, v in errors.items()))
    return ScenarioResult(
        config=cfg,
        truth=truth,
        clean=clean,
        noisy=noisy,
        surrogate=model,
        initial_belief=belief0,
        traces=traces,
        errors=errors,
        instantaneous=inst,
        containment=containment,
        consistency=consistency,
        raw=raw,
    )


def _consistency(model, sur_samples, clean_sur, R_sur, T, F):
    train = sur_samples[: T + 1]
    stats = residual_stats(residuals(model, train))
    ks = np.arange(T + 1, T + F + 1)
    err = forecast_many(model, ks) - clean_sur[ks]
    trace_R = float(np.trace(R_sur))
    return ConsistencyReport(
        residuals=stats,
        horizon_error_trace=np.sum(err**2, axis=1) + trace_R,
        formula_trace=formula_trace(model, train, R_sur),
        trace_R=trace_R,
    )


def window_error(result: ScenarioResult, mode: str, t_start: float, t_stop: float) -> float:
    """Normalized error of ``mode`` restricted to the times [t_start, t_stop]."""
    t = result.truth.segment(result.config.train_steps).times
    sel = np.flatnonzero((t >= t_start - 1e-9) & (t <= t_stop + 1e-9))
    if sel.size < 2:
        raise ValueError("time window covers fewer than two steps")
    terms = result.instantaneous[mode][sel]
    return float(np.sum(terms) / (sel.size - 1))


@dataclass(frozen=True)
class SweepRow:
    mu_p: float
    errors: dict  # mode -> eps, empty when the run failed
    failure: str = ""

    @property
    def ok(self):
        return not self.failure


def vdp_sweep(base_cfg: ScenarioConfig, mu_values, workers=1) -> list[SweepRow]:
    """One run per placeholder damping value; truth stays as configured.

    A failing point is recorded with its stage error and the sweep moves on.
    """
    mus = [float(m) for m in mu_values]
    if any(not m > 0 for m in mus):
        raise ValueError("placeholder damping values must be positive")

    def one(mu):
        cfg = base_cfg.with_overrides(placeholder_model=VanDerPol(mu), name=f"{base_cfg.name}_mu{mu:g}")
        try:
            return SweepRow(mu, run_scenario(cfg).errors)
        except StageError as exc:
            log.warning("sweep point mu_p=%g failed: %s", mu, exc)
            return SweepRow(mu, {}, str(exc))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, mus))
    return [one(m) for m in mus]
