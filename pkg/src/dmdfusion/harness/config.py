"""Declarative scenario description and its INI-style text form."""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from ..dynamics import (
    Cr3bp,
    DragParams,
    DynamicsModel,
    LinearSystem,
    OrbitalElements,
    Pendulum,
    TwoBody,
    VanDerPol,
)
from ..errors import ConfigError
from ..measurements import GroundStation, MeasurementKind, NoiseMode, NoiseSpec
from ..surrogate import EnergyThreshold, FixedRank, RankPolicy


class IodMethod(str, Enum):
    FINITE_DIFFERENCE = "finite_difference"
    HERRICK_GIBBS = "herrick_gibbs"
    EXACT = "exact"


class IodSource(str, Enum):
    MEASUREMENTS = "measurements"
    SURROGATE = "surrogate"


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    name: str
    truth_model: DynamicsModel
    placeholder_model: DynamicsModel
    initial: OrbitalElements | tuple
    meas_kind: MeasurementKind
    dt: float
    train_steps: int
    forecast_steps: int
    delays: int | None = None
    rank: RankPolicy = EnergyThreshold(1.0 - 1e-10)
    encoding: str = "angles"  # surrogate training space for angular measurements
    noise: NoiseSpec | None = None
    station: GroundStation | None = None
    q_diag: tuple = ()
    r_diag: tuple | None = None  # None: use the sensor noise covariance
    joseph: bool = True
    iod_method: IodMethod = IodMethod.FINITE_DIFFERENCE
    iod_source: IodSource = IodSource.MEASUREMENTS
    pos_sigma: float = 1.0
    vel_sigma: float = 0.01
    n_particles: int = 200
    warmup_time: float = 0.0
    seed: int = 0
    description: str = ""

    def __post_init__(self):
        if self.truth_model.dim != self.placeholder_model.dim:
            raise ConfigError("truth and placeholder models have different dimensions")
        if self.forecast_steps < 1:
            raise ConfigError("forecast_steps must be at least 1")
        if self.delays is not None and self.train_steps < self.delays + 2:
            raise ConfigError("train_steps must be at least delays + 2")
        if self.meas_kind is MeasurementKind.RANGE_AZ_EL and self.station is None:
            raise ConfigError("range/azimuth/elevation scenario needs a station")
        if self.q_diag and len(self.q_diag) != self.truth_model.dim:
            raise ConfigError("q_diag length must match the state dimension")
        if self.encoding not in ("angles", "topocentric"):
            raise ConfigError(f"unknown surrogate encoding {self.encoding!r}")
        if self.train_steps < 3:
            raise ConfigError("need at least three training samples for initial state determination")

    @property
    def dim(self):
        return self.truth_model.dim

    def with_overrides(self, **kw):
        return replace(self, **kw)


# --- text form -----------------------------------------------------------------


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list, np.ndarray)):
        return ", ".join(_fmt(float(x)) for x in v)
    if isinstance(v, Enum):
        return v.value
    return str(v)


def _floats(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _model_section(model: DynamicsModel):
    if isinstance(model, Pendulum):
        return {"kind": "pendulum", "m": model.m, "c": model.c, "L": model.L, "g": model.g}
    if isinstance(model, VanDerPol):
        return {"kind": "vanderpol", "mu": model.mu}
    if isinstance(model, TwoBody):
        out = {"kind": "twobody", "mu": model.mu, "j2": model.j2, "drag": model.drag is not None}
        if model.drag is not None:
            d = model.drag
            out.update(rho0=d.rho0, h0=d.h0, scale_height=d.scale_height, ballistic=d.ballistic)
        return out
    if isinstance(model, Cr3bp):
        return {"kind": "cr3bp", "mass_ratio": model.mass_ratio}
    if isinstance(model, LinearSystem):
        return {"kind": "linear", "A": model.A.ravel()}
    raise ConfigError(f"cannot serialize model {model!r}")


def _parse_model(sec) -> DynamicsModel:
    kind = sec.get("kind", "").strip().lower()
    try:
        if kind == "pendulum":
            return Pendulum(sec.getfloat("m", 0.5), sec.getfloat("c", 0.0), sec.getfloat("L", 1.0), sec.getfloat("g", 9.81))
        if kind == "vanderpol":
            return VanDerPol(sec.getfloat("mu"))
        if kind == "twobody":
            drag = None
            if sec.getboolean("drag", False):
                base = DragParams()
                drag = DragParams(
                    sec.getfloat("rho0", base.rho0),
                    sec.getfloat("h0", base.h0),
                    sec.getfloat("scale_height", base.scale_height),
                    sec.getfloat("ballistic", base.ballistic),
                )
            return TwoBody(mu=sec.getfloat("mu", TwoBody.mu), j2=sec.getboolean("j2", False), drag=drag)
        if kind == "cr3bp":
            return Cr3bp(sec.getfloat("mass_ratio", Cr3bp.mass_ratio))
        if kind == "linear":
            a = np.array(_floats(sec["A"]))
            n = int(round(math.sqrt(a.size)))
            return LinearSystem(a.reshape(n, n))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad model section: {exc}") from exc
    raise ConfigError(f"unknown model kind {kind!r}")


def dumps(cfg: ScenarioConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    scen = {
        "name": cfg.name,
        "description": cfg.description,
        "dt": cfg.dt,
        "train_steps": cfg.train_steps,
        "forecast_steps": cfg.forecast_steps,
        "seed": cfg.seed,
        "warmup_time": cfg.warmup_time,
        "n_particles": cfg.n_particles,
    }
    cp["scenario"] = {k: _fmt(v) for k, v in scen.items()}
    cp["truth"] = {k: _fmt(v) for k, v in _model_section(cfg.truth_model).items()}
    cp["placeholder"] = {k: _fmt(v) for k, v in _model_section(cfg.placeholder_model).items()}
    if isinstance(cfg.initial, OrbitalElements):
        el = cfg.initial
        cp["initial"] = {"elements": _fmt((el.a, el.e, el.i, el.raan, el.argp, el.true_anomaly))}
    else:
        cp["initial"] = {"state": _fmt(tuple(cfg.initial))}
    meas = {"kind": cfg.meas_kind.value}
    if cfg.noise is not None:
        if cfg.noise.mode is NoiseMode.RELATIVE_PERCENT:
            meas["noise_percent"] = _fmt(float(cfg.noise.percent))
        else:
            meas["noise_cov"] = _fmt(cfg.noise.R.ravel())
    if cfg.station is not None:
        st = cfg.station
        meas.update(latitude=_fmt(st.latitude), longitude=_fmt(st.longitude), altitude=_fmt(st.altitude), gmst0=_fmt(st.gmst0))
    cp["measurements"] = meas
    sur = {"rank_policy": "fixed" if isinstance(cfg.rank, FixedRank) else "energy"}
    sur["rank_value"] = _fmt(cfg.rank.r if isinstance(cfg.rank, FixedRank) else float(cfg.rank.eta))
    if cfg.delays is not None:
        sur["delays"] = str(cfg.delays)
    sur["encoding"] = cfg.encoding
    cp["surrogate"] = sur
    filt = {"q_diag": _fmt(cfg.q_diag), "joseph": str(cfg.joseph)}
    if cfg.r_diag is not None:
        filt["r_diag"] = _fmt(cfg.r_diag)
    cp["filter"] = filt
    cp["iod"] = {
        "method": cfg.iod_method.value,
        "source": cfg.iod_source.value,
        "pos_sigma": _fmt(float(cfg.pos_sigma)),
        "vel_sigma": _fmt(float(cfg.vel_sigma)),
    }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def loads(text: str) -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
        s = cp["scenario"]
        m = cp["measurements"]
        kind = MeasurementKind(m.get("kind"))
        noise = None
        if "noise_percent" in m:
            noise = NoiseSpec.relative(float(m["noise_percent"]))
        elif "noise_cov" in m:
            vals = np.array(_floats(m["noise_cov"]))
            p = int(round(math.sqrt(vals.size)))
            noise = NoiseSpec(R=vals.reshape(p, p))
        station = None
        if "latitude" in m:
            station = GroundStation(
                m.getfloat("latitude"), m.getfloat("longitude"), m.getfloat("altitude", 0.0), m.getfloat("gmst0", 0.0)
            )
        ini = cp["initial"]
        initial = OrbitalElements(*_floats(ini["elements"])) if "elements" in ini else _floats(ini["state"])
        sur = cp["surrogate"] if cp.has_section("surrogate") else {}
        policy = sur.get("rank_policy", "energy")
        rank_value = sur.get("rank_value", "0.9999999999")
        rank = FixedRank(int(float(rank_value))) if policy == "fixed" else EnergyThreshold(float(rank_value))
        delays = int(sur["delays"]) if "delays" in sur else None
        f = cp["filter"] if cp.has_section("filter") else {}
        q_diag = _floats(f.get("q_diag", ""))
        r_diag = _floats(f["r_diag"]) if "r_diag" in f else None
        joseph = str(f.get("joseph", "True")).lower() in ("1", "true", "yes")
        iod = cp["iod"] if cp.has_section("iod") else {}
        return ScenarioConfig(
            name=s.get("name"),
            description=s.get("description", ""),
            truth_model=_parse_model(cp["truth"]),
            placeholder_model=_parse_model(cp["placeholder"]),
            initial=initial,
            meas_kind=kind,
            dt=s.getfloat("dt"),
            train_steps=s.getint("train_steps"),
            forecast_steps=s.getint("forecast_steps"),
            seed=s.getint("seed", 0),
            warmup_time=s.getfloat("warmup_time", 0.0),
            n_particles=s.getint("n_particles", 200),
            delays=delays,
            rank=rank,
            encoding=sur.get("encoding", "angles"),
            noise=noise,
            station=station,
            q_diag=q_diag,
            r_diag=r_diag,
            joseph=joseph,
            iod_method=IodMethod(iod.get("method", "finite_difference")),
            iod_source=IodSource(iod.get("source", "measurements")),
            pos_sigma=float(iod.get("pos_sigma", 1.0)),
            vel_sigma=float(iod.get("vel_sigma", 0.01)),
        )
    except ConfigError:
        raise
    except (configparser.Error, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid scenario config: {exc}") from exc


def load(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text)


def dump(cfg: ScenarioConfig, path):
    Path(path).write_text(dumps(cfg))
