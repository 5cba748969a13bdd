"""Built-in scenario registry so zero-config runs work."""

from __future__ import annotations

import math

import numpy as np

from ..dynamics import (
    MU_EARTH,
    Cr3bp,
    DragParams,
    OrbitalElements,
    Pendulum,
    TwoBody,
    VanDerPol,
    orbital_period,
)
from ..errors import ConfigError
from ..measurements import COLUMBUS, MeasurementKind, NoiseSpec
from ..surrogate import EnergyThreshold, FixedRank
from .config import IodMethod, IodSource, ScenarioConfig

ISS = OrbitalElements(6796.9, 0.0007, 51.639, 113.73, 51.197, 358.89)
MOLNIYA = OrbitalElements(26555.94, 0.7294, 63.324, 295.46, 282.69, 357.32)
HALO_L1 = (8.7592e-1, -1.5903e-26, 1.9175e-1, -2.9302e-14, 2.3080e-1, 7.36497e-14)
HALO_PERIOD = 2.178309150384138  # nondimensional, from the xz-plane return map

ISS_DT = 10.0
ISS_PERIOD_STEPS = int(round(orbital_period(ISS.a, MU_EARTH) / ISS_DT))


def pendulum() -> ScenarioConfig:
    return ScenarioConfig(
        name="pendulum",
        description="damped pendulum truth, undamped placeholder, angle measured",
        truth_model=Pendulum(m=0.5, c=2e-3),
        placeholder_model=Pendulum(m=0.5, c=0.0),
        initial=(0.3, 0.0),
        meas_kind=MeasurementKind.POSITION_ONLY,
        dt=0.01,
        train_steps=10000,
        forecast_steps=30000,
        delays=2000,
        q_diag=(0.0, 1e-6),
        r_diag=(1e-2,),
        pos_sigma=1e-2,
        vel_sigma=1e-2,
    )


def _iss(name, truth, **kw) -> ScenarioConfig:
    base = dict(
        name=name,
        truth_model=truth,
        placeholder_model=TwoBody(),
        initial=ISS,
        meas_kind=MeasurementKind.POSITION_ONLY,
        dt=ISS_DT,
        train_steps=5 * ISS_PERIOD_STEPS,
        forecast_steps=5 * ISS_PERIOD_STEPS,
        delays=697,
        rank=FixedRank(14),
        q_diag=(0.0,) * 3 + (1e-8,) * 3,
        r_diag=(1.0,) * 3,
        pos_sigma=1.0,
        vel_sigma=1e-2,
    )
    base.update(kw)
    return ScenarioConfig(**base)


def iss_j2() -> ScenarioConfig:
    return _iss("iss_j2", TwoBody(j2=True), description="ISS, J2 truth, Kepler placeholder, noise-free positions")


def iss_drag() -> ScenarioConfig:
    return _iss(
        "iss_drag",
        TwoBody(drag=DragParams()),
        description="ISS, drag truth, Kepler placeholder, noise-free positions",
    )


def iss_j2_noisy() -> ScenarioConfig:
    return _iss(
        "iss_j2_noisy",
        TwoBody(j2=True),
        description="ISS, J2 truth, 5% relative position noise",
        noise=NoiseSpec.relative(5.0),
        r_diag=None,
        iod_source=IodSource.SURROGATE,
        rank=FixedRank(10),
        q_diag=(300.0,) * 3 + (1e-3,) * 3,
        pos_sigma=1.0,
        vel_sigma=1e-3,
    )


def iss_rae() -> ScenarioConfig:
    return _iss(
        "iss_rae",
        TwoBody(j2=True),
        description="ISS, J2 truth, range/azimuth/elevation from Columbus",
        meas_kind=MeasurementKind.RANGE_AZ_EL,
        station=COLUMBUS,
        noise=NoiseSpec.diagonal((1.0, 0.01, 0.01)),
        r_diag=None,
        iod_method=IodMethod.HERRICK_GIBBS,
        iod_source=IodSource.SURROGATE,
        encoding="topocentric",
        rank=FixedRank(30),
        q_diag=(1.0,) * 3 + (1e-6,) * 3,
        pos_sigma=1.0,
        vel_sigma=1e-3,
    )


def molniya() -> ScenarioConfig:
    dt = 60.0
    steps = int(round(orbital_period(MOLNIYA.a, MU_EARTH) / dt))
    return ScenarioConfig(
        name="molniya",
        description="Molniya orbit, J2 truth as the perturbed-model proxy, Kepler placeholder",
        truth_model=TwoBody(j2=True),
        placeholder_model=TwoBody(),
        initial=MOLNIYA,
        meas_kind=MeasurementKind.POSITION_ONLY,
        dt=dt,
        train_steps=5 * steps,
        forecast_steps=5 * steps,
        delays=898,
        rank=FixedRank(40),
        q_diag=(0.0,) * 3 + (1e-8,) * 3,
        r_diag=(1.0,) * 3,
        pos_sigma=1.0,
        vel_sigma=1e-2,
    )


def vdp(mu_p: float = 1.0) -> ScenarioConfig:
    return ScenarioConfig(
        name="vdp",
        description="Van der Pol truth mu=2, placeholder mu_p, position measured",
        truth_model=VanDerPol(2.0),
        placeholder_model=VanDerPol(mu_p),
        initial=(2.0, 0.0),
        meas_kind=MeasurementKind.POSITION_ONLY,
        dt=0.01,
        train_steps=2000,
        forecast_steps=2000,
        delays=500,
        warmup_time=20.0,
        q_diag=(0.0, 0.0),
        r_diag=(1e-2,),
        pos_sigma=1e-2,
        vel_sigma=1e-2,
    )


def cr3bp_halo() -> ScenarioConfig:
    dt = 1e-3
    steps = int(round(HALO_PERIOD / dt))
    return ScenarioConfig(
        name="cr3bp_halo",
        description="L1 halo, CR3BP truth and placeholder, 1% position noise",
        truth_model=Cr3bp(),
        placeholder_model=Cr3bp(),
        initial=HALO_L1,
        meas_kind=MeasurementKind.POSITION_ONLY,
        dt=dt,
        train_steps=2 * steps,
        forecast_steps=2 * steps,
        noise=NoiseSpec.relative(1.0),
        iod_source=IodSource.SURROGATE,
        delays=400,
        rank=FixedRank(8),
        q_diag=(1e-8,) * 6,
        pos_sigma=1e-4,
        vel_sigma=1e-4,
    )


REGISTRY = {
    "pendulum": pendulum,
    "iss_j2": iss_j2,
    "iss_drag": iss_drag,
    "iss_j2_noisy": iss_j2_noisy,
    "iss_rae": iss_rae,
    "molniya": molniya,
    "vdp": vdp,
    "cr3bp_halo": cr3bp_halo,
}


def get(name: str) -> ScenarioConfig:
    try:
        return REGISTRY[name]()
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(sorted(REGISTRY))}") from None


def vdp_mu_grid(start=1.0, stop=3.0, step=0.1):
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 10)
