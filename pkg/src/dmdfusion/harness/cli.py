"""Command-line entry point: ``python -m dmdfusion <command>``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ..consistency import variance_growth
from ..errors import ConfigError, DmdFusionError, StageError
from ..measurements import NoiseSpec
from ..surrogate import HankelParams, default_delays
from . import config as config_io
from . import scenarios
from .output import _fmt, consistency_table, emit_csv, write_atomic
from .runner import (
    MODES,
    SurrogateEncoding,
    generate_truth,
    measurement_model,
    run_scenario,
    synthesize_measurements,
    vdp_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


def resolve(target: str, seed: int | None = None):
    if target in scenarios.REGISTRY:
        cfg = scenarios.get(target)
    elif Path(target).is_file():
        cfg = config_io.load(target)
    else:
        raise ConfigError(f"{target!r} is neither a built-in scenario nor a config file")
    return cfg if seed is None else cfg.with_overrides(seed=seed)


def cmd_list(args):
    width = max(map(len, scenarios.REGISTRY))
    for name, make in scenarios.REGISTRY.items():
        print(f"{name:<{width}}  {make().description}")
    return EXIT_OK


def cmd_run(args):
    cfg = resolve(args.target, args.seed)
    result = run_scenario(cfg, workers=args.workers)
    out = Path(args.out) if args.out else Path("out") / cfg.name
    emit_csv(result, out)
    print(f"scenario {cfg.name} (seed {cfg.seed}), surrogate rank {result.surrogate.rank}, delays {result.surrogate.delays}")
    for mode in MODES:
        cont = " ".join(f"{c:.3f}" for c in result.containment[mode])
        print(f"  {mode:<17} eps {result.errors[mode]:.6e}   3-sigma containment {cont}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_sweep(args):
    if args.system != "vdp":
        raise ConfigError(f"unknown sweep {args.system!r}")
    base = scenarios.vdp()
    if args.seed is not None:
        base = base.with_overrides(seed=args.seed)
    mus = scenarios.vdp_mu_grid(args.start, args.stop, args.step)
    rows = vdp_sweep(base, mus, workers=args.workers)
    lines = ["mu_p," + ",".join(f"eps_{m}" for m in MODES) + ",failure"]
    print(f"{'mu_p':>6}  " + "  ".join(f"{m:>17}" for m in MODES))
    for row in rows:
        vals = [row.errors.get(m, float("nan")) for m in MODES]
        print(f"{row.mu_p:6.2f}  " + "  ".join(f"{v:17.6e}" for v in vals) + (f"  FAILED {row.failure}" if not row.ok else ""))
        lines.append(",".join([_fmt(row.mu_p), *(_fmt(v) for v in vals), '"' + row.failure.replace('"', "'") + '"']))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_atomic(out / "sweep_vdp.csv", "\n".join(lines) + "\n")
        print(f"wrote {out / 'sweep_vdp.csv'}")
    return EXIT_OK


def cmd_consistency(args):
    cfg = resolve(args.scenario, args.seed)
    meas = measurement_model(cfg)
    truth = generate_truth(cfg)
    clean, noisy, R = synthesize_measurements(cfg, truth)
    T = cfg.train_steps
    enc = SurrogateEncoding.for_training(meas, cfg.encoding, noisy.samples[: T + 1])
    z = enc.encode(clean.samples)
    R_enc = enc.covariance(R, clean.samples[: T + 1])
    delays = cfg.delays or default_delays(T + 1, z.shape[1])
    vg = variance_growth(
        z, NoiseSpec(R=R_enc), HankelParams(delays, cfg.rank), T + 1, min(args.horizon, cfg.forecast_steps),
        n_ensemble=args.ensemble, seed=cfg.seed,
    )
    report = [
        f"scenario: {cfg.name}",
        f"ensemble: {args.ensemble}",
        f"delays: {delays}",
        f"trace_R: {_fmt(vg.trace_R)}",
        f"formula_trace: {_fmt(vg.formula_trace[0])}",
        f"empirical_trace_first: {_fmt(vg.empirical_trace[0])}",
        f"empirical_trace_last: {_fmt(vg.empirical_trace[-1])}",
        f"spearman_horizon: {_fmt(vg.spearman) if np.ptp(vg.empirical_trace) > 0 else 'nan'}",
        f"min_empirical_over_trace_R: {_fmt(vg.empirical_trace.min() / vg.trace_R) if vg.trace_R > 0 else 'inf'}",
    ]
    print("\n".join(report))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_atomic(out / "consistency.csv", consistency_table(vg.empirical_trace, vg.formula_trace, vg.trace_R))
        write_atomic(out / "consistency_report.txt", "\n".join(report) + "\n")
        print(f"wrote {out}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="dmdfusion", description="placeholder-dynamics + DMD-surrogate forecasting harness")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list", help="print the scenario registry")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("run", help="run one scenario and write CSV output")
    p.add_argument("target", help="built-in scenario name or path to a config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (default out/<scenario>)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="placeholder parameter sweep")
    p.add_argument("system", choices=["vdp"])
    p.add_argument("--from", dest="start", type=float, default=1.0)
    p.add_argument("--to", dest="stop", type=float, default=3.0)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("consistency", help="extrapolation-error growth over a noise ensemble")
    p.add_argument("scenario")
    p.add_argument("--ensemble", type=int, default=50)
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_consistency)
    return ap


def _code_for(exc):
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_NUMERICAL


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DmdFusionError, OSError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
