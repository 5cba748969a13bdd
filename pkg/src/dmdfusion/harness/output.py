"""CSV emission for scenario results. Every file is written via temp file + rename."""

from __future__ import annotations

import csv
import io
import os
from pathlib import Path

import numpy as np

from ..metrics import cumulative_error
from .runner import MODES, ScenarioResult

FILES = ("truth.csv", "measurements.csv", *(f"estimates_{m}.csv" for m in MODES), "errors.csv", "consistency.csv")


def _fmt(v):
    return format(float(v), ".17g")


def _table(header, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    cols = [np.asarray(c) for c in columns]
    for i in range(len(cols[0])):
        w.writerow([str(c[i]) if c.dtype.kind in "iu" else _fmt(c[i]) for c in cols])
    return buf.getvalue()


def write_atomic(path: Path, text: str):
    """Write ``text`` to ``path`` through a sibling temp file; OSError names the path."""
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    try:
        with open(tmp, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            tmp.unlink()
        except OSError:
            pass
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def result_tables(result: ScenarioResult) -> dict[str, str]:
    truth = result.truth
    n = truth.dim
    steps = np.arange(len(truth))
    out = {
        "truth.csv": _table(
            ["step", "t", *(f"x{i + 1}" for i in range(n))], [steps, truth.times, *truth.states.T]
        )
    }
    p = result.clean.samples.shape[1]
    out["measurements.csv"] = _table(
        ["step", "t", *(f"clean{j + 1}" for j in range(p)), *(f"noisy{j + 1}" for j in range(p))],
        [steps, truth.times, *result.clean.samples.T, *result.noisy.samples.T],
    )

    T, _ = result.window
    fsteps = np.arange(T, len(truth))
    ft = truth.times[T:]
    for mode in MODES:
        tr = result.traces[mode]
        diag = np.diagonal(tr.cov, axis1=1, axis2=2)
        out[f"estimates_{mode}.csv"] = _table(
            ["step", "t", *(f"xhat{i + 1}" for i in range(n)), *(f"P{i + 1}{i + 1}" for i in range(n)), "innovation_norm"],
            [fsteps, ft, *tr.mean.T, *diag.T, tr.innovation_norm],
        )

    header, cols = ["step"], [fsteps]
    for mode in MODES:
        header += [f"eps_instantaneous_{mode}", f"eps_cumulative_{mode}"]
        cols += [result.instantaneous[mode], cumulative_error(result.instantaneous[mode])]
    out["errors.csv"] = _table(header, cols)
    out["consistency.csv"] = consistency_table(result.consistency.horizon_error_trace,
                                               result.consistency.formula_trace,
                                               result.consistency.trace_R)
    return out


def consistency_table(empirical, formula, trace_R):
    empirical = np.asarray(empirical, dtype=float)
    h = np.arange(1, empirical.size + 1)
    formula = np.broadcast_to(np.asarray(formula, dtype=float), empirical.shape)
    return _table(
        ["horizon", "empirical_trace", "paper_formula_trace", "trace_R"],
        [h, empirical, formula, np.full(empirical.size, trace_R)],
    )


def emit_csv(result: ScenarioResult, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create output directory {out_dir}: {exc.strerror}") from exc
    written = []
    for name, text in result_tables(result).items():
        path = out_dir / name
        write_atomic(path, text)
        written.append(path)
    return written


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Parse a file written by :func:`emit_csv` back to (header, float array)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])
