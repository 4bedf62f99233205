"""Machine-readable reports: report.json plus CSV tables and plot data."""

from __future__ import annotations

import copy
import csv
import datetime as _dt
import json
import math
from pathlib import Path

import numpy as np

from . import __version__

TIMESTAMP_KEY = "generated_at"
PLOT_COLUMNS = ["x", "quantity", "value", "lo", "hi"]


def _clean(obj):
    """Plain JSON types only; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _merge(resolved: dict, given: dict) -> dict:
    out = copy.deepcopy(resolved)
    for key, value in given.items():
        if isinstance(value, dict):
            out[key] = {**out.get(key, {}), **value}
        else:
            out[key] = value
    return out


def build_report(result, extra: dict | None = None) -> dict:
    """The report as a dict, without the timestamp."""
    cfg = result.config
    h = cfg.config_hash()
    estimates = []
    for name in sorted(result.estimates):
        est = result.estimates[name]
        rec = est.record(name, h)
        rec["details"] = est.details
        estimates.append(rec)
    report = {
        "experiment": cfg.experiment,
        "title": cfg.title,
        "provenance": {"config_hash": h, "code_version": __version__, "seed": cfg.seed,
                       "config_source": Path(cfg.source).name},
        "config": _merge(cfg.resolved, cfg.sections),
        "estimates": estimates,
        "checks": [c.record() for c in result.checks],
        "errors": result.errors,
        "boundary_resolution": result.boundary,
        "tables": result.tables,
        "plotdata": result.plotdata,
        "passed": result.passed,
        "exit_code": result.exit_code,
    }
    if extra:
        report.update(extra)
    return _clean(report)


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def strip_timestamp(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != TIMESTAMP_KEY}


def _write_csv(path: Path, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])


def render_tables(report: dict, out: Path) -> list[Path]:
    """tables/*.csv (including estimates and checks) and plotdata/*.csv."""
    out = Path(out)
    written = []
    est_cols = ["estimator", "method", "value", "std_error", "n", "seed"]
    p = out / "tables" / "estimates.csv"
    _write_csv(p, est_cols, [[e[c] for c in est_cols] for e in report["estimates"]])
    written.append(p)
    chk_cols = ["check", "passed", "inequality", "value", "bound", "margin"]
    p = out / "tables" / "checks.csv"
    _write_csv(p, chk_cols, [[c[k] for k in chk_cols] for c in report["checks"]])
    written.append(p)
    for name, tab in sorted(report["tables"].items()):
        p = out / "tables" / f"{name}.csv"
        _write_csv(p, tab["columns"], tab["rows"])
        written.append(p)
    for name, rows in sorted(report["plotdata"].items()):
        p = out / "plotdata" / f"{name}.csv"
        _write_csv(p, PLOT_COLUMNS, rows)
        written.append(p)
    return written


def write_report(report: dict, out, figures: bool = True) -> Path:
    """report.json (timestamp isolated in one top-level key), tables and figures."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stamped = {**report, TIMESTAMP_KEY: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
    path = out / "report.json"
    path.write_text(dumps(stamped))
    render_tables(report, out)
    if figures:
        from .plotting import render_figures
        render_figures(report, out)
    return path


def load_report(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    return json.loads(path.read_text())
