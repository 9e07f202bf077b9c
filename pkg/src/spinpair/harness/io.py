"""Result persistence: spectra and traces as CSV, fits and scalars as JSON.

Layout under the output directory:
    results.json                 manifest: per-point fits, scalars, provenance
    spectrum_<tag>.csv           freq_hz, psd (+ header comments)
    trace_<tag>_<k>.csv          t_s, sz
    events_<tag>_<k>.csv         conformation resampling log
JSON round-trips bit-exactly (repr-based floats); CSV round-trips to the
printed precision.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .. import __version__ as _version
from ..dynamics import TimeTrace
from ..spectral import FitResult, Spectrum


@dataclass
class PointResult:
    """One sweep point: spectrum file tag, fit parameters, derived scalars."""

    sweep_value: float
    tag: str
    scalars: dict
    fit: dict
    flags: dict
    timing_s: float


@dataclass
class ResultSet:
    recipe: str
    config_hash: str
    master_seed: int
    values: dict
    points: list
    version: str = _version
    extra: dict = field(default_factory=dict)


def fit_to_dict(fit: FitResult | None) -> dict:
    if fit is None:
        return {}
    out = {
        "model": fit.model,
        "converged": fit.converged,
        "residual_norm": fit.residual_norm,
        "cost": fit.cost,
        "jacobian_condition": fit.jacobian_condition,
        "peaks": [{"amplitude": pk.amplitude, "hwhm_rad_s": pk.hwhm,
                   "center_rad_s": pk.center} for pk in fit.peaks],
        "uncertainties": {n: u for n, u in zip(fit.param_names,
                                               fit.uncertainties.tolist())},
    }
    if fit.lf is not None:
        out["lf"] = {"kind": fit.lf.kind, "amplitude": fit.lf.amplitude,
                     "scale": fit.lf.scale}
    return out


def write_spectrum(path: str, s: Spectrum, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# resolution_hz = {s.resolution!r}\n")
        fh.write(f"# n_averages = {s.n_averages}\n")
        for k, v in (meta or {}).items():
            fh.write(f"# {k} = {v}\n")
        fh.write("freq_hz,psd\n")
        for f, p in zip(s.freqs, s.psd):
            fh.write(f"{f:.10e},{p:.10e}\n")


def read_spectrum(path: str) -> Spectrum:
    meta = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                if "=" in line:
                    k, v = line[1:].split("=", 1)
                    meta[k.strip()] = v.strip()
                continue
            if not line or line.startswith("freq_hz"):
                continue
            f, p = line.split(",")
            rows.append((float(f), float(p)))
    arr = np.array(rows)
    return Spectrum(freqs=arr[:, 0], psd=arr[:, 1],
                    resolution=float(meta.get("resolution_hz", "nan")),
                    n_averages=int(meta.get("n_averages", "1")))


def write_trace(path: str, trace: TimeTrace) -> None:
    n = len(trace.samples)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# dt_s = {trace.dt!r}\n")
        fh.write(f"# seed = {trace.seed}\n")
        fh.write(f"# mode = {trace.mode}\n")
        fh.write("t_s,sz\n")
        for k in range(n):
            fh.write(f"{(k + 1) * trace.dt:.10e},{trace.samples[k]:.10e}\n")


def write_events(path: str, trace: TimeTrace) -> None:
    steady = dict()
    for t, v in trace.diagnostics.get("steady_values", []):
        steady[round(t, 15)] = v
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t_s,r_m,theta_rad,phi_rad,sz_steady\n")
        for t, conf in trace.conformation_log:
            if conf is None:
                continue
            sz = steady.get(round(t, 15), float("nan"))
            fh.write(f"{t:.10e},{conf.r:.10e},{conf.theta:.10e},"
                     f"{conf.phi:.10e},{sz:.10e}\n")


def write_results(out_dir: str, rs: ResultSet) -> str:
    os.makedirs(out_dir, exist_ok=True)
    doc = {
        "recipe": rs.recipe,
        "config_hash": rs.config_hash,
        "master_seed": rs.master_seed,
        "version": rs.version,
        "values": {k: v if not isinstance(v, tuple) else list(v)
                   for k, v in rs.values.items()},
        "extra": rs.extra,
        "points": [{
            "sweep_value": pt.sweep_value,
            "tag": pt.tag,
            "scalars": pt.scalars,
            "fit": pt.fit,
            "flags": pt.flags,
            "timing_s": pt.timing_s,
        } for pt in rs.points],
    }
    path = os.path.join(out_dir, "results.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    return path


def read_results(out_dir: str) -> ResultSet:
    path = os.path.join(out_dir, "results.json")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as err:
        raise OSError(f"cannot read result manifest {path}: {err}") from err
    points = [PointResult(sweep_value=pt["sweep_value"], tag=pt["tag"],
                          scalars=pt["scalars"], fit=pt["fit"],
                          flags=pt["flags"], timing_s=pt["timing_s"])
              for pt in doc["points"]]
    return ResultSet(recipe=doc["recipe"], config_hash=doc["config_hash"],
                     master_seed=doc["master_seed"], values=doc["values"],
                     points=points, version=doc["version"],
                     extra=doc.get("extra", {}))


def report_csv(rs: ResultSet, out_path: str) -> None:
    """Aggregate the stored scalars into one plot-ready CSV (no physics)."""
    keys = []
    for pt in rs.points:
        for k in pt.scalars:
            if k not in keys:
                keys.append(k)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("sweep_value," + ",".join(keys) + "\n")
        for pt in rs.points:
            row = [f"{pt.sweep_value:.10e}"]
            for k in keys:
                v = pt.scalars.get(k, float("nan"))
                row.append(f"{v:.10e}" if isinstance(v, float) else str(v))
            fh.write(",".join(row) + "\n")
