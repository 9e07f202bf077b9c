"""Experiment recipes: compose simulation, spectral analysis, and output.

Each recipe turns a validated :class:`ExperimentConfig` into a
:class:`ResultSet`: simulate a seeded ensemble per sweep point (parallel
over points when workers > 1), average the Welch spectra, fit, derive
scalars, persist everything.  Per-point seeds derive from
(master_seed, point index) so the thread count never changes results.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..coupling import Conformation, coupling_tensors, mean_nn_distance
from ..dynamics import (
    ou_reference_trace,
    simulate_ensemble,
    single_atom_line,
)
from ..perturbation import dd_shifts, dressed_alpha, exact_splitting
from ..qcore import TWOPI, effective_rabi
from ..spectral import (
    average_spectra,
    extract_splitting,
    fit_spectrum,
    lf_fraction,
    psd,
)
from .config import ExperimentConfig
from .io import (
    PointResult,
    ResultSet,
    fit_to_dict,
    write_events,
    write_results,
    write_spectrum,
    write_trace,
)

DEFAULT_THREADS_ENV = "SPINPAIR_THREADS"


def _point_seed(master_seed: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(100, index))
    return int(ss.generate_state(1)[0])


def _segment_samples(cfg: ExperimentConfig) -> int:
    v = cfg.values
    return max(16, int(round(v["segment_duration_s"] / v["dt_s"])))


def _fit_band(cfg: ExperimentConfig) -> tuple:
    return (cfg.values["fit_band_lo_hz"], cfg.values["fit_band_hi_hz"])


def _hygiene(traces) -> dict:
    d = traces[0].diagnostics
    return {
        "max_trace_dev": float(d["max_trace_dev"]),
        "max_herm_defect": float(d["max_herm_defect"]),
        "min_eigenvalue": float(d["min_eigenvalue"]),
    }


def _spectrum_point(cfg: ExperimentConfig, out_dir: str, tag: str,
                    sweep_value: float, mode: str, params, conformation,
                    seed: int, model: str, dump_traces: bool = False):
    t0 = time.time()
    traces = simulate_ensemble(
        params, mode, cfg.values["ensemble"], seed,
        conformation=conformation, pool_size=cfg.values["pool_size"],
        isotropic_angles=bool(cfg.values["isotropic_angles"]))
    seg = _segment_samples(cfg)
    spec = average_spectra([psd(tr, segment_len=seg) for tr in traces])
    band = _fit_band(cfg)
    fit = fit_spectrum(spec.band(*band), model=model)
    split = extract_splitting(spec, band=band)
    scalars = {
        "hwhm_hz": max(pk.hwhm for pk in fit.peaks) / TWOPI,
        "center_hz": fit.peaks[0].center / TWOPI,
        "splitting_hz": split.value / TWOPI,
        "splitting_resolved": bool(split.resolved),
    }
    if fit.lf is not None:
        scalars["lf_fraction"] = lf_fraction(spec.band(*band), fit)
        scalars["lf_scale"] = fit.lf.scale
    scalars.update(_hygiene(traces))
    write_spectrum(os.path.join(out_dir, f"spectrum_{tag}.csv"), spec,
                   meta={"sweep_value": sweep_value, "seed": seed})
    if dump_traces:
        for k, tr in enumerate(traces):
            write_trace(os.path.join(out_dir, f"trace_{tag}_{k}.csv"), tr)
            write_events(os.path.join(out_dir, f"events_{tag}_{k}.csv"), tr)
    flags = {"converged": fit.converged, "resolved": bool(split.resolved)}
    return PointResult(sweep_value=sweep_value, tag=tag, scalars=scalars,
                       fit=fit_to_dict(fit), flags=flags,
                       timing_s=time.time() - t0)


def _run_point(args):
    (cfg, out_dir, index, sweep_value) = args
    v = cfg.values
    recipe = cfg.recipe
    seed = _point_seed(v["master_seed"], index)
    tag = f"{index:03d}"
    k0 = TWOPI / v["wavelength_m"]

    if recipe == "static-distance-sweep":
        conf = Conformation(r=sweep_value, theta=v["theta_rad"],
                            phi=v["phi_rad"], k0=k0)
        return _spectrum_point(cfg, out_dir, tag, sweep_value, "static",
                               cfg.params(), conf, seed, model="single_peak")
    if recipe == "angle-sweep":
        r = v["r_m"] if v["r_m"] is not None else mean_nn_distance(
            v["density_per_cm3"])
        conf = Conformation(r=r, theta=sweep_value, phi=v["phi_rad"], k0=k0)
        return _spectrum_point(cfg, out_dir, tag, sweep_value, "static",
                               cfg.params(), conf, seed, model="single_peak")
    if recipe == "density-sweep":
        params = cfg.params(density_per_cm3=sweep_value)
        return _spectrum_point(cfg, out_dir, tag, sweep_value, "dynamic",
                               params, None, seed, model="sinc_lf")
    if recipe == "power-sweep":
        # common streams across drive values: the geometry-sampling noise
        # cancels in the comparison of the low-frequency fractions
        params = cfg.params(omega_rabi_hz=sweep_value)
        seed0 = _point_seed(v["master_seed"], 0)
        return _spectrum_point(cfg, out_dir, tag, sweep_value, "dynamic",
                               params, None, seed0, model="sinc_lf")
    if recipe == "lf-tail":
        params = cfg.params(density_per_cm3=sweep_value)
        return _spectrum_point(cfg, out_dir, tag, sweep_value, "dynamic",
                               params, None, seed, model="sinc_lf")
    if recipe == "trace-dump":
        return _spectrum_point(cfg, out_dir, tag, sweep_value, "dynamic",
                               cfg.params(), None, seed, model="single_peak",
                               dump_traces=True)
    if recipe == "ou-check":
        t0 = time.time()
        gamma = TWOPI * v["ou_gamma_hz"]
        omega_l = TWOPI * v["larmor_hz"]
        trace = ou_reference_trace(gamma, omega_l, v["ou_amplitude"],
                                   dt=v["dt_s"],
                                   duration=v["trace_duration_s"], seed=seed)
        spec = psd(trace, segment_len=_segment_samples(cfg))
        fit = fit_spectrum(spec.band(*_fit_band(cfg)), model="single_peak")
        scalars = {
            "hwhm_hz": fit.peaks[0].hwhm / TWOPI,
            "center_hz": fit.peaks[0].center / TWOPI,
            "hwhm_rel_err": abs(fit.peaks[0].hwhm - gamma) / gamma,
            "center_rel_err": abs(fit.peaks[0].center - omega_l) / omega_l,
        }
        write_spectrum(os.path.join(out_dir, f"spectrum_{tag}.csv"), spec,
                       meta={"sweep_value": sweep_value, "seed": seed})
        return PointResult(sweep_value=sweep_value, tag=tag, scalars=scalars,
                           fit=fit_to_dict(fit),
                           flags={"converged": fit.converged},
                           timing_s=time.time() - t0)
    if recipe == "perturbation-check":
        t0 = time.time()
        params = cfg.params(density_per_cm3=sweep_value)
        r = mean_nn_distance(sweep_value)
        conf = Conformation(r=r, theta=v["theta_rad"], phi=v["phi_rad"], k0=k0)
        tens = coupling_tensors(conf, params.gamma0)
        a = dressed_alpha(effective_rabi(params.omega_rabi), params.detuning)
        pred = dd_shifts(tens, a, cg_mode="with_cg", omega_l=params.larmor)
        ex = exact_splitting(params, conf)
        scalars = {
            "splitting_closed_hz": 2.0 * pred.delta / TWOPI,
            "splitting_exact_hz": ex / TWOPI,
            "rel_disagreement": abs(2.0 * pred.delta - ex) / ex if ex else 0.0,
        }
        return PointResult(sweep_value=sweep_value, tag=tag, scalars=scalars,
                           fit={}, flags={}, timing_s=time.time() - t0)
    raise ValueError(f"unhandled recipe {recipe}")


def run_experiment(cfg: ExperimentConfig, out_dir: str,
                   workers: int = 1) -> ResultSet:
    """Execute a recipe and persist its ResultSet under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    sweep = cfg.sweep_values if cfg.sweep_values else (0.0,)
    jobs = [(cfg, out_dir, i, sv) for i, sv in enumerate(sweep)]
    points = []
    errors = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = list(pool.map(_run_point_safe, jobs))
        for res in futures:
            (points if isinstance(res, PointResult) else errors).append(res)
    else:
        for job in jobs:
            res = _run_point_safe(job)
            (points if isinstance(res, PointResult) else errors).append(res)

    extra = {}
    if cfg.recipe in ("density-sweep", "lf-tail", "power-sweep"):
        hw, ctr = single_atom_line(cfg.params())
        extra["single_atom_hwhm_hz"] = hw / TWOPI
        extra["single_atom_center_hz"] = ctr / TWOPI
    rs = ResultSet(recipe=cfg.recipe, config_hash=cfg.config_hash(),
                   master_seed=cfg.values["master_seed"], values=cfg.values,
                   points=points, extra=extra)
    if errors:
        rs.extra["errors"] = [str(e) for e in errors]
    write_results(out_dir, rs)
    if errors:
        # partial results are persisted before surfacing the failure
        raise RuntimeError(
            f"{len(errors)} sweep point(s) failed: {errors[0]}")
    return rs


def _run_point_safe(args):
    try:
        return _run_point(args)
    except Exception as err:   # noqa: BLE001 - reported with point context
        cfg, _, index, sweep_value = args
        return RuntimeError(
            f"recipe {cfg.recipe} point {index} (value {sweep_value!r}): {err}")
