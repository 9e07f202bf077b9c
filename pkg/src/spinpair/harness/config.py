"""Flat key=value experiment configuration with typed validation.

Every numeric key carries its unit in the name (``*_hz``, ``*_s``,
``*_per_cm3``, ``*_m``, ``*_rad``); frequencies are plain Hz in the file
and converted to angular frequencies at this boundary.  Unknown keys are
rejected.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..qcore import TWOPI, SimulationParams

RECIPES = (
    "static-distance-sweep",
    "angle-sweep",
    "density-sweep",
    "power-sweep",
    "trace-dump",
    "lf-tail",
    "ou-check",
    "perturbation-check",
)


class ConfigError(ValueError):
    """Invalid, missing, or unknown configuration content."""


def _parse_float(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"expected a number, got {s!r}") from None


def _parse_int(s: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise ConfigError(f"expected an integer, got {s!r}") from None


def _parse_list(s: str) -> tuple:
    try:
        return tuple(float(v) for v in s.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"expected a list of numbers, got {s!r}") from None


def _parse_str(s: str) -> str:
    return s.strip()


# key -> (parser, default); REQUIRED means no default
REQUIRED = object()

SCHEMA = {
    "recipe": (_parse_str, REQUIRED),
    "sweep_values": (_parse_list, None),
    "omega_rabi_hz": (_parse_float, 150e6),
    "detuning_hz": (_parse_float, 300e6),
    "larmor_hz": (_parse_float, 9e6),
    # excited-state decay: alkali D2 literature value, not fitted here
    "gamma0_hz": (_parse_float, 6.0666e6),
    "gamma_t_hz": (_parse_float, 180e3),
    "polarization": (_parse_str, "sigma"),
    "noise_amplitude": (_parse_float, 2.8),
    "dt_s": (_parse_float, 2e-9),
    "trace_duration_s": (_parse_float, 50e-6),
    "tau_c_s": (_parse_float, 100e-9),
    "density_per_cm3": (_parse_float, 1e12),
    "wavelength_m": (_parse_float, 780e-9),
    "r_m": (_parse_float, None),
    "theta_rad": (_parse_float, 0.0),
    "phi_rad": (_parse_float, 0.0),
    "ensemble": (_parse_int, 100),
    "master_seed": (_parse_int, 1),
    "pool_size": (_parse_int, 160),
    "segment_duration_s": (_parse_float, 12.5e-6),
    "fit_band_lo_hz": (_parse_float, 0.2e6),
    "fit_band_hi_hz": (_parse_float, 25e6),
    "isotropic_angles": (_parse_int, 0),
    # ou-check reference process
    "ou_gamma_hz": (_parse_float, 270e3),
    "ou_amplitude": (_parse_float, 1.0),
}

_SWEEP_KEY = {
    "static-distance-sweep": "r_m",
    "angle-sweep": "theta_rad",
    "density-sweep": "density_per_cm3",
    "power-sweep": "omega_rabi_hz",
    "lf-tail": "density_per_cm3",
    "perturbation-check": "density_per_cm3",
}


@dataclass
class ExperimentConfig:
    """Validated recipe configuration; ``values`` is the raw typed map."""

    recipe: str
    values: dict
    sweep_key: str | None
    sweep_values: tuple

    def params(self, **overrides) -> SimulationParams:
        v = dict(self.values)
        v.update(overrides)
        return SimulationParams(
            omega_rabi=TWOPI * v["omega_rabi_hz"],
            detuning=TWOPI * v["detuning_hz"],
            larmor=TWOPI * v["larmor_hz"],
            gamma0=TWOPI * v["gamma0_hz"],
            gamma_t=TWOPI * v["gamma_t_hz"],
            polarization=v["polarization"],
            noise_amplitude=v["noise_amplitude"],
            dt=v["dt_s"],
            t_trace=v["trace_duration_s"],
            tau_c=v["tau_c_s"],
            density=v["density_per_cm3"],
            k0=TWOPI / v["wavelength_m"],
        )

    def config_hash(self) -> str:
        items = sorted((k, repr(v)) for k, v in self.values.items())
        blob = "\n".join(f"{k}={v}" for k, v in items)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key = value, got {body!r}")
        key, val = body.split("=", 1)
        key = key.strip()
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = val.strip()
    return raw


def build_config(raw: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Validate raw string values against the schema."""
    raw = dict(raw)
    if overrides:
        raw.update({k: str(v) for k, v in overrides.items()})
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    values = {}
    for key, (parser, default) in SCHEMA.items():
        if key in raw:
            values[key] = parser(raw[key])
        elif default is REQUIRED:
            raise ConfigError(f"missing required key: {key}")
        else:
            values[key] = default

    recipe = values["recipe"]
    if recipe not in RECIPES:
        raise ConfigError(f"unknown recipe {recipe!r}; options: {', '.join(RECIPES)}")

    sweep_key = _SWEEP_KEY.get(recipe)
    sweep = values.get("sweep_values") or ()
    if sweep_key is not None:
        if not sweep:
            raise ConfigError(f"recipe {recipe} requires sweep_values "
                              f"(interpreted as {sweep_key})")
        diffs = np.diff(sweep)
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ConfigError("sweep_values must be strictly monotone")
    if recipe == "static-distance-sweep" and values["r_m"] is None and not sweep:
        raise ConfigError("static-distance-sweep needs sweep_values (r_m)")
    if values["ensemble"] < 1:
        raise ConfigError("ensemble must be >= 1")
    for key in ("omega_rabi_hz", "larmor_hz", "gamma0_hz", "gamma_t_hz"):
        if values[key] < 0:
            raise ConfigError(f"{key} must be >= 0")
    if values["polarization"] not in ("sigma", "pi"):
        raise ConfigError("polarization must be sigma or pi")
    if values["dt_s"] <= 0 or values["trace_duration_s"] <= 0:
        raise ConfigError("dt_s and trace_duration_s must be positive")
    if values["tau_c_s"] <= values["dt_s"]:
        raise ConfigError("tau_c_s must exceed dt_s")
    if values["segment_duration_s"] > values["trace_duration_s"]:
        raise ConfigError("segment_duration_s cannot exceed trace_duration_s")
    return ExperimentConfig(recipe=recipe, values=values, sweep_key=sweep_key,
                            sweep_values=tuple(sweep))


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return build_config(parse_config_text(fh.read()), overrides)
