"""Synthetic gauge-station corpora with a controllable, learnable bias.

Observed water level per station: a semidiurnal tide, a Gaussian surge
pulse around landfall, and a little measurement noise. The "physics model"
output is the observed level plus a bias made of a systematic part
(a gain on the signal itself) and AR(1) noise, so the offset series is
smooth and predictable when the AR coefficient is close to 1.

Everything is deterministic given (seed, station index).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .pipeline import StationSeries, write_manifest, write_storm_csv

T0 = datetime(2000, 1, 1, tzinfo=timezone.utc)

OBS_NOISE_STD_FT = 0.02  # instrument-scale jitter on the observed signal

SEMIDIURNAL_LUNAR_PERIOD_H = 12.42


@dataclass(frozen=True)
class SyntheticStormSpec:
    storm_id: str
    n_stations: int = 20
    duration_hours: int = 150
    tide_amplitude_ft: float = 2.0
    tide_period_hours: float = SEMIDIURNAL_LUNAR_PERIOD_H
    surge_peak_ft: float = 4.0
    surge_center_hour: float = 75.0
    surge_width_hours: float = 8.0
    bias_gain: float = 0.1
    bias_ar_coeff: float = 0.95
    bias_noise_std_ft: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.duration_hours < 48:
            raise ValueError("duration too short: need at least 48 hours")
        if not 0.0 <= self.bias_ar_coeff < 1.0:
            raise ValueError("bias AR coefficient must lie in [0, 1)")
        if self.surge_width_hours <= 0 or self.tide_period_hours <= 0:
            raise ValueError("widths and periods must be positive")
        if self.n_stations < 1:
            raise ValueError("need at least one station")


def _station_rng(spec: SyntheticStormSpec, station_index: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, station_index])


def station_id_for(spec: SyntheticStormSpec, station_index: int) -> str:
    return f"{spec.storm_id}-st{station_index:03d}"


def generate_station_series(spec: SyntheticStormSpec, station_index: int) -> StationSeries:
    """One station's observed/modeled pair; offsets equal the bias exactly."""
    spec.validate()
    if not 0 <= station_index < spec.n_stations:
        raise ValueError(f"station index {station_index} out of range")
    rng = _station_rng(spec, station_index)
    t = np.arange(spec.duration_hours, dtype=np.float64)

    phase = rng.uniform(0.0, 2.0 * np.pi)
    surge_factor = rng.uniform(0.5, 1.5)
    tide = spec.tide_amplitude_ft * np.sin(
        2.0 * np.pi * t / spec.tide_period_hours + phase
    )
    pulse = spec.surge_peak_ft * surge_factor * np.exp(
        -0.5 * ((t - spec.surge_center_hour) / spec.surge_width_hours) ** 2
    )
    observed = tide + pulse + OBS_NOISE_STD_FT * rng.standard_normal(t.size)

    e = np.zeros(t.size)
    if spec.bias_noise_std_ft > 0.0:
        eta = spec.bias_noise_std_ft * rng.standard_normal(t.size)
        prev = 0.0
        for k in range(t.size):
            prev = spec.bias_ar_coeff * prev + eta[k]
            e[k] = prev
    bias = spec.bias_gain * observed + e
    modeled = observed + bias

    return StationSeries(
        station_id=station_id_for(spec, station_index),
        storm_id=spec.storm_id,
        t0=T0,
        observed=observed,
        modeled=modeled,
    )


def generate_storm(spec: SyntheticStormSpec) -> list[StationSeries]:
    return [generate_station_series(spec, i) for i in range(spec.n_stations)]


def generate_scenario_corpus(specs, out_dir) -> Path:
    """Write one CSV per storm plus the manifest; returns the manifest path.

    Regenerating with the same specs is byte-identical.
    """
    specs = list(specs)
    if len(specs) < 2:
        raise ValueError("need at least two storms (training plus a held-out test)")
    ids = [s.storm_id for s in specs]
    if len(set(ids)) != len(ids):
        raise ValueError("storm ids must be unique")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for spec in specs:
        filename = f"{spec.storm_id}.csv"
        write_storm_csv(out_dir / filename, generate_storm(spec))
        entries.append(
            {
                "storm_id": spec.storm_id,
                "path": filename,
                "name": spec.storm_id,
                "year": T0.year,
                "category": "SYN",
                "n_stations": spec.n_stations,
                "duration_hours": spec.duration_hours,
            }
        )
    write_manifest(out_dir, entries)
    return out_dir / "manifest.json"


def load_storm_specs(path) -> list[SyntheticStormSpec]:
    """Read storm specs from a JSON file: {"storms": [{...spec fields...}]}."""
    with open(path) as fh:
        doc = json.load(fh)
    storms = doc.get("storms")
    if not storms:
        raise ValueError(f"{path}: no storms defined")
    return [SyntheticStormSpec(**entry) for entry in storms]


def dump_storm_specs(specs, path) -> None:
    with open(path, "w") as fh:
        json.dump({"storms": [asdict(s) for s in specs]}, fh, indent=2)
        fh.write("\n")
