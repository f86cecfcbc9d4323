"""Gauge-station data pipeline.

Takes aligned hourly observed/modeled water levels per station, derives the
offset series (modeled minus observed, in feet), cleans gaps, min-max scales
on training data only, and cuts sliding windows for supervised learning.

Offsets are the learning target throughout: a model that predicts the offset
lets the physics output be corrected by simple subtraction.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

HOUR = timedelta(hours=1)


# ---------------------------------------------------------------------------
# domain types


@dataclass
class StationSeries:
    """Hourly observed/modeled water levels (feet) for one station of one storm.

    Missing hours hold NaN in both arrays' positions where the value is absent.
    """

    station_id: str
    storm_id: str
    t0: datetime
    observed: np.ndarray
    modeled: np.ndarray

    def __post_init__(self):
        self.observed = np.asarray(self.observed, dtype=np.float64)
        self.modeled = np.asarray(self.modeled, dtype=np.float64)
        if self.observed.shape != self.modeled.shape or self.observed.ndim != 1:
            raise ValueError("observed/modeled must be 1-d arrays of equal length")


@dataclass
class OffsetSeries:
    """Hourly offsets (modeled - observed, feet) with gap bookkeeping.

    ``start_index`` is the hour offset of ``values[0]`` from the original
    station series start; cleaning and splitting preserve it so windows can
    be traced back to absolute hours.
    """

    station_id: str
    storm_id: str
    t0: datetime
    values: np.ndarray
    gap_mask: np.ndarray
    start_index: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.gap_mask = np.asarray(self.gap_mask, dtype=bool)
        if self.values.shape != self.gap_mask.shape or self.values.ndim != 1:
            raise ValueError("values/gap_mask must be 1-d arrays of equal length")

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class ScalerParams:
    """Min-max scaler parameters; fitted on training data only."""

    min: float
    max: float

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise ValueError("scaler bounds must be finite")
        if self.max < self.min:
            raise ValueError("scaler max must be >= min")


@dataclass(slots=True)
class WindowedSample:
    """One (input window, target window) pair with provenance."""

    input: np.ndarray
    target: np.ndarray
    station_id: str
    storm_id: str
    t_index: int


@dataclass
class WindowedDataset:
    samples: list = field(default_factory=list)
    scaler: ScalerParams | None = None
    w_in: int = 0
    w_out: int = 0

    def __len__(self) -> int:
        return len(self.samples)

    def stacked(self):
        """Samples as (X, Y) arrays shaped (N, w_in, 1) and (N, w_out)."""
        if not self.samples:
            raise ValueError("empty dataset")
        X = np.stack([s.input for s in self.samples]).reshape(-1, self.w_in, 1)
        Y = np.stack([s.target for s in self.samples])
        return X, Y


# ---------------------------------------------------------------------------
# offsets


def extract_offsets(series: StationSeries) -> OffsetSeries:
    """Offset series: modeled minus observed, gap-masked where either is missing."""
    both = np.isfinite(series.observed) & np.isfinite(series.modeled)
    if not both.any():
        raise ValueError(
            f"{series.storm_id}/{series.station_id}: no overlapping observed/modeled hours"
        )
    values = np.where(both, series.modeled - series.observed, np.nan)
    return OffsetSeries(
        station_id=series.station_id,
        storm_id=series.storm_id,
        t0=series.t0,
        values=values,
        gap_mask=~both,
    )


def clean_series(offsets: OffsetSeries, max_gap: int = 2) -> list[OffsetSeries]:
    """Split at long gaps, linearly interpolate short interior ones.

    Gaps of at most ``max_gap`` hours with valid data on both sides are
    filled by linear interpolation; longer gaps (and leading/trailing ones)
    split the series. Returned segments are contiguous and gap-free.
    """
    values = offsets.values.copy()
    gaps = offsets.gap_mask.copy()
    n = values.size
    # interpolate short interior gaps
    i = 0
    while i < n:
        if not gaps[i]:
            i += 1
            continue
        j = i
        while j < n and gaps[j]:
            j += 1
        if i > 0 and j < n and (j - i) <= max_gap:
            left, right = values[i - 1], values[j]
            for k in range(i, j):
                frac = (k - i + 1) / (j - i + 1)
                values[k] = left + frac * (right - left)
            gaps[i:j] = False
        i = j
    # split on the remaining gaps
    segments = []
    i = 0
    while i < n:
        if gaps[i]:
            i += 1
            continue
        j = i
        while j < n and not gaps[j]:
            j += 1
        segments.append(
            OffsetSeries(
                station_id=offsets.station_id,
                storm_id=offsets.storm_id,
                t0=offsets.t0,
                values=values[i:j].copy(),
                gap_mask=np.zeros(j - i, dtype=bool),
                start_index=offsets.start_index + i,
            )
        )
        i = j
    return segments


# ---------------------------------------------------------------------------
# scaling


def fit_scaler(value_arrays) -> ScalerParams:
    """Min/max over all finite values in the given arrays (training data only)."""
    lo, hi = math.inf, -math.inf
    for arr in value_arrays:
        arr = np.asarray(arr, dtype=np.float64)
        finite = arr[np.isfinite(arr)]
        if finite.size:
            lo = min(lo, float(finite.min()))
            hi = max(hi, float(finite.max()))
    if not math.isfinite(lo):
        raise ValueError("cannot fit scaler: no finite values")
    return ScalerParams(min=lo, max=hi)


def scale(params: ScalerParams, x):
    """Map feet to the unit interval of the training range (no clamping)."""
    x = np.asarray(x, dtype=np.float64)
    span = params.max - params.min
    if span == 0.0:
        out = np.zeros_like(x)
    else:
        out = (x - params.min) / span
    return float(out) if out.ndim == 0 else out


def unscale(params: ScalerParams, y):
    """Exact inverse of ``scale`` (degenerate scalers map everything to min)."""
    y = np.asarray(y, dtype=np.float64)
    span = params.max - params.min
    if span == 0.0:
        out = np.full_like(y, params.min)
    else:
        out = y * span + params.min
    return float(out) if out.ndim == 0 else out


def scale_segment(params: ScalerParams, segment: OffsetSeries) -> OffsetSeries:
    return OffsetSeries(
        station_id=segment.station_id,
        storm_id=segment.storm_id,
        t0=segment.t0,
        values=scale(params, segment.values),
        gap_mask=segment.gap_mask.copy(),
        start_index=segment.start_index,
    )


# ---------------------------------------------------------------------------
# windowing and splitting


def make_windows(segment: OffsetSeries, w_in: int, w_out: int,
                 stride: int = 1) -> list[WindowedSample]:
    """Sliding (input, target) pairs from one contiguous gap-free segment.

    At stride 1 this yields exactly max(0, T - w_in - w_out + 1) samples;
    shorter segments yield none.
    """
    if w_in < 1 or w_out < 1 or stride < 1:
        raise ValueError("w_in, w_out and stride must be >= 1")
    if segment.gap_mask.any():
        raise ValueError("make_windows requires a gap-free segment; clean first")
    values = segment.values
    n = values.size - w_in - w_out + 1
    if n <= 0:
        return []
    sid, oid, base = segment.station_id, segment.storm_id, segment.start_index
    return [
        WindowedSample(
            input=values[t : t + w_in],
            target=values[t + w_in : t + w_in + w_out],
            station_id=sid,
            storm_id=oid,
            t_index=base + t,
        )
        for t in range(0, n, stride)
    ]


def chronological_split(offsets: OffsetSeries, train_fraction: float):
    """Earliest floor(fraction*T) hours to train, remainder to test.

    Windows are built per side after the cut, so no sample can straddle it.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n = len(offsets)
    n_train = int(math.floor(train_fraction * n))
    head = OffsetSeries(
        station_id=offsets.station_id,
        storm_id=offsets.storm_id,
        t0=offsets.t0,
        values=offsets.values[:n_train].copy(),
        gap_mask=offsets.gap_mask[:n_train].copy(),
        start_index=offsets.start_index,
    )
    tail = OffsetSeries(
        station_id=offsets.station_id,
        storm_id=offsets.storm_id,
        t0=offsets.t0,
        values=offsets.values[n_train:].copy(),
        gap_mask=offsets.gap_mask[n_train:].copy(),
        start_index=offsets.start_index + n_train,
    )
    return head, tail


def build_windowed_dataset(segments, scaler: ScalerParams, w_in: int, w_out: int,
                           stride: int = 1, label: str = "") -> WindowedDataset:
    """Scale cleaned segments and pool their windows into one dataset.

    Sample order is deterministic: stable sort by (storm, station, start hour).
    """
    samples = []
    for seg in segments:
        samples.extend(make_windows(scale_segment(scaler, seg), w_in, w_out, stride))
    samples.sort(key=lambda s: (s.storm_id, s.station_id, s.t_index))
    if not samples and label:
        warnings.warn(f"{label}: no windows (segments shorter than w_in + w_out)")
    return WindowedDataset(samples=samples, scaler=scaler, w_in=w_in, w_out=w_out)


# ---------------------------------------------------------------------------
# CSV and manifest I/O

CSV_HEADER = ["station_id", "timestamp", "observed_ft", "modeled_ft"]


def _format_ts(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_ts(text: str) -> datetime:
    t = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def write_storm_csv(path, series_list) -> None:
    """Write one storm's stations to CSV; missing values become empty fields.

    Floats are written with repr so a read round-trips bit-exactly.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for series in series_list:
            for k in range(series.observed.size):
                obs, mod = series.observed[k], series.modeled[k]
                writer.writerow(
                    [
                        series.station_id,
                        _format_ts(series.t0 + k * HOUR),
                        repr(float(obs)) if np.isfinite(obs) else "",
                        repr(float(mod)) if np.isfinite(mod) else "",
                    ]
                )


def read_storm_csv(path, storm_id: str) -> list[StationSeries]:
    """Parse a storm CSV into per-station hourly series.

    Rows of one station must be strictly increasing in time and land on the
    hourly grid anchored at the station's first timestamp; absent hours in
    between become NaN.
    """
    rows_by_station: dict[str, list[tuple[datetime, float, float]]] = {}
    order: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: expected header {CSV_HEADER}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c for c in row):
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 columns")
            sid, ts, obs, mod = row
            t = _parse_ts(ts)
            obs_v = float(obs) if obs != "" else math.nan
            mod_v = float(mod) if mod != "" else math.nan
            if sid not in rows_by_station:
                rows_by_station[sid] = []
                order.append(sid)
            rows_by_station[sid].append((t, obs_v, mod_v))

    out = []
    for sid in order:
        rows = rows_by_station[sid]
        t0 = rows[0][0]
        last = None
        indices = []
        for t, _, _ in rows:
            delta = (t - t0).total_seconds()
            if delta % 3600 != 0:
                raise ValueError(f"{path}: {sid}: timestamp {t} off the hourly grid")
            idx = int(delta // 3600)
            if last is not None and idx <= last:
                raise ValueError(f"{path}: {sid}: timestamps not strictly increasing")
            indices.append(idx)
            last = idx
        n = indices[-1] + 1
        observed = np.full(n, np.nan)
        modeled = np.full(n, np.nan)
        for idx, (_, obs_v, mod_v) in zip(indices, rows):
            observed[idx] = obs_v
            modeled[idx] = mod_v
        out.append(StationSeries(sid, storm_id, t0, observed, modeled))
    return out


MANIFEST_NAME = "manifest.json"


def write_manifest(data_dir, storms: list[dict]) -> None:
    """Storm manifest: storm_id -> CSV path plus name/year/category metadata."""
    path = Path(data_dir) / MANIFEST_NAME
    with open(path, "w") as fh:
        json.dump({"storms": storms}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(data_dir) -> dict[str, dict]:
    path = Path(data_dir) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {data_dir}")
    with open(path) as fh:
        doc = json.load(fh)
    out = {}
    for entry in doc.get("storms", []):
        entry = dict(entry)
        entry["path"] = str(Path(data_dir) / entry["path"])
        out[entry["storm_id"]] = entry
    return out


def load_storm_offsets(data_dir, storm_id: str) -> list[OffsetSeries]:
    """All station offset series of one storm, via the manifest."""
    manifest = load_manifest(data_dir)
    if storm_id not in manifest:
        raise KeyError(f"storm {storm_id!r} not in manifest")
    series = read_storm_csv(manifest[storm_id]["path"], storm_id)
    return [extract_offsets(s) for s in series]
