"""Regression metrics and before/after-correction station reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _paired(y, y_hat):
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.size != y_hat.size:
        raise ValueError(f"length mismatch: {y.size} vs {y_hat.size}")
    if y.size < 1:
        raise ValueError("need at least one sample")
    return y, y_hat


def mse(y, y_hat) -> float:
    """Average squared difference between real and predicted values."""
    y, y_hat = _paired(y, y_hat)
    d = y - y_hat
    return float(np.mean(d * d))


def rmse(y, y_hat) -> float:
    return float(np.sqrt(mse(y, y_hat)))


def mae(y, y_hat) -> float:
    y, y_hat = _paired(y, y_hat)
    return float(np.mean(np.abs(y - y_hat)))


def r2(y, y_hat) -> float:
    """Coefficient of determination: 1 - SS_res / SS_tot.

    Errors on constant y (zero denominator) so degenerate gauges surface
    explicitly instead of yielding NaN.
    """
    y, y_hat = _paired(y, y_hat)
    if y.size < 2:
        raise ValueError("r2 needs at least two samples")
    y_bar = float(np.mean(y))
    ss_tot = float(np.sum((y - y_bar) ** 2))
    if ss_tot == 0.0:
        raise ValueError("r2 undefined: y is constant")
    ss_res = float(np.sum((y - y_hat) ** 2))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class MetricsReport:
    label: str
    n: int
    r2: float
    mse: float
    rmse: float
    mae: float


def metrics_report(y, y_hat, label: str = "") -> MetricsReport:
    y, y_hat = _paired(y, y_hat)
    return MetricsReport(
        label=label,
        n=int(y.size),
        r2=r2(y, y_hat),
        mse=mse(y, y_hat),
        rmse=rmse(y, y_hat),
        mae=mae(y, y_hat),
    )


@dataclass(frozen=True)
class StationReport:
    """Water-level accuracy at one station, without and with bias correction."""

    station_id: str
    without_ml: MetricsReport
    with_ml: MetricsReport

    @property
    def improved(self) -> bool:
        return self.with_ml.r2 > self.without_ml.r2


def station_report(station_id: str, observed, modeled, corrected) -> StationReport:
    """Side-by-side metrics of modeled and corrected series against observed."""
    observed = np.asarray(observed, dtype=np.float64).ravel()
    modeled = np.asarray(modeled, dtype=np.float64).ravel()
    corrected = np.asarray(corrected, dtype=np.float64).ravel()
    if not (observed.size == modeled.size == corrected.size):
        raise ValueError("observed/modeled/corrected must be aligned")
    return StationReport(
        station_id=station_id,
        without_ml=metrics_report(observed, modeled, label="modeled"),
        with_ml=metrics_report(observed, corrected, label="corrected"),
    )


def improvement_scatter(reports) -> tuple[list[tuple[str, float, float]], float]:
    """Per-station (r2 without, r2 with) pairs and the improved fraction.

    A station counts as improved only when strictly above the x = y line.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one station report")
    pairs = [(r.station_id, r.without_ml.r2, r.with_ml.r2) for r in reports]
    improved = sum(1 for _, lo, hi in pairs if hi > lo)
    return pairs, improved / len(pairs)
