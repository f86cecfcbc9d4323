"""Network assembly, training, offset prediction and bias correction.

The network is a fixed stack: temporal convolution (ReLU) feeding two LSTM
layers, a tanh dense layer applied per step, a flatten, and a linear output
layer whose width is the prediction window. Training minimizes MSE over the
target windows with Adam.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .metrics import r2
from .nn import (
    AdamState,
    Conv1DLayer,
    DenseLayer,
    FlattenLayer,
    LstmLayer,
    Network,
    adam_update,
)
from .pipeline import (
    OffsetSeries,
    ScalerParams,
    StationSeries,
    WindowedDataset,
    build_windowed_dataset,
    chronological_split,
    clean_series,
    extract_offsets,
    fit_scaler,
    scale,
    unscale,
)

PREDICT_CHUNK = 1024


@dataclass(frozen=True)
class NetworkConfig:
    """Layer sizes; defaults are the full-size forecasting stack."""

    w_in: int
    w_out: int
    conv_filters: int = 32
    conv_kernel: int = 3
    lstm1_units: int = 128
    lstm2_units: int = 256
    dense_units: int = 128

    def __post_init__(self):
        if self.w_in <= self.conv_kernel - 1:
            raise ValueError(
                f"w_in={self.w_in} too short for kernel {self.conv_kernel}"
            )
        if self.w_out < 1:
            raise ValueError("w_out must be >= 1")
        if min(self.conv_filters, self.conv_kernel, self.lstm1_units,
               self.lstm2_units, self.dense_units) < 1:
            raise ValueError("all layer sizes must be positive")

    @property
    def conv_out_len(self) -> int:
        return self.w_in - self.conv_kernel + 1


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 200
    batch_size: int = 32
    lr: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


def build_network(config: NetworkConfig, seed: int) -> Network:
    """Deterministically initialized network for the given configuration."""
    rng = np.random.default_rng(seed)
    layers = [
        Conv1DLayer(1, config.conv_filters, config.conv_kernel),
        LstmLayer(config.conv_filters, config.lstm1_units),
        LstmLayer(config.lstm1_units, config.lstm2_units),
        DenseLayer(config.lstm2_units, config.dense_units, act="tanh"),
        FlattenLayer(),
        DenseLayer(config.conv_out_len * config.dense_units, config.w_out,
                   act="linear"),
    ]
    for layer in layers:
        if hasattr(layer, "init_params"):
            layer.init_params(rng)
    return Network(layers)


@dataclass
class TrainedModel:
    config: NetworkConfig
    network: Network
    scaler: ScalerParams
    training_loss_curve: list = field(default_factory=list)

    @property
    def params(self) -> np.ndarray:
        return self.network.get_params()


def _epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(n)


def train(dataset: WindowedDataset, net_cfg: NetworkConfig,
          train_cfg: TrainingConfig) -> TrainedModel:
    """Train on a windowed dataset; fully deterministic for a fixed seed.

    The shuffle order of each epoch is derived from (seed, epoch), the last
    short batch is kept, and the per-epoch mean MSE is recorded.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if dataset.w_in != net_cfg.w_in or dataset.w_out != net_cfg.w_out:
        raise ValueError(
            f"dataset windows ({dataset.w_in}, {dataset.w_out}) do not match "
            f"network config ({net_cfg.w_in}, {net_cfg.w_out})"
        )
    X, Y = dataset.stacked()
    n = X.shape[0]
    network = build_network(net_cfg, train_cfg.seed)
    params = network.get_params()
    adam = AdamState(n_params=params.size, lr=train_cfg.lr)
    curve = []
    for epoch in range(train_cfg.epochs):
        order = _epoch_permutation(train_cfg.seed, epoch, n)
        total = 0.0
        for start in range(0, n, train_cfg.batch_size):
            idx = order[start : start + train_cfg.batch_size]
            loss, grad = network.loss_and_grad(X[idx], Y[idx])
            if not math.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch offset {start}: "
                    f"{loss}; aborting training"
                )
            total += loss * idx.size
            params, adam = adam_update(adam, params, grad)
            network.set_params(params)
        curve.append(total / n)
    return TrainedModel(
        config=net_cfg,
        network=network,
        scaler=dataset.scaler,
        training_loss_curve=curve,
    )


def predict_offsets(model: TrainedModel, input_window) -> np.ndarray:
    """Predicted offset window (scaled units) for one input window."""
    x = np.asarray(input_window, dtype=np.float64).reshape(-1)
    if x.size != model.config.w_in:
        raise ValueError(f"expected input of length {model.config.w_in}, got {x.size}")
    out = model.network.forward(x.reshape(1, -1, 1))
    return out[0]


def predict_batch(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Forward an (N, w_in, 1) batch in chunks; returns (N, w_out)."""
    X = np.asarray(X, dtype=np.float64)
    outs = [
        model.network.forward(X[i : i + PREDICT_CHUNK])
        for i in range(0, X.shape[0], PREDICT_CHUNK)
    ]
    return np.concatenate(outs, axis=0)


def apply_bias_correction(modeled_ft, predicted_offsets_scaled,
                          scaler: ScalerParams) -> np.ndarray:
    """Corrected water level: modeled minus the predicted offset (in feet).

    A perfect offset prediction therefore returns the observed series.
    """
    modeled_ft = np.asarray(modeled_ft, dtype=np.float64).ravel()
    predicted = np.asarray(predicted_offsets_scaled, dtype=np.float64).ravel()
    if modeled_ft.size != predicted.size:
        raise ValueError(
            f"misaligned series: {modeled_ft.size} modeled vs "
            f"{predicted.size} predicted hours"
        )
    return modeled_ft - unscale(scaler, predicted)


# ---------------------------------------------------------------------------
# rolling correction over a station


@dataclass
class CorrectionResult:
    """Corrected hours of one station, indexed into the original series."""

    station_id: str
    hour_index: np.ndarray
    observed: np.ndarray
    modeled: np.ndarray
    corrected: np.ndarray


def correct_station(model: TrainedModel, station: StationSeries,
                    max_gap: int = 2, overlap_average: bool = False) -> CorrectionResult:
    """Roll the model over one station and bias-correct the modeled series.

    Prediction origins advance by w_out (no overlap) by default, so each
    corrected hour comes from exactly one forward pass; with
    ``overlap_average`` origins advance hourly and overlapping predictions
    for the same hour are averaged.

    Hours whose original observed or modeled value is missing (short gaps
    interpolated during cleaning) are predicted over but not emitted: there
    is no physics output to correct there.
    """
    w_in, w_out = model.config.w_in, model.config.w_out
    offsets = extract_offsets(station)
    segments = clean_series(offsets, max_gap=max_gap)
    if not any(len(seg) >= w_in + w_out for seg in segments):
        raise ValueError(
            f"{station.station_id}: no contiguous stretch of "
            f"{w_in + w_out} hours to correct"
        )
    idx_parts, corr_parts = [], []
    for seg in segments:
        T = len(seg)
        if T < w_in + w_out:
            continue
        scaled = scale(model.scaler, seg.values)
        origins = range(w_in, T - w_out + 1, 1 if overlap_average else w_out)
        X = np.stack([scaled[o - w_in : o] for o in origins]).reshape(-1, w_in, 1)
        preds = predict_batch(model, X)
        if overlap_average:
            acc = np.zeros(T)
            cnt = np.zeros(T)
            for row, o in enumerate(origins):
                acc[o : o + w_out] += preds[row]
                cnt[o : o + w_out] += 1.0
            covered = cnt > 0
            local = np.nonzero(covered)[0]
            pred_scaled = acc[covered] / cnt[covered]
        else:
            local = np.concatenate([np.arange(o, o + w_out) for o in origins])
            pred_scaled = preds.reshape(-1)
        abs_idx = seg.start_index + local
        present = np.isfinite(station.observed[abs_idx]) & np.isfinite(
            station.modeled[abs_idx]
        )
        abs_idx = abs_idx[present]
        if abs_idx.size == 0:
            continue
        corrected = apply_bias_correction(station.modeled[abs_idx],
                                          pred_scaled[present], model.scaler)
        idx_parts.append(abs_idx)
        corr_parts.append(corrected)
    if not idx_parts:
        raise ValueError(
            f"{station.station_id}: no original hours to emit after correction"
        )
    hour_index = np.concatenate(idx_parts)
    order = np.argsort(hour_index, kind="stable")
    hour_index = hour_index[order]
    corrected = np.concatenate(corr_parts)[order]
    return CorrectionResult(
        station_id=station.station_id,
        hour_index=hour_index,
        observed=station.observed[hour_index],
        modeled=station.modeled[hour_index],
        corrected=corrected,
    )


# ---------------------------------------------------------------------------
# scenario datasets and the input-window sweep


@dataclass
class ScenarioDatasets:
    train: WindowedDataset
    test: WindowedDataset
    train_hours: int  # total hourly offsets used for training (post-cleaning)


def assemble_datasets(train_offsets: list[OffsetSeries],
                      test_offsets: list[OffsetSeries],
                      w_in: int, w_out: int,
                      train_fraction: float | None = None,
                      max_gap: int = 2) -> ScenarioDatasets:
    """Clean, fit the scaler on training data only, scale, and window.

    With ``train_fraction`` set, ``train_offsets`` and ``test_offsets`` must
    be the same single storm: each station series is split chronologically
    and the sides are windowed separately, so no window crosses the cut.
    """
    if train_fraction is not None:
        train_keys = {(o.storm_id, o.station_id) for o in train_offsets}
        test_keys = {(o.storm_id, o.station_id) for o in test_offsets}
        if train_keys != test_keys or len({k[0] for k in train_keys}) != 1:
            raise ValueError(
                "train_fraction mode splits one storm chronologically: "
                "train and test series must be the same single storm"
            )
        train_segments, test_segments = [], []
        for off in train_offsets:
            head, tail = chronological_split(off, train_fraction)
            train_segments.extend(clean_series(head, max_gap=max_gap))
            test_segments.extend(clean_series(tail, max_gap=max_gap))
    else:
        train_keys = {(o.storm_id, o.station_id) for o in train_offsets}
        test_keys = {(o.storm_id, o.station_id) for o in test_offsets}
        if train_keys & test_keys:
            raise ValueError("test series present in training set (leakage)")
        train_segments = [
            seg for off in train_offsets for seg in clean_series(off, max_gap=max_gap)
        ]
        test_segments = [
            seg for off in test_offsets for seg in clean_series(off, max_gap=max_gap)
        ]
    scaler = fit_scaler([seg.values for seg in train_segments])
    train_ds = build_windowed_dataset(train_segments, scaler, w_in, w_out,
                                      label="training set")
    test_ds = build_windowed_dataset(test_segments, scaler, w_in, w_out,
                                     label="test set")
    return ScenarioDatasets(
        train=train_ds,
        test=test_ds,
        train_hours=sum(len(seg) for seg in train_segments),
    )


def evaluate_offset_r2(model: TrainedModel, test_ds: WindowedDataset) -> float:
    """R^2 of pooled predicted vs. real offset windows on the test set."""
    X, Y = test_ds.stacked()
    preds = predict_batch(model, X)
    return r2(Y.reshape(-1), preds.reshape(-1))


@dataclass(frozen=True)
class SweepRow:
    w_in: int
    r2_test: float | None
    train_seconds: float
    error: str | None = None


@dataclass
class GridSearchResult:
    best_w_in: int
    rows: list  # SweepRow per candidate, in candidate order
    best_model: TrainedModel | None = None


def grid_search_input_window(candidates, dataset_builder,
                             net_cfg_template: NetworkConfig,
                             train_cfg: TrainingConfig,
                             threads: int = 1,
                             keep_best_model: bool = False) -> GridSearchResult:
    """Train one model per input-window candidate and pick the best test R^2.

    ``dataset_builder(w_in)`` must return a ScenarioDatasets. Ties break
    toward the smaller window (cheaper model at equal skill). Candidates may
    run in parallel threads; each training is independent and seeded, so the
    result does not depend on the thread count.
    """
    candidates = sorted(set(int(c) for c in candidates))
    if not candidates:
        raise ValueError("no input-window candidates")

    def run(w_in: int):
        start = time.perf_counter()
        try:
            ds = dataset_builder(w_in)
            cfg = replace(net_cfg_template, w_in=w_in)
            if len(ds.train) == 0 or len(ds.test) == 0:
                raise ValueError("empty train or test window set")
            model = train(ds.train, cfg, train_cfg)
            score = evaluate_offset_r2(model, ds.test)
        except (ValueError, RuntimeError) as exc:
            return SweepRow(w_in=w_in, r2_test=None,
                            train_seconds=time.perf_counter() - start,
                            error=str(exc)), None
        return SweepRow(w_in=w_in, r2_test=score,
                        train_seconds=time.perf_counter() - start), model

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, candidates))
    else:
        results = [run(w) for w in candidates]

    rows = [row for row, _ in results]
    best_row, best_model = None, None
    for row, model in results:
        if row.r2_test is None:
            warnings.warn(f"w_in={row.w_in} failed: {row.error}")
            continue
        if best_row is None or row.r2_test > best_row.r2_test:
            best_row, best_model = row, model
    if best_row is None:
        raise RuntimeError("every input-window candidate failed")
    return GridSearchResult(
        best_w_in=best_row.w_in,
        rows=rows,
        best_model=best_model if keep_best_model else None,
    )
