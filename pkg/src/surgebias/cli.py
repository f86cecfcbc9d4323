"""Command-line interface.

Verbs: gen-synthetic, train, correct, evaluate, compare-scenarios.
Every command is deterministic given its inputs and seed; all tabular
outputs are CSV with documented headers, and run records are append-only.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from . import metrics as me
from .model import (
    NetworkConfig,
    TrainedModel,
    TrainingConfig,
    assemble_datasets,
    build_network,
    correct_station,
    grid_search_input_window,
    predict_batch,
)
from .nn import load_weights, save_weights
from .pipeline import (
    HOUR,
    ScalerParams,
    build_windowed_dataset,
    clean_series,
    extract_offsets,
    load_manifest,
    load_storm_offsets,
    read_storm_csv,
)
from .synth import generate_scenario_corpus, load_storm_specs
from .wilcoxon import wilcoxon_signed_rank


# ---------------------------------------------------------------------------
# scenario configuration


@dataclass
class ScenarioConfig:
    """One named experiment: training storms, a held-out test storm, sweeps."""

    name: str
    train_storms: list
    test_storm: str
    w_out_list: list = field(default_factory=lambda: [1])
    w_in_candidates: list = field(default_factory=lambda: [15])
    train_fraction: float | None = None
    network: dict = field(default_factory=dict)
    epochs: int = 200
    batch_size: int = 32
    lr: float = 0.001
    seed: int = 0
    max_gap_hours: int = 2

    def validate(self) -> None:
        if not self.train_storms:
            raise ValueError("scenario lists no training storms")
        if self.train_fraction is None:
            if self.test_storm in self.train_storms:
                raise ValueError(
                    f"test storm {self.test_storm!r} listed among training "
                    "storms (leakage)"
                )
        else:
            if self.train_storms != [self.test_storm]:
                raise ValueError(
                    "train_fraction mode requires train_storms == [test_storm] "
                    "(chronological split of a single storm)"
                )
        if not self.w_out_list or not self.w_in_candidates:
            raise ValueError("w_out_list and w_in_candidates must be non-empty")


def load_scenario(path) -> ScenarioConfig:
    with open(path) as fh:
        doc = json.load(fh)
    cfg = ScenarioConfig(**doc)
    cfg.validate()
    return cfg


def scenario_hash(cfg: ScenarioConfig) -> str:
    blob = json.dumps(cfg.__dict__, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# model file helpers


def save_model(path, model: TrainedModel) -> None:
    cfg = model.config
    save_weights(
        path,
        {
            "w_in": cfg.w_in,
            "w_out": cfg.w_out,
            "conv_filters": cfg.conv_filters,
            "conv_kernel": cfg.conv_kernel,
            "lstm1_units": cfg.lstm1_units,
            "lstm2_units": cfg.lstm2_units,
            "dense_units": cfg.dense_units,
        },
        model.params,
        model.scaler.min,
        model.scaler.max,
    )


def load_model(path) -> TrainedModel:
    doc = load_weights(path)
    cfg = NetworkConfig(**doc["config"])
    network = build_network(cfg, seed=0)
    network.set_params(doc["params"])
    scaler = ScalerParams(min=doc["scaler_min"], max=doc["scaler_max"])
    return TrainedModel(config=cfg, network=network, scaler=scaler)


# ---------------------------------------------------------------------------
# commands


def cmd_gen_synthetic(args) -> int:
    specs = load_storm_specs(args.spec_file)
    for spec in specs:
        spec.validate()
    manifest = generate_scenario_corpus(specs, args.out_dir)
    print(f"wrote {len(specs)} storms and {manifest}")
    return 0


def _load_scenario_offsets(scenario: ScenarioConfig, data_dir):
    manifest = load_manifest(data_dir)
    missing = [
        s
        for s in set(scenario.train_storms) | {scenario.test_storm}
        if s not in manifest
    ]
    if missing:
        raise ValueError(f"storms missing from manifest: {sorted(missing)}")
    train_offsets = [
        off
        for storm in scenario.train_storms
        for off in load_storm_offsets(data_dir, storm)
    ]
    test_offsets = load_storm_offsets(data_dir, scenario.test_storm)
    return train_offsets, test_offsets


def cmd_train(args) -> int:
    t_start = time.perf_counter()
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    scenario.validate()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_offsets, test_offsets = _load_scenario_offsets(scenario, args.data_dir)
    train_cfg = TrainingConfig(
        epochs=scenario.epochs,
        batch_size=scenario.batch_size,
        lr=scenario.lr,
        seed=scenario.seed,
    )
    sweep_rows = []  # (w_out, SweepRow)
    outputs = []
    train_hours = None
    for w_out in scenario.w_out_list:
        template = NetworkConfig(
            w_in=max(scenario.w_in_candidates), w_out=w_out, **scenario.network
        )

        def build(w_in, _w_out=w_out):
            return assemble_datasets(
                train_offsets,
                test_offsets,
                w_in,
                _w_out,
                train_fraction=scenario.train_fraction,
                max_gap=scenario.max_gap_hours,
            )

        result = grid_search_input_window(
            scenario.w_in_candidates,
            build,
            template,
            train_cfg,
            threads=args.threads,
            keep_best_model=True,
        )
        if train_hours is None:
            train_hours = build(result.best_w_in).train_hours
        model_path = out_dir / f"{scenario.name}_wout{w_out}.sgcw"
        save_model(model_path, result.best_model)
        outputs.append(str(model_path))
        for row in result.rows:
            sweep_rows.append((w_out, row))
        best = next(r for r in result.rows if r.w_in == result.best_w_in)
        print(
            f"w_out={w_out}: best w_in={result.best_w_in} "
            f"test R2={best.r2_test:.4f} -> {model_path}"
        )

    sweep_path = out_dir / f"{scenario.name}_sweep.csv"
    with open(sweep_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "w_out", "w_in", "r2_test", "train_seconds"])
        for w_out, row in sweep_rows:
            writer.writerow(
                [
                    scenario.name,
                    w_out,
                    row.w_in,
                    "" if row.r2_test is None else repr(row.r2_test),
                    f"{row.train_seconds:.3f}",
                ]
            )
    outputs.append(str(sweep_path))

    record = {
        "scenario": scenario.name,
        "config_hash": scenario_hash(scenario),
        "seed": scenario.seed,
        "train_hours": train_hours,
        "r2_table": [
            {
                "w_out": w_out,
                "w_in": row.w_in,
                "r2": row.r2_test,
                "train_seconds": row.train_seconds,
            }
            for w_out, row in sweep_rows
        ],
        "wall_clock_seconds": time.perf_counter() - t_start,
        "outputs": outputs,
    }
    records_path = out_dir / "run_records.jsonl"
    with open(records_path, "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
    print(f"training hours: {train_hours}; record appended to {records_path}")
    return 0


def cmd_correct(args) -> int:
    model = load_model(args.model)
    storm_id = Path(args.storm_csv).stem
    stations = read_storm_csv(args.storm_csv, storm_id)
    rows = []
    skipped = []
    for station in stations:
        try:
            res = correct_station(
                model,
                station,
                max_gap=args.max_gap,
                overlap_average=args.overlap_average,
            )
        except ValueError as exc:
            skipped.append(station.station_id)
            warnings.warn(str(exc))
            continue
        for k in range(res.hour_index.size):
            ts = station.t0 + int(res.hour_index[k]) * HOUR
            rows.append(
                [
                    res.station_id,
                    ts.strftime("%Y-%m-%dT%H:%M:%SZ"),
                    repr(float(res.observed[k])),
                    repr(float(res.modeled[k])),
                    repr(float(res.corrected[k])),
                ]
            )
    if not rows:
        raise ValueError(
            f"storm too short: no station has {model.config.w_in + model.config.w_out} "
            "contiguous hours"
        )
    with open(args.out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["station_id", "timestamp", "observed_ft", "modeled_ft", "corrected_ft"]
        )
        writer.writerows(rows)
    note = f" ({len(skipped)} stations skipped)" if skipped else ""
    print(f"wrote {len(rows)} corrected hours to {args.out_csv}{note}")
    return 0


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    w_in, w_out = model.config.w_in, model.config.w_out
    storm_id = Path(args.storm_csv).stem
    stations = read_storm_csv(args.storm_csv, storm_id)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    # offset-space accuracy over all stride-1 test windows (scaled units)
    segments = [
        seg
        for st in stations
        for seg in clean_series(extract_offsets(st), max_gap=args.max_gap)
    ]
    test_ds = build_windowed_dataset(segments, model.scaler, w_in, w_out,
                                     label="evaluation windows")
    if len(test_ds) == 0:
        raise ValueError(f"storm too short: no ({w_in}, {w_out}) windows")
    X, Y = test_ds.stacked()
    preds = predict_batch(model, X)
    offset_report = me.metrics_report(Y.reshape(-1), preds.reshape(-1),
                                      label="offsets")
    offset_path = out_dir / "offset_metrics.csv"
    with open(offset_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["w_out", "n", "r2", "mse", "rmse", "mae"])
        writer.writerow(
            [
                w_out,
                offset_report.n,
                repr(offset_report.r2),
                repr(offset_report.mse),
                repr(offset_report.rmse),
                repr(offset_report.mae),
            ]
        )

    # per-station water-level accuracy before/after correction (feet)
    reports = []
    for station in stations:
        try:
            res = correct_station(model, station, max_gap=args.max_gap,
                                  overlap_average=args.overlap_average)
            reports.append(
                me.station_report(station.station_id, res.observed, res.modeled,
                                  res.corrected)
            )
        except ValueError as exc:
            warnings.warn(f"{station.station_id}: {exc}")
    if not reports:
        raise ValueError("no station could be corrected")
    station_path = out_dir / "station_report.csv"
    with open(station_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "station_id", "n_hours",
                "r2_without", "r2_with", "mse_without", "mse_with",
                "rmse_without", "rmse_with", "mae_without", "mae_with",
                "improved",
            ]
        )
        for rep in reports:
            writer.writerow(
                [
                    rep.station_id, rep.without_ml.n,
                    repr(rep.without_ml.r2), repr(rep.with_ml.r2),
                    repr(rep.without_ml.mse), repr(rep.with_ml.mse),
                    repr(rep.without_ml.rmse), repr(rep.with_ml.rmse),
                    repr(rep.without_ml.mae), repr(rep.with_ml.mae),
                    int(rep.improved),
                ]
            )

    pairs, fraction = me.improvement_scatter(reports)
    scatter_path = out_dir / "improvement_scatter.csv"
    with open(scatter_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["station_id", "r2_without", "r2_with"])
        for sid, lo, hi in pairs:
            writer.writerow([sid, repr(lo), repr(hi)])

    summary_path = out_dir / "summary.txt"
    with open(summary_path, "w") as fh:
        fh.write(f"storm: {storm_id}\n")
        fh.write(f"model: w_in={w_in} w_out={w_out}\n")
        fh.write(
            f"offset windows (scaled): n={offset_report.n} "
            f"R2={offset_report.r2:.4f} MSE={offset_report.mse:.6f} "
            f"RMSE={offset_report.rmse:.6f} MAE={offset_report.mae:.6f}\n"
        )
        fh.write(f"stations corrected: {len(reports)}\n")
        fh.write(f"stations improved (R2): {fraction:.3f}\n")
    print(
        f"offset R2={offset_report.r2:.4f}; improved fraction={fraction:.3f}; "
        f"reports in {out_dir}"
    )
    return 0


def _last_records(paths):
    """Latest run record per scenario name across the given JSONL files."""
    records = {}
    for path in paths:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rec = json.loads(line)
                    records[rec["scenario"]] = rec
    return records


def cmd_compare_scenarios(args) -> int:
    records = _last_records(args.records)
    if len(records) < 2:
        raise ValueError(f"need at least two scenarios, found {sorted(records)}")
    # scenario -> w_out -> {w_in: r2}
    tables = {}
    for name, rec in records.items():
        table = {}
        for row in rec["r2_table"]:
            if row["r2"] is None:
                continue
            table.setdefault(row["w_out"], {})[row["w_in"]] = row["r2"]
        tables[name] = table
    names = sorted(tables)
    w_outs = sorted(set.intersection(*(set(t) for t in tables.values())))
    if not w_outs:
        raise ValueError("scenarios share no prediction window")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cmp_path = out_dir / "wilcoxon_comparison.csv"
    with open(cmp_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["scenario_a", "scenario_b", "w_out", "statistic", "p_value",
             "n_effective", "method"]
        )
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                for w_out in w_outs:
                    grid_a = tables[a][w_out]
                    grid_b = tables[b][w_out]
                    if sorted(grid_a) != sorted(grid_b):
                        raise ValueError(
                            f"mismatched w_in grids for w_out={w_out}: "
                            f"{sorted(grid_a)} vs {sorted(grid_b)}"
                        )
                    xs = [grid_a[w] for w in sorted(grid_a)]
                    ys = [grid_b[w] for w in sorted(grid_b)]
                    try:
                        res = wilcoxon_signed_rank(xs, ys)
                        writer.writerow(
                            [a, b, w_out, repr(res.statistic), repr(res.p_value),
                             res.n_effective, res.method]
                        )
                    except ValueError:
                        writer.writerow([a, b, w_out, "", "", 0, "degenerate"])

    box_path = out_dir / "boxplot_data.csv"
    with open(box_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "w_out", "w_in", "r2"])
        for name in names:
            for w_out in sorted(tables[name]):
                for w_in in sorted(tables[name][w_out]):
                    writer.writerow([name, w_out, w_in, repr(tables[name][w_out][w_in])])
    print(f"wrote {cmp_path} and {box_path}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surgebias",
        description="Bias correction of storm-surge forecasts at gauge stations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic storm corpus")
    p.add_argument("spec_file", help="JSON storm-spec file")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("train", help="train models for a scenario (w_in sweep)")
    p.add_argument("scenario", help="scenario config JSON")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario seed")
    p.add_argument("--threads", type=int, default=1,
                   help="parallel sweep candidates")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("correct", help="bias-correct one storm CSV")
    p.add_argument("model", help="SGCW weight file")
    p.add_argument("storm_csv")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--max-gap", type=int, default=2)
    p.add_argument("--overlap-average", action="store_true",
                   help="average overlapping predictions instead of "
                        "non-overlapping emission")
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("evaluate", help="offset metrics and station reports")
    p.add_argument("model", help="SGCW weight file")
    p.add_argument("storm_csv")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--max-gap", type=int, default=2)
    p.add_argument("--overlap-average", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare-scenarios",
                       help="pairwise Wilcoxon tests over run records")
    p.add_argument("records", nargs="+", help="run_records.jsonl files")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_compare_scenarios)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
