import csv
import hashlib
import json

import pytest

from surgebias.cli import ScenarioConfig, load_model, main, scenario_hash
from surgebias.synth import SyntheticStormSpec, dump_storm_specs


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """Three tiny storms: two for training, one held out."""
    root = tmp_path_factory.mktemp("cli")
    specs = [
        SyntheticStormSpec(storm_id="trainA", n_stations=2, duration_hours=60,
                           seed=1),
        SyntheticStormSpec(storm_id="trainB", n_stations=2, duration_hours=60,
                           seed=2),
        SyntheticStormSpec(storm_id="testC", n_stations=2, duration_hours=60,
                           seed=3),
    ]
    spec_file = root / "specs.json"
    dump_storm_specs(specs, spec_file)
    data_dir = root / "data"
    assert main(["gen-synthetic", str(spec_file), "--out-dir", str(data_dir)]) == 0
    return root, spec_file, data_dir


def scenario_file(root, name="tiny", seed=5, train=("trainA", "trainB"),
                  test="testC", **extra):
    doc = {
        "name": name,
        "train_storms": list(train),
        "test_storm": test,
        "w_out_list": [1],
        "w_in_candidates": [6],
        "network": {"conv_filters": 2, "conv_kernel": 3, "lstm1_units": 4,
                    "lstm2_units": 6, "dense_units": 4},
        "epochs": 3,
        "batch_size": 32,
        "lr": 0.001,
        "seed": seed,
    }
    doc.update(extra)
    path = root / f"scenario_{name}.json"
    path.write_text(json.dumps(doc))
    return path


# ---------------------------------------------------------------------------
# gen-synthetic


def test_gen_synthetic_idempotent(corpus):
    root, spec_file, data_dir = corpus
    before = {p.name: p.read_bytes() for p in data_dir.iterdir()}
    assert main(["gen-synthetic", str(spec_file), "--out-dir", str(data_dir)]) == 0
    after = {p.name: p.read_bytes() for p in data_dir.iterdir()}
    assert before == after


def test_gen_synthetic_rejects_short_duration(tmp_path, capsys):
    bad = [SyntheticStormSpec(storm_id="a", duration_hours=10),
           SyntheticStormSpec(storm_id="b", duration_hours=50)]
    spec_file = tmp_path / "bad.json"
    dump_storm_specs(bad, spec_file)
    assert main(["gen-synthetic", str(spec_file), "--out-dir", str(tmp_path)]) != 0
    assert "duration too short" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# train


def test_train_writes_model_sweep_and_record(corpus):
    root, _, data_dir = corpus
    out_dir = root / "out_main"
    sc = scenario_file(root, name="main", w_out_list=[1, 2],
                       w_in_candidates=[5, 6])
    assert main(["train", str(sc), "--data-dir", str(data_dir),
                 "--out-dir", str(out_dir)]) == 0
    assert (out_dir / "main_wout1.sgcw").exists()
    assert (out_dir / "main_wout2.sgcw").exists()
    with open(out_dir / "main_sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {(r["w_out"], r["w_in"]) for r in rows} == {
        ("1", "5"), ("1", "6"), ("2", "5"), ("2", "6")
    }
    records = [json.loads(line)
               for line in (out_dir / "run_records.jsonl").read_text().splitlines()]
    assert len(records) == 1
    rec = records[0]
    # cleaned hourly training offsets: 2 storms x 2 stations x 60 h
    assert rec["train_hours"] == 240
    assert len(rec["r2_table"]) == 4
    model = load_model(out_dir / "main_wout1.sgcw")
    assert model.config.w_out == 1


def test_train_rerun_same_seed_identical_weights(corpus):
    root, _, data_dir = corpus
    sc = scenario_file(root, name="det", seed=7)
    hashes = []
    for sub in ("d1", "d2"):
        out_dir = root / sub
        assert main(["train", str(sc), "--data-dir", str(data_dir),
                     "--out-dir", str(out_dir)]) == 0
        digest = hashlib.sha256((out_dir / "det_wout1.sgcw").read_bytes())
        hashes.append(digest.hexdigest())
    assert hashes[0] == hashes[1]


def test_train_records_append_not_overwrite(corpus):
    root, _, data_dir = corpus
    out_dir = root / "out_append"
    sc = scenario_file(root, name="app")
    for _ in range(2):
        assert main(["train", str(sc), "--data-dir", str(data_dir),
                     "--out-dir", str(out_dir)]) == 0
    lines = (out_dir / "run_records.jsonl").read_text().splitlines()
    assert len(lines) == 2


def test_train_refuses_test_storm_in_training(corpus, capsys):
    root, _, data_dir = corpus
    sc = scenario_file(root, name="leak", train=("trainA", "testC"))
    assert main(["train", str(sc), "--data-dir", str(data_dir),
                 "--out-dir", str(root / "x")]) != 0
    assert "leakage" in capsys.readouterr().err


def test_train_split_mode_single_storm(corpus):
    root, _, data_dir = corpus
    sc = scenario_file(root, name="split", train=("testC",), test="testC",
                       train_fraction=0.75)
    out_dir = root / "out_split"
    assert main(["train", str(sc), "--data-dir", str(data_dir),
                 "--out-dir", str(out_dir)]) == 0
    rec = json.loads((out_dir / "run_records.jsonl").read_text().splitlines()[0])
    assert rec["train_hours"] == 2 * 45  # 75% of 60 hours, 2 stations


def test_train_missing_storm_fails(corpus, capsys):
    root, _, data_dir = corpus
    sc = scenario_file(root, name="missing", train=("nosuch",))
    assert main(["train", str(sc), "--data-dir", str(data_dir),
                 "--out-dir", str(root / "y")]) != 0
    assert "missing from manifest" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# correct / evaluate


@pytest.fixture(scope="module")
def trained(corpus):
    root, _, data_dir = corpus
    out_dir = root / "trained"
    sc = scenario_file(root, name="base", seed=9)
    assert main(["train", str(sc), "--data-dir", str(data_dir),
                 "--out-dir", str(out_dir)]) == 0
    return out_dir / "base_wout1.sgcw"


def test_correct_row_count_and_columns(corpus, trained):
    root, _, data_dir = corpus
    out_csv = root / "corrected.csv"
    assert main(["correct", str(trained), str(data_dir / "testC.csv"),
                 "--out-csv", str(out_csv)]) == 0
    with open(out_csv) as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"station_id", "timestamp", "observed_ft",
                            "modeled_ft", "corrected_ft"}
    # w_out=1: per station one row per origin, T - w_in of them
    per_station = {}
    for r in rows:
        per_station.setdefault(r["station_id"], 0)
        per_station[r["station_id"]] += 1
    assert per_station == {"testC-st000": 54, "testC-st001": 54}


def test_correct_missing_model(corpus, capsys):
    root, _, data_dir = corpus
    assert main(["correct", str(root / "nope.sgcw"), str(data_dir / "testC.csv"),
                 "--out-csv", str(root / "o.csv")]) != 0


def test_correct_storm_too_short(corpus, trained, tmp_path, capsys):
    path = tmp_path / "short.csv"
    lines = ["station_id,timestamp,observed_ft,modeled_ft"]
    for h in range(5):
        lines.append(f"s1,2000-01-01T{h:02d}:00:00Z,1.{h},1.{h}")
    path.write_text("\n".join(lines) + "\n")
    assert main(["correct", str(trained), str(path),
                 "--out-csv", str(tmp_path / "o.csv")]) != 0
    assert "storm too short" in capsys.readouterr().err


def test_evaluate_reports(corpus, trained):
    root, _, data_dir = corpus
    out_dir = root / "report"
    assert main(["evaluate", str(trained), str(data_dir / "testC.csv"),
                 "--out-dir", str(out_dir)]) == 0
    with open(out_dir / "offset_metrics.csv") as fh:
        (row,) = list(csv.DictReader(fh))
    assert row["w_out"] == "1"
    assert int(row["n"]) == 2 * (60 - 6 - 1 + 1)
    with open(out_dir / "station_report.csv") as fh:
        stations = list(csv.DictReader(fh))
    assert len(stations) == 2
    assert {"r2_without", "r2_with", "improved"} <= set(stations[0])
    with open(out_dir / "improvement_scatter.csv") as fh:
        scatter = list(csv.DictReader(fh))
    assert len(scatter) == 2
    assert (out_dir / "summary.txt").read_text().startswith("storm: testC")


# ---------------------------------------------------------------------------
# compare-scenarios


def test_compare_scenarios(corpus):
    root, _, data_dir = corpus
    recs = []
    for name, seed in (("cmpA", 11), ("cmpB", 12)):
        out_dir = root / f"out_{name}"
        sc = scenario_file(root, name=name, seed=seed,
                           w_in_candidates=[5, 6, 7])
        assert main(["train", str(sc), "--data-dir", str(data_dir),
                     "--out-dir", str(out_dir)]) == 0
        recs.append(str(out_dir / "run_records.jsonl"))
    cmp_dir = root / "cmp"
    assert main(["compare-scenarios", *recs, "--out-dir", str(cmp_dir)]) == 0
    with open(cmp_dir / "wilcoxon_comparison.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert rows[0]["scenario_a"] == "cmpA" and rows[0]["scenario_b"] == "cmpB"
    assert rows[0]["method"] in ("exact", "degenerate")
    with open(cmp_dir / "boxplot_data.csv") as fh:
        box = list(csv.DictReader(fh))
    assert len(box) == 6  # 2 scenarios x 3 w_in candidates


def test_compare_needs_two_scenarios(corpus, capsys):
    root, _, data_dir = corpus
    rec = str(root / "out_cmpA" / "run_records.jsonl")
    assert main(["compare-scenarios", rec, "--out-dir", str(root / "c2")]) != 0
    assert "at least two scenarios" in capsys.readouterr().err


def test_compare_mismatched_grids(corpus, capsys):
    root, _, data_dir = corpus
    out_dir = root / "out_grid"
    sc = scenario_file(root, name="grid", seed=13, w_in_candidates=[5])
    assert main(["train", str(sc), "--data-dir", str(data_dir),
                 "--out-dir", str(out_dir)]) == 0
    assert main([
        "compare-scenarios",
        str(root / "out_cmpA" / "run_records.jsonl"),
        str(out_dir / "run_records.jsonl"),
        "--out-dir", str(root / "c3"),
    ]) != 0
    assert "mismatched w_in grids" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# scenario config validation


def test_scenario_validation_rules():
    with pytest.raises(ValueError, match="leakage"):
        ScenarioConfig(name="x", train_storms=["a"], test_storm="a").validate()
    with pytest.raises(ValueError, match="train_fraction mode"):
        ScenarioConfig(name="x", train_storms=["a", "b"], test_storm="a",
                       train_fraction=0.75).validate()
    # the single-storm chronological split is the one sanctioned overlap
    ScenarioConfig(name="x", train_storms=["a"], test_storm="a",
                   train_fraction=0.75).validate()


def test_scenario_hash_changes_with_seed():
    a = ScenarioConfig(name="x", train_storms=["a"], test_storm="b", seed=1)
    b = ScenarioConfig(name="x", train_storms=["a"], test_storm="b", seed=2)
    assert scenario_hash(a) != scenario_hash(b)
