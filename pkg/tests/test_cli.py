import json

import pytest

import creditarf
from conftest import write_mini_fixture
from dataset import META_COLUMNS, RATIO_COLUMNS, DatasetStore
from errors import EXIT_INPUT, EXIT_MODE, EXIT_NUMERIC, EXIT_OK, NumericError

TINY_RUN = {
    "seed": 7,
    "fnf": {"output_dim": 8, "cnn_channels": [4, 8]},
    "arf": {"embedding_dim": 8, "att_dim": 4, "heads": 2, "output_dim": 16, "blocks": 1},
    "crp": {"hidden": [16], "adapter_dim": 8},
    "train": {"epochs": 3, "batch_size": 8},
}


def _write_json(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def run_pipeline(root, seed=7, run=None):
    """synth -> ingest -> embed -> train -> eval ; rend le répertoire d'exécution."""
    root.mkdir(parents=True, exist_ok=True)
    config = _write_json(root / "run.json", run or TINY_RUN)
    spec = _write_json(root / "synth.json", {"samples_per_class": 4, "sentences_per_report": 4})
    data, store, run_dir = root / "data", root / "store", root / "run"
    common = ["--config", config, "--seed", str(seed)]
    assert creditarf.main(["synth", "--spec", spec, "--out", str(data)] + common) == EXIT_OK
    assert creditarf.main(["ingest", "--csv", str(data / "financials.csv"), "--reports", str(data / "reports"),
                           "--out", str(store)] + common) == EXIT_OK
    assert creditarf.main(["embed", "--store", str(store), "--out", str(root / "cache.arfe")] + common) == EXIT_OK
    assert creditarf.main(["train", "--store", str(store), "--out", str(run_dir)] + common) == EXIT_OK
    assert creditarf.main(["eval", "--ckpt", str(run_dir), "--store", str(store), "--out", str(run_dir)] + common) == EXIT_OK
    return run_dir


def test_full_pipeline_writes_run_files(tmp_path):
    run_dir = run_pipeline(tmp_path)
    for name in ("model.carf", "model.json", "history.csv", "report.json", "confusion.csv"):
        assert (run_dir / name).exists()
    store = DatasetStore.load(str(tmp_path / "store"))
    assert store.arf_coverage == 1.0
    assert len(store.samples) == 28


def test_pipeline_is_deterministic(tmp_path):
    first = run_pipeline(tmp_path / "a")
    second = run_pipeline(tmp_path / "b")
    for name in ("model.carf", "model.json", "report.json", "confusion.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_embed_from_cache_reproduces_vectors(tmp_path):
    run_pipeline(tmp_path)
    store_dir = str(tmp_path / "store")
    before = {s.key: s.arf.copy() for s in DatasetStore.load(store_dir).samples}
    config = str(tmp_path / "run.json")
    code = creditarf.main(["embed", "--store", store_dir, "--provider", f"cache:{tmp_path / 'cache.arfe'}",
                           "--out", str(tmp_path / "again.arfe"), "--config", config])
    assert code == EXIT_OK
    after = DatasetStore.load(store_dir)
    assert all((before[s.key] == s.arf).all() for s in after.samples)
    assert (tmp_path / "again.arfe").read_bytes() == (tmp_path / "cache.arfe").read_bytes()


def test_compare_and_baseline(tmp_path):
    run_dir = run_pipeline(tmp_path)
    store, config = str(tmp_path / "store"), str(tmp_path / "run.json")
    baseline = tmp_path / "baseline"
    assert creditarf.main(["train", "--store", store, "--out", str(baseline), "--baseline", "--config", config]) == EXIT_OK
    assert creditarf.main(["eval", "--ckpt", str(baseline), "--store", store, "--out", str(baseline),
                           "--config", config]) == EXIT_OK
    out = tmp_path / "cmp"
    assert creditarf.main(["compare", "--a", str(baseline), "--b", str(run_dir), "--out", str(out)]) == EXIT_OK
    assert (out / "comparison.csv").exists()
    assert "Δ" in (out / "comparison.txt").read_text(encoding="utf-8")


def test_compare_refuses_different_test_sets(tmp_path):
    first = run_pipeline(tmp_path / "a")
    run = {**TINY_RUN, "dataset": {"train_fraction": 0.5}}
    second = run_pipeline(tmp_path / "b", run=run)
    code = creditarf.main(["compare", "--a", str(first), "--b", str(second), "--out", str(tmp_path / "cmp")])
    assert code == EXIT_INPUT


def test_ingest_mini_fixture(tmp_path, capsys):
    csv_path, reports_dir = write_mini_fixture(tmp_path)
    code = creditarf.main(["ingest", "--csv", str(csv_path), "--reports", str(reports_dir),
                           "--out", str(tmp_path / "store")])
    assert code == EXIT_OK
    assert "2 échantillons" in capsys.readouterr().out


def test_missing_rating_column_exits_2(tmp_path, caplog):
    header = [c for c in META_COLUMNS + RATIO_COLUMNS if c != "Rating"]
    csv_path = tmp_path / "financials.csv"
    csv_path.write_text(",".join(header) + "\n", encoding="utf-8")
    (tmp_path / "reports").mkdir()
    code = creditarf.main(["ingest", "--csv", str(csv_path), "--reports", str(tmp_path / "reports"),
                           "--out", str(tmp_path / "store")])
    assert code == EXIT_INPUT
    assert "'Rating'" in caplog.text


def test_unknown_config_key_exits_before_writing(tmp_path):
    config = _write_json(tmp_path / "run.json", {"trian": {}})
    code = creditarf.main(["synth", "--out", str(tmp_path / "data"), "--config", config])
    assert code == EXIT_INPUT
    assert not (tmp_path / "data").exists()


def test_mistyped_config_value_exits_2(tmp_path):
    config = _write_json(tmp_path / "run.json", {"train": {"epochs": "5"}})
    code = creditarf.main(["synth", "--out", str(tmp_path / "data"), "--config", config])
    assert code == EXIT_INPUT
    assert not (tmp_path / "data").exists()


def test_training_without_arf_vectors_exits_4(tmp_path):
    csv_path, reports_dir = write_mini_fixture(tmp_path)
    store = str(tmp_path / "store")
    assert creditarf.main(["ingest", "--csv", str(csv_path), "--reports", str(reports_dir), "--out", store]) == EXIT_OK
    assert creditarf.main(["train", "--store", store, "--out", str(tmp_path / "run")]) == EXIT_MODE


def test_numeric_failure_exits_3(tmp_path, monkeypatch):
    def diverge(store, config, baseline=False):
        raise NumericError("Perte non finie à l'époque 1, lot 0")

    monkeypatch.setattr("training.run_training", diverge)
    csv_path, reports_dir = write_mini_fixture(tmp_path)
    store = str(tmp_path / "store")
    assert creditarf.main(["ingest", "--csv", str(csv_path), "--reports", str(reports_dir), "--out", store]) == EXIT_OK
    assert creditarf.main(["train", "--store", store, "--out", str(tmp_path / "run")]) == EXIT_NUMERIC


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        creditarf.main(["--version"])
    assert info.value.code == 0
    assert creditarf.__version__ in capsys.readouterr().out
