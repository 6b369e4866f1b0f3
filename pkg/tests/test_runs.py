import pytest

from checkpoint import Checkpoint
from conftest import tiny_spec, write_mini_fixture
from crp import build_model
from dataset import DatasetConfig, ingest
from errors import InputError
from metrics import EvalReport, write_report
from runs import list_runs, load_run, per_class_frame, store_histogram

LABELS = [0, 1, 2, 3, 4, 5, 6, 6]
PREDS = [0, 1, 2, 3, 4, 5, 6, 5]


def _run(root, name, with_model=True):
    run_dir = root / name
    history = [{"epoch": 1, "train_loss": 2.0, "val_loss": 2.1, "lr": 0.001}]
    write_report(str(run_dir), EvalReport.from_predictions(PREDS, LABELS), history)
    if with_model:
        Checkpoint.from_model(build_model(tiny_spec()), {"epochs_run": 1}).save(str(run_dir))
    return run_dir


def test_list_runs_only_keeps_evaluated_directories(tmp_path):
    _run(tmp_path, "b")
    _run(tmp_path, "a", with_model=False)
    (tmp_path / "empty").mkdir()
    assert list_runs(str(tmp_path)) == ["a", "b"]
    assert list_runs(str(tmp_path / "missing")) == []


def test_load_run(tmp_path):
    run = load_run(str(_run(tmp_path, "cnn")))
    assert run.name == "cnn"
    assert run.report.accuracy == pytest.approx(7 / 8)
    assert run.confusion.loc["CCC", "B"] == 1
    assert list(run.history["epoch"]) == [1]
    assert run.model["spec"]["fnf"]["kind"] == "cnn"
    assert load_run(str(_run(tmp_path, "bare", with_model=False))).model is None


def test_load_run_without_report(tmp_path):
    with pytest.raises(InputError):
        load_run(str(tmp_path))


def test_per_class_frame():
    frame = per_class_frame(EvalReport.from_predictions(PREDS, LABELS))
    assert list(frame["Classe"]) == ["AAA", "AA", "A", "BBB", "BB", "B", "CCC"]
    assert frame.loc[6, "Rappel"] == pytest.approx(0.5)
    assert frame["Effectif"].sum() == 8


def test_store_histogram(tmp_path):
    csv_path, reports_dir = write_mini_fixture(tmp_path)
    ingest(str(csv_path), str(reports_dir), DatasetConfig(), seed=1).save(str(tmp_path / "store"))
    histogram = store_histogram(str(tmp_path / "store"))
    assert histogram["Échantillons"].sum() == 2
    assert histogram["Avec ARF"].sum() == 0
    assert histogram.set_index("Classe").loc["AA", "Entraînement"] == 1
