import dataclasses

import numpy as np
import pytest

from config import RunConfig
from conftest import make_samples, tiny_spec
from crp import CrpConfig, ModelSpec, build_model
from dataset import RATIO_COLUMNS, DatasetStore, RatingClass, Sample, Standardizer, class_histogram
from errors import InputError, ModeMismatchError, NumericError
from fnf import FnfConfig
from training import (
    TrainConfig, evaluate, holdout_validation, lr_baseline_spec, lr_baseline_train, predict,
    prepare_training_set, train, validation_loss,
)


def _store(samples, test_every=4):
    assignment = {s.key: ("test" if i % test_every == 0 else "train") for i, s in enumerate(samples)}
    train_samples = [s for s in samples if assignment[s.key] == "train"]
    return DatasetStore(samples, assignment, Standardizer.fit(train_samples), {}, list(RATIO_COLUMNS))


def test_holdout_sizes_and_partition():
    samples = make_samples([20, 15])
    fit, validation = holdout_validation(samples, 0.1, seed=3)
    assert len(validation) == 3
    assert len(fit) + len(validation) == len(samples)
    assert not {id(s) for s in fit} & {id(s) for s in validation}


def test_holdout_keeps_class_proportions():
    samples = make_samples([20, 10])
    _, validation = holdout_validation(samples, 0.1, seed=3)
    assert sorted(int(s.label) for s in validation) == [0, 0, 1]
    again = holdout_validation(samples, 0.1, seed=3)[1]
    assert [s.key for s in again] == [s.key for s in validation]


def test_holdout_leaves_singleton_class_in_training():
    samples = make_samples([1, 9])
    fit, validation = holdout_validation(samples, 0.5, seed=0)
    assert len(validation) == 5
    assert all(int(s.label) == 1 for s in validation)
    assert any(int(s.label) == 0 for s in fit)


def test_overfits_a_single_batch():
    samples = make_samples([8, 8, 8, 8], spread=3.0, seed=1)
    spec = ModelSpec(
        n_features=16, fnf=FnfConfig(kind="cnn"), arf=tiny_spec().arf,
        crp=CrpConfig(dropout=0.0, financial_only=True), seeds={"fnf": 1, "arf": 2, "crp": 3},
    )
    config = TrainConfig(epochs=200, batch_size=32, lr=0.001, weight_decay=1e-5, log_every=50)
    checkpoint, history = train(build_model(spec), samples, config, seed=4, validation=samples)
    report = evaluate(checkpoint, samples)
    assert report.accuracy == 1.0
    assert history[-1]["train_loss"] < history[0]["train_loss"]


def test_history_and_metadata():
    samples = make_samples([6, 6], arf_dim=16)
    config = TrainConfig(epochs=5, batch_size=4)
    checkpoint, history = train(build_model(tiny_spec()), samples, config, seed=0)
    assert [h["epoch"] for h in history] == [1, 2, 3, 4, 5]
    assert all(b["lr"] <= a["lr"] for a, b in zip(history, history[1:]))
    assert checkpoint.metadata["epochs_run"] == 5
    assert checkpoint.metadata["final_lr"] == history[-1]["lr"]
    assert checkpoint.history == history


def test_training_is_deterministic():
    samples = make_samples([6, 6], arf_dim=16)
    config = TrainConfig(epochs=3, batch_size=4)
    a, _ = train(build_model(tiny_spec()), samples, config, seed=8)
    b, _ = train(build_model(tiny_spec()), samples, config, seed=8)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_nan_input_aborts_with_epoch_and_batch():
    samples = make_samples([4, 4])
    samples[0].financial = samples[0].financial.copy()
    samples[0].financial[0] = np.nan
    model = build_model(lr_baseline_spec(tiny_spec(financial_only=True)))
    with pytest.raises(NumericError, match="Époque 1"):
        train(model, samples, TrainConfig(epochs=2, batch_size=8), seed=0, validation=samples[1:])


def test_empty_sets():
    with pytest.raises(InputError):
        train(build_model(tiny_spec()), [], TrainConfig(), seed=0)
    with pytest.raises(InputError):
        evaluate(build_model(tiny_spec()), [])


def test_logistic_baseline_separates_linear_classes():
    rng = np.random.default_rng(0)
    samples = []
    for i in range(40):
        label = i % 2
        financial = rng.normal(size=16) * 0.1
        financial[0] = (1.0 + rng.uniform()) * (1 if label else -1)
        samples.append(Sample(f"Corp {i}", 2015, financial.astype(np.float32), RatingClass(label)))
    spec = tiny_spec(financial_only=True)
    baseline = lr_baseline_spec(spec)
    assert baseline.crp.hidden == [] and baseline.fnf.kind == "identity"
    checkpoint = lr_baseline_train(samples, spec, TrainConfig(epochs=100, lr=0.05), seed=1, validation=samples)
    assert evaluate(checkpoint, samples).accuracy == 1.0
    assert predict(checkpoint.build(), samples[:3]).shape == (3, 7)


def test_prepare_training_set_balances_after_holdout():
    config = RunConfig(seed=5)
    samples = make_samples([20, 8], arf_dim=16, seed=2)
    store = _store(samples)
    fit, validation = prepare_training_set(store, config)
    n_train = len(store.train_samples)
    assert len(validation) == int(np.floor(n_train * 0.1))
    histogram = class_histogram(fit)
    assert histogram[0] == histogram[1]
    assert all(not s.synthetic for s in validation)


def test_smote_refused_in_end_to_end_mode():
    config = RunConfig(seed=5)
    config.crp = CrpConfig(mode="end_to_end")
    with pytest.raises(ModeMismatchError):
        prepare_training_set(_store(make_samples([8, 4])), config)


def test_smote_needs_arf_vectors_in_precompute_mode():
    with pytest.raises(ModeMismatchError):
        prepare_training_set(_store(make_samples([8, 4])), RunConfig(seed=5))


def test_smote_disabled_keeps_counts():
    config = RunConfig(seed=5)
    config.smote = dataclasses.replace(config.smote, enabled=False)
    store = _store(make_samples([8, 4]))
    fit, validation = prepare_training_set(store, config)
    assert len(fit) + len(validation) == len(store.train_samples)


def test_config_validation():
    assert TrainConfig().validate() == []
    assert TrainConfig(plateau_factor=1.5).validate()
    assert TrainConfig(epochs=0).validate()


def test_best_epoch_weights_are_restored():
    samples = make_samples([6, 6], arf_dim=16)
    held = make_samples([3, 3], arf_dim=16, seed=1)
    checkpoint, history = train(build_model(tiny_spec()), samples, TrainConfig(epochs=6, batch_size=4), seed=2,
                                validation=held)
    losses = [h["val_loss"] for h in history]
    best = int(np.argmin(losses))
    assert checkpoint.metadata["best_epoch"] == best + 1
    assert validation_loss(checkpoint.build(), held) == pytest.approx(losses[best], rel=1e-5)


def test_last_epoch_weights_without_restore():
    samples = make_samples([6, 6], arf_dim=16)
    held = make_samples([3, 3], arf_dim=16, seed=1)
    config = TrainConfig(epochs=4, batch_size=4, restore_best=False)
    checkpoint, history = train(build_model(tiny_spec()), samples, config, seed=2, validation=held)
    assert validation_loss(checkpoint.build(), held) == pytest.approx(history[-1]["val_loss"], rel=1e-5)
