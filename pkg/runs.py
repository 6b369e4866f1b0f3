"""Lecture des répertoires d'exécution pour le visualiseur (lecture seule)."""
import dataclasses
import json
import os

import pandas as pd

from dataset import CLASS_NAMES, DatasetStore, class_histogram
from errors import InputError
from metrics import EvalReport, load_report


@dataclasses.dataclass
class RunView:
    name: str
    path: str
    report: EvalReport
    history: pd.DataFrame = None
    model: dict = None

    @property
    def confusion(self):
        return self.report.confusion.to_frame()


def list_runs(root):
    if not os.path.isdir(root):
        return []
    return sorted(
        name for name in os.listdir(root)
        if os.path.exists(os.path.join(root, name, "report.json"))
    )


def load_run(run_dir):
    if not os.path.exists(os.path.join(run_dir, "report.json")):
        raise InputError(f"Aucun report.json dans {run_dir}")
    history_path = os.path.join(run_dir, "history.csv")
    model_path = os.path.join(run_dir, "model.json")
    model = None
    if os.path.exists(model_path):
        with open(model_path, encoding="utf-8") as f:
            model = json.load(f)
    return RunView(
        name=os.path.basename(os.path.normpath(run_dir)),
        path=run_dir,
        report=load_report(run_dir),
        history=pd.read_csv(history_path) if os.path.exists(history_path) else None,
        model=model,
    )


def per_class_frame(report):
    return pd.DataFrame({
        "Classe": CLASS_NAMES,
        "Précision": report.precision,
        "Rappel": report.recall,
        "F1": report.f1,
        "Effectif": report.histogram,
    })


def store_histogram(store_dir):
    store = DatasetStore.load(store_dir)
    total = class_histogram(store.samples)
    with_arf = class_histogram([s for s in store.samples if s.arf is not None])
    train = class_histogram(store.train_samples)
    return pd.DataFrame({
        "Classe": CLASS_NAMES,
        "Échantillons": total,
        "Entraînement": train,
        "Test": total - train,
        "Avec ARF": with_arf,
    })
