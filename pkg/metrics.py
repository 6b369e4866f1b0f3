"""Métriques d'évaluation, matrice de confusion et comparaison de deux exécutions."""
import dataclasses
import json
import logging
import os

import numpy as np
import pandas as pd
from sklearn.metrics import accuracy_score, precision_recall_fscore_support
from sklearn.metrics import confusion_matrix as sk_confusion_matrix

from dataset import CLASS_NAMES
from errors import InputError, ShapeError, TestSetMismatchError

logger = logging.getLogger(__name__)

N_CLASSES = len(CLASS_NAMES)


@dataclasses.dataclass
class ConfusionMatrix:
    """Lignes = classe réelle, colonnes = classe prédite, ordre AAA..CCC."""
    counts: np.ndarray

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def support(self):
        return self.counts.sum(axis=1)

    def to_frame(self):
        return pd.DataFrame(self.counts, index=CLASS_NAMES, columns=CLASS_NAMES)


def confusion_matrix(preds, labels):
    preds, labels = np.asarray(preds, dtype=np.int64), np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape:
        raise ShapeError(f"{len(preds)} prédictions pour {len(labels)} étiquettes")
    counts = sk_confusion_matrix(labels, preds, labels=list(range(N_CLASSES)))
    return ConfusionMatrix(counts.astype(np.int64))


@dataclasses.dataclass
class EvalReport:
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    confusion: ConfusionMatrix

    @classmethod
    def from_predictions(cls, preds, labels):
        confusion = confusion_matrix(preds, labels)
        precision, recall, f1, _ = precision_recall_fscore_support(
            labels, preds, labels=list(range(N_CLASSES)), average=None, zero_division=0)
        return cls(
            accuracy=float(accuracy_score(labels, preds)),
            precision=np.asarray(precision, dtype=np.float64),
            recall=np.asarray(recall, dtype=np.float64),
            f1=np.asarray(f1, dtype=np.float64),
            confusion=confusion,
        )

    @property
    def n_samples(self):
        return self.confusion.total

    @property
    def histogram(self):
        return self.confusion.support

    @property
    def macro_precision(self):
        return float(np.mean(self.precision))

    @property
    def macro_recall(self):
        return float(np.mean(self.recall))

    @property
    def macro_f1(self):
        return float(np.mean(self.f1))

    @property
    def weighted_f1(self):
        support = self.histogram
        return float(np.dot(self.f1, support) / support.sum()) if support.sum() else 0.0

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "n_samples": self.n_samples,
            "per_class": {
                name: {
                    "precision": float(self.precision[i]),
                    "recall": float(self.recall[i]),
                    "f1": float(self.f1[i]),
                    "support": int(self.histogram[i]),
                }
                for i, name in enumerate(CLASS_NAMES)
            },
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall, "f1": self.macro_f1},
            "weighted_f1": self.weighted_f1,
            "confusion": self.confusion.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        per_class = data["per_class"]
        return cls(
            accuracy=float(data["accuracy"]),
            precision=np.array([per_class[n]["precision"] for n in CLASS_NAMES]),
            recall=np.array([per_class[n]["recall"] for n in CLASS_NAMES]),
            f1=np.array([per_class[n]["f1"] for n in CLASS_NAMES]),
            confusion=ConfusionMatrix(np.asarray(data["confusion"], dtype=np.int64)),
        )


# ================================
# ÉCRITURE DES RÉSULTATS
# ================================

def history_frame(history):
    return pd.DataFrame(history, columns=["epoch", "train_loss", "val_loss", "lr"])


def write_report(out_dir, report, history=None):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    report.confusion.to_frame().to_csv(os.path.join(out_dir, "confusion.csv"), index_label="true\\pred",
                                       lineterminator="\n")
    if history is not None:
        write_history(out_dir, history)
    logger.info(f"Rapport écrit dans {out_dir} (exactitude {report.accuracy:.3f}, F1 macro {report.macro_f1:.3f})")


def write_history(out_dir, history):
    os.makedirs(out_dir, exist_ok=True)
    history_frame(history).to_csv(os.path.join(out_dir, "history.csv"), index=False, lineterminator="\n")


def load_report(path):
    if os.path.isdir(path):
        path = os.path.join(path, "report.json")
    if not os.path.exists(path):
        raise InputError(f"Rapport d'évaluation introuvable : {path}")
    with open(path, encoding="utf-8") as f:
        return EvalReport.from_dict(json.load(f))


# ================================
# COMPARAISON DE DEUX EXÉCUTIONS
# ================================

# Colonne "All" : Rec = Acc = exactitude globale, F1 = F1 macro
METRICS = ("Rec", "Acc", "F1")


def _scores(report):
    rows = {("All", "Rec"): report.accuracy, ("All", "Acc"): report.accuracy, ("All", "F1"): report.macro_f1}
    for i, name in enumerate(CLASS_NAMES):
        rows[(name, "Rec")] = float(report.recall[i])
        rows[(name, "Acc")] = float(report.precision[i])
        rows[(name, "F1")] = float(report.f1[i])
    return rows


@dataclasses.dataclass
class Comparison:
    frame: pd.DataFrame
    baseline_name: str = "baseline"
    with_arf_name: str = "+ ARF"

    def delta(self, scope, metric):
        return float(self.frame.loc[(scope, metric), "delta"])

    @property
    def precision_deltas(self):
        return pd.Series({name: self.delta(name, "Acc") for name in CLASS_NAMES})

    def summary(self):
        gains = self.precision_deltas
        return {
            "accuracy_delta": self.delta("All", "Acc"),
            "macro_f1_delta": self.delta("All", "F1"),
            "mean_class_precision_delta": float(gains.mean()),
            "largest_gain": {"class": gains.idxmax(), "delta": float(gains.max())},
            "smallest_gain": {"class": gains.idxmin(), "delta": float(gains.min())},
        }

    def wide(self):
        """Disposition tableau : une ligne par exécution + ligne des écarts, colonnes (portée, métrique)."""
        wide = self.frame[["baseline", "with_arf", "delta"]].T
        wide.index = [self.baseline_name, self.with_arf_name, "Δ"]
        return wide

    def render_table(self):
        wide = self.wide()
        text = wide.copy().astype(object)
        for col in wide.columns:
            text[col] = [f"{wide[col].iloc[0]:.3f}", f"{wide[col].iloc[1]:.3f}", f"{wide[col].iloc[2]:+.3f}"]
        return text.to_string()

    def to_csv(self, path):
        out = self.frame.reset_index()
        out.columns = ["scope", "metric", "baseline", "with_arf", "delta"]
        out.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")


def compare_runs(baseline, with_arf, baseline_name="baseline", with_arf_name="+ ARF"):
    """Écarts métrique par métrique ; refuse deux rapports calculés sur des ensembles de test différents."""
    if baseline.n_samples != with_arf.n_samples or not np.array_equal(baseline.histogram, with_arf.histogram):
        raise TestSetMismatchError(
            f"Ensembles de test différents : {baseline.n_samples} échantillons {baseline.histogram.tolist()} "
            f"contre {with_arf.n_samples} {with_arf.histogram.tolist()}")
    a, b = _scores(baseline), _scores(with_arf)
    index = pd.MultiIndex.from_tuples(list(a), names=["scope", "metric"])
    frame = pd.DataFrame({"baseline": list(a.values()), "with_arf": [b[k] for k in a]}, index=index)
    frame["delta"] = frame["with_arf"] - frame["baseline"]
    return Comparison(frame, baseline_name, with_arf_name)


def write_comparison(out_dir, comparison):
    os.makedirs(out_dir, exist_ok=True)
    comparison.to_csv(os.path.join(out_dir, "comparison.csv"))
    with open(os.path.join(out_dir, "comparison.txt"), "w", encoding="utf-8", newline="\n") as f:
        f.write(comparison.render_table() + "\n")
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(comparison.summary(), sort_keys=True, indent=2) + "\n")
    logger.info(f"Comparaison écrite dans {out_dir}")
