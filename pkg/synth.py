"""Jeux de données synthétiques : signal de classe réparti entre ratios financiers et texte des rapports.

rho = 0 : les rapports sont du bruit indépendant de la classe.
rho = 1 : les ratios financiers sont du bruit indépendant de la classe.
"""
import dataclasses
import json
import logging
import os

import numpy as np
import pandas as pd

from config import section_from_dict
from dataset import CLASS_NAMES, META_COLUMNS, RATIO_COLUMNS, slugify
from errors import ConfigError, InputError
from numerics.rng import Rng

logger = logging.getLogger(__name__)

AGENCY = "Synthetic Ratings"

FILLER_WORDS = [
    "company", "reported", "quarter", "operations", "segment", "management", "revenue", "expenses",
    "capital", "market", "customers", "products", "services", "regional", "activity", "portfolio",
    "assets", "liabilities", "period", "business", "strategy", "review", "board", "results",
    "investment", "facilities", "employees", "contracts", "program", "overall",
]

# Mots-clés propres à chaque classe, AAA -> CCC
CLASS_KEYWORDS = [
    ["pristine", "fortress", "impeccable", "surplus", "unrivaled", "premier"],
    ["robust", "resilient", "prudent", "ample", "sturdy", "durable"],
    ["solid", "steady", "favorable", "sound", "healthy", "reliable"],
    ["adequate", "moderate", "balanced", "acceptable", "measured", "ordinary"],
    ["uncertain", "volatile", "strained", "leveraged", "uneven", "exposed"],
    ["weak", "deteriorating", "pressured", "impaired", "fragile", "declining"],
    ["distressed", "default", "insolvent", "breach", "restructuring", "going-concern"],
]


@dataclasses.dataclass
class SynthSpec:
    rho: float = 0.5
    samples_per_class: int = 60
    informative: int = 8
    separation: float = 1.5
    sentences_per_report: int = 12
    words_per_sentence: int = 8
    start_year: int = 2010

    def validate(self):
        problems = []
        if not 0.0 <= self.rho <= 1.0:
            problems.append(f"rho doit être dans [0, 1] (reçu {self.rho})")
        if self.samples_per_class < 2:
            problems.append("samples_per_class doit être >= 2")
        if not 1 <= self.informative <= len(RATIO_COLUMNS):
            problems.append(f"informative doit être dans [1, {len(RATIO_COLUMNS)}]")
        if self.sentences_per_report < 1 or self.words_per_sentence < 3:
            problems.append("sentences_per_report >= 1 et words_per_sentence >= 3 requis")
        return problems


def load_synth_spec(path=None):
    data = {}
    if path:
        if not os.path.exists(path):
            raise InputError(f"Spécification synthétique introuvable : {path}")
        with open(path, encoding="utf-8") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"JSON invalide dans {path} : {e}")
    spec, problems = section_from_dict(SynthSpec, data, "synth")
    problems = problems or spec.validate()
    if problems:
        raise ConfigError(problems)
    return spec


def _sentence(rng, words, n_words):
    picks = rng.integers(len(words), n_words)
    return " ".join(words[i] for i in picks).capitalize() + "."


def report_text(label, spec, rng):
    """Phrases de remplissage ; une fraction rho d'entre elles porte les mots-clés de la classe."""
    keyword_words = CLASS_KEYWORDS[label] + FILLER_WORDS[:4]
    carries = rng.uniform(spec.sentences_per_report) < spec.rho
    lines = []
    for signal in carries:
        words = keyword_words if signal else FILLER_WORDS
        lines.append(_sentence(rng, words, spec.words_per_sentence))
    return "\n".join(lines) + "\n"


def generate(spec, seed):
    """(DataFrame au schéma du CSV financier, {nom de fichier: texte du rapport})."""
    rng = Rng(seed)
    n_classes = len(CLASS_NAMES)
    means = np.zeros((n_classes, len(RATIO_COLUMNS)))
    means[:, :spec.informative] = rng.spawn(1).normal((n_classes, spec.informative)) * spec.separation * (1.0 - spec.rho)
    noise_rng, text_rng = rng.spawn(2), rng.spawn(3)
    rows, reports = [], {}
    index = 0
    for label in range(n_classes):
        ratios = means[label] + noise_rng.normal((spec.samples_per_class, len(RATIO_COLUMNS)))
        for j in range(spec.samples_per_class):
            corporation = f"Synthetic Corp {index:04d}"
            year = spec.start_year + index % 10
            rows.append([AGENCY, corporation, CLASS_NAMES[label], f"{year}-06-30", *ratios[j]])
            reports[f"{slugify(corporation)}_{year}.txt"] = report_text(label, spec, text_rng)
            index += 1
    frame = pd.DataFrame(rows, columns=META_COLUMNS + RATIO_COLUMNS)
    return frame, reports


def write_synthetic(spec, seed, out_dir):
    frame, reports = generate(spec, seed)
    reports_dir = os.path.join(out_dir, "reports")
    os.makedirs(reports_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "financials.csv")
    frame.to_csv(csv_path, index=False, float_format="%.6f", lineterminator="\n")
    for name in sorted(reports):
        with open(os.path.join(reports_dir, name), "w", encoding="utf-8", newline="\n") as f:
            f.write(reports[name])
    logger.info(f"Données synthétiques : {len(frame)} lignes, {len(reports)} rapports (rho={spec.rho}) dans {out_dir}")
    return csv_path, reports_dir
