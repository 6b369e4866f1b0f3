import dataclasses
import enum
import json
import logging
import os
import re
from datetime import date, datetime

import numpy as np
import pandas as pd
from sklearn.preprocessing import StandardScaler

from errors import InputError, SchemaError, UnknownRatingError
from numerics.rng import Rng

logger = logging.getLogger(__name__)

META_COLUMNS = ["Rating Agency", "Corporation", "Rating", "Rating Date"]
RATIO_COLUMNS = [
    "Current Ratio", "Long-term Debt / Capital", "Debt/Equity Ratio", "Gross Margin",
    "Operating Margin", "EBIT Margin", "EBITDA Margin", "Pre-Tax Profit Margin",
    "Net Profit Margin", "Asset Turnover", "ROE - Return On Equity", "Return On Tangible Equity",
    "ROA - Return On Assets", "ROI - Return On Investment", "Operating Cash Flow Per Share",
    "Free Cash Flow Per Share",
]


class RatingClass(enum.IntEnum):
    AAA = 0
    AA = 1
    A = 2
    BBB = 3
    BB = 4
    B = 5
    CCC = 6


CLASS_NAMES = [c.name for c in RatingClass]

# 23 grades d'agence -> 7 catégories (suppression des modificateurs, plancher CCC)
RATING_GRADES = {
    "AAA": RatingClass.AAA,
    "AA+": RatingClass.AA, "AA": RatingClass.AA, "AA-": RatingClass.AA,
    "A+": RatingClass.A, "A": RatingClass.A, "A-": RatingClass.A,
    "BBB+": RatingClass.BBB, "BBB": RatingClass.BBB, "BBB-": RatingClass.BBB,
    "BB+": RatingClass.BB, "BB": RatingClass.BB, "BB-": RatingClass.BB,
    "B+": RatingClass.B, "B": RatingClass.B, "B-": RatingClass.B,
    "CCC+": RatingClass.CCC, "CCC": RatingClass.CCC, "CCC-": RatingClass.CCC,
    "CC": RatingClass.CCC, "C": RatingClass.CCC, "SD": RatingClass.CCC, "D": RatingClass.CCC,
}


def map_rating(raw):
    token = str(raw).strip().upper().replace("−", "-").replace("–", "-")
    if token not in RATING_GRADES:
        raise UnknownRatingError(f"Note inconnue : {raw!r}")
    return RATING_GRADES[token]


def slugify(name):
    """Minuscules, suites de caractères non alphanumériques -> un seul tiret."""
    return re.sub(r"[^a-z0-9]+", "-", str(name).lower()).strip("-")


def report_key(corporation, year):
    return f"{slugify(corporation)}:{int(year)}"


@dataclasses.dataclass
class DatasetConfig:
    ratio_columns: list = dataclasses.field(default_factory=lambda: list(RATIO_COLUMNS))
    train_fraction: float = 0.75
    stratified: bool = True

    def validate(self):
        problems = []
        if not self.ratio_columns:
            problems.append("ratio_columns ne peut pas être vide")
        if len(set(self.ratio_columns)) != len(self.ratio_columns):
            problems.append("ratio_columns contient des doublons")
        if not 0 < self.train_fraction < 1:
            problems.append(f"train_fraction doit être dans ]0, 1[ (reçu {self.train_fraction})")
        return problems


@dataclasses.dataclass
class FinancialRecord:
    rating_agency: str
    corporation: str
    raw_rating: str
    rating_date: str
    ratios: np.ndarray

    @property
    def year(self):
        return int(self.rating_date[:4])


@dataclasses.dataclass
class Sample:
    corporation: str
    year: int
    financial: np.ndarray
    label: RatingClass
    arf: np.ndarray = None
    report: str = None
    synthetic: bool = False

    @property
    def key(self):
        return report_key(self.corporation, self.year)

    def to_dict(self):
        return {
            "corporation": self.corporation,
            "year": int(self.year),
            "financial": [float(v) for v in self.financial],
            "label": int(self.label),
            "arf": None if self.arf is None else [float(v) for v in self.arf],
            "report": self.report,
        }

    @classmethod
    def from_dict(cls, data):
        arf = data.get("arf")
        return cls(
            corporation=data["corporation"],
            year=int(data["year"]),
            financial=np.asarray(data["financial"], dtype=np.float64),
            label=RatingClass(data["label"]),
            arf=None if arf is None else np.asarray(arf, dtype=np.float32),
            report=data.get("report"),
        )


# ================================
# LECTURE DU CSV FINANCIER
# ================================

def _parse_date(value, row):
    value = value.strip()
    for parse in (date.fromisoformat, lambda v: datetime.strptime(v, "%m/%d/%Y").date()):
        try:
            return parse(value).isoformat()
        except ValueError:
            continue
    raise SchemaError(f"Ligne {row}, colonne 'Rating Date' : date illisible {value!r}",
                      row=row, column="Rating Date")


def parse_financial_csv(stream, ratio_columns=None):
    """Une FinancialRecord par ligne ; les ratios suivent l'ordre de `ratio_columns`.

    Les numéros de ligne des erreurs comptent l'en-tête comme ligne 1.
    """
    ratio_columns = list(ratio_columns or RATIO_COLUMNS)
    try:
        df = pd.read_csv(stream, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise SchemaError("Fichier CSV vide")
    df.columns = [str(col).strip() for col in df.columns]
    for col in META_COLUMNS + ratio_columns:
        if col not in df.columns:
            raise SchemaError(f"Colonne manquante : '{col}'", column=col)

    values = pd.DataFrame({col: pd.to_numeric(df[col].str.strip(), errors="coerce") for col in ratio_columns})
    bad = ~np.isfinite(values.to_numpy(dtype=np.float64))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        col = ratio_columns[c]
        row = int(r) + 2
        raise SchemaError(f"Ligne {row}, colonne '{col}' : valeur non numérique {df[col].iloc[r]!r}",
                          row=row, column=col)

    records = []
    ratios = values.to_numpy(dtype=np.float64)
    for i, raw in enumerate(df[META_COLUMNS].itertuples(index=False)):
        row = i + 2
        agency, corporation, rating, rating_date = (str(v).strip() for v in raw)
        if not corporation:
            raise SchemaError(f"Ligne {row}, colonne 'Corporation' : valeur vide", row=row, column="Corporation")
        records.append(FinancialRecord(
            rating_agency=agency,
            corporation=corporation,
            raw_rating=rating,
            rating_date=_parse_date(rating_date, row),
            ratios=ratios[i].copy(),
        ))
    logger.info(f"{len(records)} lignes financières lues")
    return records


# ================================
# RAPPORTS ANNUELS ET JOINTURE
# ================================

_REPORT_NAME = re.compile(r"^(?P<slug>[a-z0-9]+(?:-[a-z0-9]+)*)_(?P<year>\d{4})\.txt$")


def index_reports(reports_dir):
    """(slug, année) -> chemin, pour les fichiers `<slug>_<année>.txt`."""
    if not os.path.isdir(reports_dir):
        raise InputError(f"Répertoire de rapports introuvable : {reports_dir}")
    index = {}
    for name in sorted(os.listdir(reports_dir)):
        match = _REPORT_NAME.match(name)
        if not match:
            logger.debug(f"Fichier ignoré (nom non conforme) : {name}")
            continue
        index[(match["slug"], int(match["year"]))] = os.path.join(reports_dir, name)
    return index


def join_reports(records, report_index):
    """Un échantillon par couple (société, année) présent des deux côtés.

    Plusieurs notations pour un même couple : la première dans l'ordre du fichier l'emporte.
    """
    seen_agency = set()
    first = {}
    for record in records:
        slug = slugify(record.corporation)
        agency_key = (slug, record.year, record.rating_agency)
        if agency_key in seen_agency:
            logger.warning(f"Ligne dupliquée ignorée : {record.corporation} {record.year} ({record.rating_agency})")
            continue
        seen_agency.add(agency_key)
        first.setdefault((slug, record.year), record)

    samples = []
    for (slug, year), record in sorted(first.items()):
        path = report_index.get((slug, year))
        if path is None:
            continue
        samples.append(Sample(
            corporation=record.corporation,
            year=year,
            financial=record.ratios,
            label=map_rating(record.raw_rating),
            report=path,
        ))
    orphans = len(set(report_index) - set(first))
    if orphans:
        logger.warning(f"{orphans} rapport(s) sans ligne financière correspondante")
    return samples


def class_histogram(samples):
    return np.bincount(np.array([int(s.label) for s in samples], dtype=np.int64), minlength=len(RatingClass))


# ================================
# STANDARDISATION ET PARTITION
# ================================

class Standardizer:
    """z-score par caractéristique (écart-type de population) ; std nulle -> 0."""

    def __init__(self, mean, scale, constant):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.scale = np.asarray(scale, dtype=np.float64)
        self.constant = np.asarray(constant, dtype=bool)

    @classmethod
    def fit(cls, samples):
        if not samples:
            raise InputError("Impossible de standardiser : partition d'entraînement vide")
        scaler = StandardScaler().fit(np.stack([s.financial for s in samples]).astype(np.float64))
        return cls(scaler.mean_, scaler.scale_, scaler.var_ == 0)

    def transform(self, matrix):
        z = (np.asarray(matrix, dtype=np.float64) - self.mean) / self.scale
        z[..., self.constant] = 0.0
        return z

    def inverse(self, matrix):
        return np.asarray(matrix, dtype=np.float64) * self.scale + self.mean

    def to_dict(self):
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist(), "constant": self.constant.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data["mean"], data["scale"], data["constant"])


def standardize(samples, stats_from):
    """Échantillons aux caractéristiques standardisées avec les statistiques de `stats_from`."""
    standardizer = stats_from if isinstance(stats_from, Standardizer) else Standardizer.fit(stats_from)
    if not samples:
        return [], standardizer
    z = standardizer.transform(np.stack([s.financial for s in samples])).astype(np.float32)
    return [dataclasses.replace(s, financial=row) for s, row in zip(samples, z)], standardizer


def _test_count(n, train_fraction):
    if n < 2:
        return 0
    return min(n - 1, max(1, int(np.floor(n * (1.0 - train_fraction) + 0.5))))


def split(samples, train_fraction=0.75, seed=0, stratified=True):
    """Partition (train, test) ; classe à un seul échantillon -> entièrement en train."""
    if not samples:
        raise InputError("Impossible de partitionner un ensemble vide")
    rng = Rng(seed)
    groups = {}
    if stratified:
        for i, s in enumerate(samples):
            groups.setdefault(int(s.label), []).append(i)
    else:
        groups[0] = list(range(len(samples)))
    test_idx = set()
    for label in sorted(groups):
        members = groups[label]
        order = rng.permutation(len(members))
        n_test = _test_count(len(members), train_fraction)
        test_idx.update(members[j] for j in order[:n_test])
    train = [s for i, s in enumerate(samples) if i not in test_idx]
    test = [s for i, s in enumerate(samples) if i in test_idx]
    return train, test


# ================================
# MAGASIN DE DONNÉES
# ================================

@dataclasses.dataclass
class DatasetStore:
    samples: list
    assignment: dict
    standardizer: Standardizer
    provenance: dict
    ratio_columns: list

    @property
    def train_samples(self):
        return [s for s in self.samples if self.assignment[s.key] == "train"]

    @property
    def test_samples(self):
        return [s for s in self.samples if self.assignment[s.key] == "test"]

    @property
    def arf_coverage(self):
        if not self.samples:
            return 0.0
        return sum(s.arf is not None for s in self.samples) / len(self.samples)

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "samples.jsonl"), "w", encoding="utf-8", newline="\n") as f:
            for s in self.samples:
                line = {**s.to_dict(), "split": self.assignment[s.key]}
                f.write(json.dumps(line, sort_keys=True, ensure_ascii=False) + "\n")
        stats = {
            "standardization": self.standardizer.to_dict(),
            "provenance": self.provenance,
            "ratio_columns": self.ratio_columns,
        }
        with open(os.path.join(directory, "stats.json"), "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(stats, sort_keys=True, indent=2, ensure_ascii=False) + "\n")
        logger.info(f"Magasin écrit dans {directory} ({len(self.samples)} échantillons)")

    @classmethod
    def load(cls, directory):
        samples_path = os.path.join(directory, "samples.jsonl")
        stats_path = os.path.join(directory, "stats.json")
        if not os.path.exists(samples_path) or not os.path.exists(stats_path):
            raise InputError(f"Magasin de données introuvable ou incomplet : {directory}")
        samples, assignment = [], {}
        with open(samples_path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    data = json.loads(line)
                    sample = Sample.from_dict(data)
                    samples.append(sample)
                    assignment[sample.key] = data["split"]
        with open(stats_path, encoding="utf-8") as f:
            stats = json.load(f)
        return cls(
            samples=samples,
            assignment=assignment,
            standardizer=Standardizer.from_dict(stats["standardization"]),
            provenance=stats["provenance"],
            ratio_columns=stats["ratio_columns"],
        )


def ingest(csv_path, reports_dir, config, seed):
    """Lecture, correspondance des notes, jointure, partition et statistiques d'entraînement."""
    if not os.path.exists(csv_path):
        raise InputError(f"Fichier CSV introuvable : {csv_path}")
    with open(csv_path, encoding="utf-8") as f:
        records = parse_financial_csv(f, config.ratio_columns)
    for i, record in enumerate(records):
        try:
            map_rating(record.raw_rating)
        except UnknownRatingError as e:
            raise SchemaError(f"Ligne {i + 2}, colonne 'Rating' : {e}", row=i + 2, column="Rating")
    samples = join_reports(records, index_reports(reports_dir))
    if not samples:
        raise InputError("Aucun couple (société, année) commun entre le CSV et les rapports")
    train, test = split(samples, config.train_fraction, seed, config.stratified)
    assignment = {s.key: "train" for s in train}
    assignment.update({s.key: "test" for s in test})
    store = DatasetStore(
        samples=samples,
        assignment=assignment,
        standardizer=Standardizer.fit(train),
        provenance={"csv": csv_path, "reports": reports_dir, "seed": seed},
        ratio_columns=list(config.ratio_columns),
    )
    logger.info(f"{len(samples)} échantillons ({len(train)} train / {len(test)} test), "
                f"histogramme {class_histogram(samples).tolist()}")
    return store
