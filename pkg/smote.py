"""Sur-échantillonnage SMOTE dans l'espace joint (financier ⊕ ARF) de la partition d'entraînement."""
import dataclasses
import logging

import numpy as np
from sklearn.neighbors import NearestNeighbors

from dataset import Sample, class_histogram
from numerics.rng import Rng

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class SmoteConfig:
    k_neighbors: int = 5
    enabled: bool = True

    def validate(self):
        if not isinstance(self.k_neighbors, int) or self.k_neighbors < 1:
            return [f"k_neighbors doit être >= 1 (reçu {self.k_neighbors!r})"]
        return []


def joint_matrix(samples):
    """Vecteurs financier ⊕ ARF (financier seul si aucun échantillon n'a d'ARF)."""
    with_arf = samples[0].arf is not None
    rows = [np.concatenate([s.financial, s.arf]) if with_arf else s.financial for s in samples]
    return np.stack(rows).astype(np.float64), with_arf


def neighbor_table(points, k):
    """Indices des k plus proches voisins euclidiens de chaque point, lui-même exclu."""
    nn = NearestNeighbors(n_neighbors=k + 1, algorithm="brute").fit(points)
    _, idx = nn.kneighbors(points)
    table = np.empty((len(points), k), dtype=np.int64)
    for i, row in enumerate(idx):
        others = [j for j in row if j != i]
        table[i] = others[:k]
    return table


def smote(samples, config, seed):
    """Chaque classe est portée à l'effectif de la classe majoritaire.

    x_new = x_i + λ·(x_nn - x_i), λ ~ U(0, 1), x_nn parmi les k voisins de même classe.
    Les échantillons d'origine sont conservés en tête, dans leur ordre.
    """
    if not samples:
        return []
    histogram = class_histogram(samples)
    target = int(histogram.max())
    points, with_arf = joint_matrix(samples)
    n_financial = len(samples[0].financial)
    rng = Rng(seed)
    synthetic = []
    for label in range(len(histogram)):
        count = int(histogram[label])
        if count == 0 or count == target:
            continue
        members = [i for i, s in enumerate(samples) if int(s.label) == label]
        missing = target - count
        template = samples[members[0]]
        class_rng = rng.spawn(label)
        if count == 1:
            logger.warning(f"Classe {template.label.name} avec un seul échantillon : dupliquée {missing} fois")
            base = np.repeat(points[members], missing, axis=0)
        else:
            k = min(config.k_neighbors, count - 1)
            class_points = points[members]
            table = neighbor_table(class_points, k)
            origin = class_rng.integers(count, missing)
            pick = class_rng.integers(k, missing)
            lam = class_rng.uniform((missing, 1))
            neighbors = class_points[table[origin, pick]]
            base = class_points[origin] + lam * (neighbors - class_points[origin])
        for j, row in enumerate(base):
            synthetic.append(Sample(
                corporation=f"smote-{template.label.name.lower()}-{j}",
                year=0,
                financial=row[:n_financial].astype(np.float32),
                label=template.label,
                arf=row[n_financial:].astype(np.float32) if with_arf else None,
                synthetic=True,
            ))
    logger.info(f"SMOTE : {len(synthetic)} échantillons synthétiques, {target} par classe")
    return list(samples) + synthetic
