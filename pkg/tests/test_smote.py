import numpy as np

from conftest import make_samples
from dataset import class_histogram
from smote import SmoteConfig, joint_matrix, smote


def _on_segment_to_neighbor(point, base, candidates, tol=1e-5):
    """Vrai si `point` est sur le segment [base, c] pour l'un des voisins candidats."""
    for c in candidates:
        direction = c - base
        lam = np.dot(point - base, direction) / np.dot(direction, direction)
        residual = np.linalg.norm(base + lam * direction - point)
        if -tol <= lam <= 1 + tol and residual < tol:
            return True
    return False


def _knn(points, i, k):
    distances = np.linalg.norm(points - points[i], axis=1)
    distances[i] = np.inf
    return points[np.argsort(distances, kind="stable")[:k]]


def test_balanced_input_is_unchanged():
    samples = make_samples([5, 5, 5])
    out = smote(samples, SmoteConfig(), seed=1)
    assert len(out) == len(samples)
    assert all(a is b for a, b in zip(out, samples))


def test_counts_are_raised_to_majority():
    samples = make_samples([10, 4])
    out = smote(samples, SmoteConfig(), seed=1)
    assert class_histogram(out)[:2].tolist() == [10, 10]
    assert all(a is b for a, b in zip(out, samples))
    assert sum(s.synthetic for s in out) == 6


def test_synthetic_points_lie_between_base_and_true_neighbor():
    samples = make_samples([40, 15, 7], n_features=5, arf_dim=3, seed=4)
    out = smote(samples, SmoteConfig(k_neighbors=5), seed=2)
    assert class_histogram(out)[:3].tolist() == [40, 40, 40]
    points, with_arf = joint_matrix(samples)
    assert with_arf
    for label in (1, 2):
        members = np.array([i for i, s in enumerate(samples) if int(s.label) == label])
        class_points = points[members]
        synthetic = [s for s in out if s.synthetic and int(s.label) == label]
        for s in synthetic:
            point = np.concatenate([s.financial, s.arf]).astype(np.float64)
            assert any(
                _on_segment_to_neighbor(point, class_points[i], _knn(class_points, i, 5), tol=1e-4)
                for i in range(len(class_points))
            )


def test_singleton_class_is_duplicated(caplog):
    samples = make_samples([3, 1])
    out = smote(samples, SmoteConfig(), seed=0)
    copies = [s for s in out if s.synthetic]
    assert len(copies) == 2
    assert all(np.allclose(c.financial, samples[3].financial) for c in copies)
    assert "un seul échantillon" in caplog.text


def test_smote_is_seeded():
    samples = make_samples([12, 5], arf_dim=4)
    a = smote(samples, SmoteConfig(), seed=7)
    b = smote(samples, SmoteConfig(), seed=7)
    assert all(np.array_equal(x.financial, y.financial) for x, y in zip(a, b))


def test_config_validation():
    assert SmoteConfig(k_neighbors=0).validate()
    assert SmoteConfig().validate() == []
