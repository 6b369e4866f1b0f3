"""Boucle d'entraînement (Adam + plateau), évaluation et ligne de base régression logistique."""
import dataclasses
import logging

import numpy as np

from checkpoint import Checkpoint
from crp import ModelSpec, build_model, predict_classes
from dataset import standardize
from errors import InputError, ModeMismatchError, NumericError
from fnf import FnfConfig
from metrics import EvalReport
from numerics import Adam, PlateauScheduler, Rng, cross_entropy, no_grad, plateau_step
from smote import smote

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 0.001
    weight_decay: float = 1e-5
    plateau_factor: float = 0.5
    plateau_patience: int = 3
    min_lr: float = 1e-6
    validation_fraction: float = 0.1
    log_every: int = 10
    restore_best: bool = True

    def validate(self):
        problems = []
        if self.epochs < 1 or self.batch_size < 1:
            problems.append("epochs et batch_size doivent être >= 1")
        if self.lr <= 0 or self.min_lr <= 0:
            problems.append("lr et min_lr doivent être > 0")
        if not 0 < self.plateau_factor < 1:
            problems.append(f"plateau_factor doit être dans ]0, 1[ (reçu {self.plateau_factor})")
        if not 0 < self.validation_fraction < 1:
            problems.append(f"validation_fraction doit être dans ]0, 1[ (reçu {self.validation_fraction})")
        return problems


def holdout_validation(samples, fraction, seed):
    """(entraînement, validation) stratifiés par classe ; floor(n·fraction) échantillons, au moins 1.

    Une classe garde toujours au moins un échantillon d'entraînement tant que c'est possible.
    """
    if len(samples) < 2:
        return list(samples), list(samples)
    n = len(samples)
    n_val = min(n - 1, max(1, int(np.floor(n * fraction))))
    members = {}
    for i, s in enumerate(samples):
        members.setdefault(int(s.label), []).append(i)
    quota = {c: min(len(idx) - 1, n_val * len(idx) // n) for c, idx in members.items()}
    for _ in range(n_val - sum(quota.values())):
        open_classes = [c for c in members if quota[c] < len(members[c]) - 1] or \
                       [c for c in members if quota[c] < len(members[c])]
        c = max(sorted(open_classes), key=lambda k: len(members[k]) - quota[k])
        quota[c] += 1
    rng = Rng(seed)
    held = set()
    for c in sorted(members):
        order = rng.permutation(len(members[c]))
        held.update(members[c][k] for k in order[:quota[c]].tolist())
    train = [s for i, s in enumerate(samples) if i not in held]
    validation = [s for i, s in enumerate(samples) if i in held]
    return train, validation


def _labels(samples):
    return np.array([int(s.label) for s in samples], dtype=np.int64)


def batch_loss(model, samples, training):
    probs = model.forward_batch(samples, training)
    return cross_entropy(probs, _labels(samples), n_classes=model.spec.crp.classes)


def validation_loss(model, samples, batch_size=256):
    model.eval()
    total = 0.0
    with no_grad():
        for start in range(0, len(samples), batch_size):
            chunk = samples[start:start + batch_size]
            total += batch_loss(model, chunk, False).item() * len(chunk)
    model.train()
    return total / len(samples)


def train(model, samples, config, seed, validation=None):
    """Époques : mélange graine, mini-lots entropie croisée + Adam, perte de validation, plateau.

    Sans ensemble de validation explicite, une fraction `validation_fraction` est mise de côté.
    Avec `restore_best`, les poids rendus sont ceux de l'époque de plus faible perte de validation.
    """
    if not samples:
        raise InputError("Ensemble d'entraînement vide")
    if validation is None:
        samples, validation = holdout_validation(samples, config.validation_fraction, Rng(seed).spawn(1).seed)
    rng = Rng(seed)
    optimizer = Adam(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    scheduler = PlateauScheduler(lr=config.lr, factor=config.plateau_factor,
                                 patience=config.plateau_patience, min_lr=config.min_lr)
    history = []
    best = None
    model.train()
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(samples))
        losses = []
        for b, start in enumerate(range(0, len(samples), config.batch_size)):
            batch = [samples[i] for i in order[start:start + config.batch_size]]
            try:
                loss = batch_loss(model, batch, True)
            except NumericError as e:
                raise NumericError(f"Époque {epoch}, lot {b} : {e}")
            if not np.isfinite(loss.item()):
                raise NumericError(f"Perte non finie à l'époque {epoch}, lot {b}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step(lr=scheduler.lr)
            losses.append(loss.item() * len(batch))
        train_loss = sum(losses) / len(samples)
        val_loss = validation_loss(model, validation)
        lr = plateau_step(scheduler, val_loss)
        if best is None or val_loss < best[0]:
            best = (val_loss, epoch, model.state_dict())
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss, "lr": lr})
        if epoch % config.log_every == 0 or epoch == config.epochs:
            logger.info(f"Époque {epoch}/{config.epochs} : perte {train_loss:.4f}, validation {val_loss:.4f}, lr {lr:.2e}")
    if config.restore_best:
        model.load_state_dict(best[2])
        logger.info(f"Poids de l'époque {best[1]} restaurés (validation {best[0]:.4f})")
    model.eval()
    metadata = {"epochs_run": len(history), "final_lr": scheduler.lr, "best_epoch": best[1]}
    return Checkpoint.from_model(model, metadata, history), history


def predict(model, samples, batch_size=256):
    model.eval()
    with no_grad():
        chunks = [model.forward_batch(samples[i:i + batch_size]).data for i in range(0, len(samples), batch_size)]
    return np.concatenate(chunks, axis=0)


def evaluate(checkpoint_or_model, samples):
    """EvalReport sur `samples` déjà standardisés ; dropout désactivé."""
    if not samples:
        raise InputError("Ensemble de test vide")
    model = checkpoint_or_model.build() if isinstance(checkpoint_or_model, Checkpoint) else checkpoint_or_model
    preds = predict_classes(predict(model, samples))
    return EvalReport.from_predictions(preds, _labels(samples))


def lr_baseline_spec(spec):
    """Régression logistique multinomiale : vecteur standardisé (⊕ ARF adapté), zéro couche cachée."""
    return dataclasses.replace(
        spec,
        fnf=dataclasses.replace(spec.fnf, kind="identity"),
        crp=dataclasses.replace(spec.crp, hidden=[], dropout=0.0, arf_dropout=0.0),
    )


def lr_baseline_train(samples, spec, config, seed, validation=None):
    model = build_model(lr_baseline_spec(spec))
    checkpoint, _ = train(model, samples, config, seed, validation)
    return checkpoint


# ================================
# CHAÎNE COMPLÈTE SUR UN MAGASIN
# ================================

def prepare_training_set(store, run_config):
    """Standardisation (statistiques d'entraînement), validation mise de côté, puis SMOTE."""
    train_samples, standardizer = standardize(store.train_samples, store.standardizer)
    fit_samples, validation = holdout_validation(
        train_samples, run_config.train.validation_fraction, run_config.seed_for("validation"))
    if run_config.smote.enabled:
        if run_config.crp.mode == "end_to_end" and not run_config.crp.financial_only:
            raise ModeMismatchError("SMOTE indisponible en mode end_to_end : désactiver smote.enabled")
        if not run_config.crp.financial_only and any(s.arf is None for s in fit_samples):
            raise ModeMismatchError("SMOTE en mode precompute : ArfVector manquants, lancer `embed` d'abord")
        fit_samples = smote(fit_samples, run_config.smote, run_config.seed_for("smote"))
    return fit_samples, validation


def prepare_test_set(store):
    samples, _ = standardize(store.test_samples, store.standardizer)
    return samples


def run_training(store, run_config, baseline=False):
    fit_samples, validation = prepare_training_set(store, run_config)
    spec = ModelSpec.from_run_config(run_config, len(store.ratio_columns))
    if baseline:
        spec = lr_baseline_spec(spec)
    model = build_model(spec)
    logger.info(f"Entraînement sur {len(fit_samples)} échantillons, validation {len(validation)}")
    checkpoint, history = train(model, fit_samples, run_config.train, run_config.seed_for("train"), validation)
    checkpoint.metadata["test_keys"] = sorted(s.key for s in store.test_samples)
    checkpoint.metadata["standardization"] = store.standardizer.to_dict()
    return checkpoint, history


def run_evaluation(checkpoint, store):
    test = prepare_test_set(store)
    expected = checkpoint.metadata.get("test_keys")
    if expected is not None and sorted(s.key for s in test) != expected:
        logger.warning("Partition de test différente de celle enregistrée à l'entraînement")
    return evaluate(checkpoint, test)
