"""Adam (décroissance de poids découplée) et réduction du taux sur plateau."""
import logging
from dataclasses import dataclass, field

import numpy as np

from errors import NumericError

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    first: list
    second: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class Adam:
    def __init__(self, params, lr=0.001, weight_decay=1e-5, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.state = AdamState(
            first=[np.zeros_like(p.data) for p in self.params],
            second=[np.zeros_like(p.data) for p in self.params],
            beta1=beta1, beta2=beta2, eps=eps,
        )

    def step(self, lr=None):
        adam_step(self.params, self.state, self.lr if lr is None else lr, self.weight_decay)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


def adam_step(params, state, lr, weight_decay):
    """p ← p - lr·(m̂ / (√v̂ + ε) + wd·p), avec m̂, v̂ corrigés du biais."""
    for p in params:
        if not np.isfinite(p.grad).all():
            raise NumericError(f"Gradient NaN/Inf pour le paramètre {p.name or '?'}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step
    for p, m, v in zip(params, state.first, state.second):
        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        p.data -= (lr * (update + weight_decay * p.data)).astype(p.dtype)


@dataclass
class PlateauScheduler:
    lr: float = 0.001
    factor: float = 0.5
    patience: int = 3
    min_lr: float = 1e-6
    threshold: float = 1e-8
    best: float = None
    bad_epochs: int = 0
    history: list = field(default_factory=list)

    def step(self, val_loss):
        return plateau_step(self, val_loss)


def plateau_step(sched, val_loss):
    """Divise le taux par `factor` après `patience` époques sans baisse stricte d'au moins `threshold`."""
    if not np.isfinite(val_loss):
        raise NumericError(f"Perte de validation non finie : {val_loss}")
    if sched.best is None or val_loss < sched.best - sched.threshold:
        sched.best = val_loss
        sched.bad_epochs = 0
    else:
        sched.bad_epochs += 1
        if sched.bad_epochs >= sched.patience:
            reduced = max(sched.lr * sched.factor, sched.min_lr)
            if reduced < sched.lr:
                logger.info(f"Plateau détecté : taux d'apprentissage {sched.lr:.2e} -> {reduced:.2e}")
            sched.lr = reduced
            sched.bad_epochs = 0
    sched.history.append(sched.lr)
    return sched.lr
