import numpy as np

from numerics.tensor import no_grad


def grad_check(loss_fn, tensors, h=1e-4, floor=1e-4):
    """Écart relatif maximal entre gradients analytiques et différences centrées.

    `loss_fn()` doit rendre un scalaire construit à partir de `tensors`
    (de préférence en float64). Écart = |a - n| / max(|a|, |n|, floor).
    """
    loss = loss_fn()
    loss.backward()
    analytic = [np.array(t.grad, dtype=np.float64, copy=True) for t in tensors]
    worst = 0.0
    with no_grad():
        for t, grad in zip(tensors, analytic):
            flat = t.data.reshape(-1)
            for i in range(flat.size):
                saved = flat[i]
                flat[i] = saved + h
                plus = float(loss_fn().data)
                flat[i] = saved - h
                minus = float(loss_fn().data)
                flat[i] = saved
                numeric = (plus - minus) / (2.0 * h)
                a = grad.reshape(-1)[i]
                worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), floor))
    return worst
