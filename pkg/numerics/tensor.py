"""Tenseur dense avec différentiation en mode inverse.

Chaque opération enregistre ses parents et une fonction `_backward` qui
accumule le gradient de sortie dans les parents. `backward()` parcourt le
graphe en ordre topologique inverse.
"""
import contextlib

import numpy as np

from errors import NumericError, ShapeError

_STATE = {"dtype": np.float32, "grad": True}


@contextlib.contextmanager
def precision(dtype):
    """Change la précision des tenseurs créés (float32 par défaut)."""
    previous = _STATE["dtype"]
    _STATE["dtype"] = np.dtype(dtype).type
    try:
        yield
    finally:
        _STATE["dtype"] = previous


@contextlib.contextmanager
def no_grad():
    previous = _STATE["grad"]
    _STATE["grad"] = False
    try:
        yield
    finally:
        _STATE["grad"] = previous


def default_dtype():
    return _STATE["dtype"]


def grad_enabled():
    return _STATE["grad"]


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype.kind == "f" else default_dtype()
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None

    # ----- propriétés -----
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def T(self):
        return transpose(self)

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # ----- rétropropagation -----
    def backward(self):
        if self.data.size != 1:
            raise ShapeError(f"backward() attend un scalaire, forme reçue {self.shape}")
        order = _topological_order(self)
        for node in order:
            if isinstance(node, Parameter):
                node.zero_grad()
            else:
                node.grad = None
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if not np.isfinite(node.grad).all():
                    raise NumericError(f"Gradient non fini rencontré ({node!r})")
        for node in order:
            if node._parents and not isinstance(node, Parameter):
                node.grad = None

    # ----- opérateurs -----
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)


class Parameter(Tensor):
    """Tenseur entraînable ; `grad` a toujours la forme de `value`."""

    def __init__(self, value, name=None):
        super().__init__(value, requires_grad=True, name=name)
        self.grad = np.zeros_like(self.data)

    @property
    def value(self):
        return self.data

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)


def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    if isinstance(value, np.ndarray) and value.dtype.kind == "f":
        return Tensor(value)
    return Tensor(np.asarray(value, dtype=default_dtype()))


def _result(data, parents, backward):
    out = Tensor(data)
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ================================
# ARITHMÉTIQUE
# ================================

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _result(a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _result(a.data - b.data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _result(a.data * b.data, (a, b), backward)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _result(a.data / b.data, (a, b), backward)


def power(a, exponent):
    a = as_tensor(a)

    def backward(g):
        a._accumulate(g * exponent * a.data ** (exponent - 1))

    return _result(a.data ** exponent, (a,), backward)


def matmul(a, b):
    """Produit matriciel (éventuellement par lots sur les axes de tête)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 1 or b.ndim < 1 or a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"matmul : dimensions internes incompatibles {a.shape} × {b.shape}")

    def backward(g):
        ad, bd = a.data, b.data
        gm = g
        if bd.ndim == 1:
            bd = bd[:, None]
            gm = g[..., None]
        if ad.ndim == 1:
            ad = ad[None, :]
            gm = gm[..., None, :]
        if a.requires_grad:
            ga = gm @ np.swapaxes(bd, -1, -2)
            if a.ndim == 1:
                ga = ga[..., 0, :]
            a._accumulate(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.swapaxes(ad, -1, -2) @ gm
            if b.ndim == 1:
                gb = gb[..., 0]
            b._accumulate(_unbroadcast(gb, b.shape))

    return _result(np.matmul(a.data, b.data), (a, b), backward)


# ================================
# RÉDUCTIONS ET FORMES
# ================================

def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape))

    return _result(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    count = a.data.size if axis is None else np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])
    return tsum(a, axis, keepdims) * (1.0 / count)


def reshape(a, shape):
    a = as_tensor(a)

    def backward(g):
        a._accumulate(g.reshape(a.shape))

    return _result(a.data.reshape(shape), (a,), backward)


def transpose(a, axes=None):
    a = as_tensor(a)
    if axes is None:
        axes = tuple(range(a.ndim))[:-2] + (a.ndim - 1, a.ndim - 2) if a.ndim >= 2 else (0,)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        a._accumulate(np.transpose(g, inverse))

    return _result(np.transpose(a.data, axes), (a,), backward)


def getitem(a, index):
    a = as_tensor(a)

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        a._accumulate(full)

    return _result(a.data[index], (a,), backward)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, bounds, axis=axis)):
            if t.requires_grad:
                t._accumulate(piece)

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def backward(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t._accumulate(np.take(g, i, axis=axis))

    return _result(np.stack([t.data for t in tensors], axis=axis), tensors, backward)


def flip(a, axis):
    a = as_tensor(a)

    def backward(g):
        a._accumulate(np.flip(g, axis=axis))

    return _result(np.flip(a.data, axis=axis).copy(), (a,), backward)


# ================================
# FONCTIONS ÉLÉMENTAIRES
# ================================

def _unary(a, value, local_grad):
    a = as_tensor(a)

    def backward(g):
        a._accumulate(g * local_grad())

    return _result(value, (a,), backward)


def exp(a):
    a = as_tensor(a)
    value = np.exp(a.data)
    return _unary(a, value, lambda: value)


def log(a):
    a = as_tensor(a)
    return _unary(a, np.log(a.data), lambda: 1.0 / a.data)


def sqrt(a):
    a = as_tensor(a)
    value = np.sqrt(a.data)
    return _unary(a, value, lambda: 0.5 / value)


def tanh(a):
    a = as_tensor(a)
    value = np.tanh(a.data)
    return _unary(a, value, lambda: 1.0 - value * value)


def sigmoid(a):
    a = as_tensor(a)
    value = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _unary(a, value, lambda: value * (1.0 - value))


def relu(a):
    a = as_tensor(a)
    return _unary(a, np.maximum(a.data, 0), lambda: (a.data > 0).astype(a.dtype))


def leaky_relu(a, slope=0.2):
    a = as_tensor(a)
    positive = a.data > 0
    return _unary(a, np.where(positive, a.data, slope * a.data),
                  lambda: np.where(positive, 1.0, slope).astype(a.dtype))


def elu(a, alpha=1.0):
    a = as_tensor(a)
    positive = a.data > 0
    negative_part = alpha * (np.exp(np.minimum(a.data, 0)) - 1.0)
    value = np.where(positive, a.data, negative_part)
    return _unary(a, value, lambda: np.where(positive, 1.0, negative_part + alpha).astype(a.dtype))


def clip(a, low, high):
    a = as_tensor(a)
    inside = (a.data >= low) & (a.data <= high)
    return _unary(a, np.clip(a.data, low, high), lambda: inside.astype(a.dtype))


def activation(x, kind, slope=0.2):
    if kind == "tanh":
        return tanh(x)
    if kind == "relu":
        return relu(x)
    if kind == "leaky_relu":
        return leaky_relu(x, slope)
    if kind == "elu":
        return elu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"Activation inconnue : {kind}")


def softmax(a, axis=-1):
    """Softmax stable (soustraction du maximum)."""
    a = as_tensor(a)
    if np.isnan(a.data).any():
        raise NumericError("softmax : entrée NaN")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    value = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * value).sum(axis=axis, keepdims=True)
        a._accumulate(value * (g - inner))

    return _result(value, (a,), backward)


def cross_entropy(probs, labels, n_classes=7, eps=1e-12):
    """-log(p[label]) moyen sur le lot, p borné inférieurement par eps."""
    probs = as_tensor(probs)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"Étiquette hors de l'intervalle 0..{n_classes - 1} : {labels.tolist()}")
    batch = probs if probs.ndim == 2 else reshape(probs, (1, -1))
    picked = batch[np.arange(len(labels)), labels]
    return -mean(log(clip(picked, eps, 1.0)))


def dropout(x, rate, rng, training):
    """Dropout inversé ; identité hors entraînement."""
    x = as_tensor(x)
    if not training or rate <= 0:
        return x
    keep = (rng.uniform(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return mul(x, Tensor(keep, dtype=x.dtype))
