"""Couches de base : Module, Linear, Conv2d, pooling, LayerNorm, Dropout."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from errors import ShapeError
from numerics.tensor import (
    Parameter, _result, as_tensor, default_dtype, dropout, mean, sqrt,
)


def uniform_init(rng, shape, fan_in):
    """Uniforme(-sqrt(1/fan_in), +sqrt(1/fan_in))."""
    bound = np.sqrt(1.0 / max(fan_in, 1))
    return rng.uniform(shape, -bound, bound).astype(default_dtype())


class Module:
    training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix=""):
        found = {}
        for attr, value in vars(self).items():
            key = f"{prefix}{attr}"
            if isinstance(value, Parameter):
                found[key] = value
            elif isinstance(value, Module):
                found.update(value.named_parameters(f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        found.update(item.named_parameters(f"{key}.{i}."))
                    elif isinstance(item, Parameter):
                        found[f"{key}.{i}"] = item
        return found

    def parameters(self):
        return list(self.named_parameters().values())

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def _children(self):
        for value in vars(self).values():
            if isinstance(value, Module):
                yield value
            elif isinstance(value, (list, tuple)):
                yield from (v for v in value if isinstance(v, Module))

    def train(self, mode=True):
        self.training = mode
        for child in self._children():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_parameters().items()}

    def load_state_dict(self, state):
        params = self.named_parameters()
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise KeyError(f"Paramètres manquants {missing}, inattendus {unexpected}")
        for name, p in params.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ShapeError(f"{name} : forme {value.shape} au lieu de {p.shape}")
            p.data = value.astype(p.dtype).copy()
            p.zero_grad()


class Linear(Module):
    """y = x Wᵀ + b, W de forme (sortie, entrée)."""

    def __init__(self, in_features, out_features, rng, bias=True):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(uniform_init(rng, (out_features, in_features), in_features))
        self.bias = Parameter(uniform_init(rng, (out_features,), in_features)) if bias else None

    def forward(self, x):
        out = as_tensor(x) @ self.weight.T
        if self.bias is not None:
            out = out + self.bias
        return out


def _conv_geometry(height, width, k, stride, padding):
    if k % 2 == 0:
        raise ShapeError(f"Taille de noyau paire non supportée : {k}")
    span_h, span_w = height + 2 * padding - k, width + 2 * padding - k
    if span_h < 0 or span_w < 0:
        raise ShapeError(f"Entrée {height}×{width} trop petite pour un noyau {k} (padding {padding})")
    if span_h % stride or span_w % stride:
        raise ShapeError(f"Géométrie non divisible : ({height}+2·{padding}-{k}) / {stride}")
    return span_h // stride + 1, span_w // stride + 1


def conv2d(x, kernels, bias, stride=1, padding=0):
    """Corrélation croisée : H[f,i,j] = Σ_c Σ_u Σ_v X[c, i·s+u, j·s+v] G[f,c,u,v] + b[f].

    Entrée (C,H,W) ou (B,C,H,W), noyaux (F,C,k,k), sortie (F,H',W') ou (B,F,H',W').
    """
    x, kernels = as_tensor(x), as_tensor(kernels)
    squeeze = x.ndim == 3
    data = x.data[None] if squeeze else x.data
    n_filters, channels, k, _ = kernels.shape
    if data.shape[1] != channels:
        raise ShapeError(f"conv2d : {data.shape[1]} canaux d'entrée, noyaux pour {channels}")
    out_h, out_w = _conv_geometry(data.shape[2], data.shape[3], k, stride, padding)
    padded = np.pad(data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(padded, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    value = np.einsum("bchwuv,fcuv->bfhw", windows, kernels.data, optimize=True)
    parents = [x, kernels]
    if bias is not None:
        bias = as_tensor(bias)
        value = value + bias.data[None, :, None, None]
        parents.append(bias)

    def backward(g):
        g4 = g[None] if squeeze else g
        if kernels.requires_grad:
            kernels._accumulate(np.einsum("bchwuv,bfhw->fcuv", windows, g4, optimize=True))
        if bias is not None and bias.requires_grad:
            bias._accumulate(g4.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            grad_padded = np.zeros_like(padded)
            for u in range(k):
                for v in range(k):
                    grad_padded[:, :, u:u + stride * out_h:stride, v:v + stride * out_w:stride] += np.einsum(
                        "bfhw,fc->bchw", g4, kernels.data[:, :, u, v], optimize=True)
            height, width = data.shape[2], data.shape[3]
            grad_x = grad_padded[:, :, padding:padding + height, padding:padding + width]
            x._accumulate(grad_x[0] if squeeze else grad_x)

    return _result(value[0] if squeeze else value, parents, backward)


def maxpool2d(x, window=2, stride=2):
    """Maximum par fenêtre ; le gradient va à la première occurrence du maximum."""
    x = as_tensor(x)
    if window != stride:
        raise ShapeError("maxpool2d : seules les fenêtres disjointes (window == stride) sont supportées")
    squeeze = x.ndim == 3
    data = x.data[None] if squeeze else x.data
    batch, channels, height, width = data.shape
    if height % window or width % window:
        raise ShapeError(f"maxpool2d : extents {height}×{width} non divisibles par {window}")
    oh, ow = height // window, width // window
    blocks = data.reshape(batch, channels, oh, window, ow, window).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(batch, channels, oh, ow, window * window)
    arg = blocks.argmax(axis=-1)
    value = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        g4 = g[None] if squeeze else g
        routed = np.zeros_like(blocks)
        np.put_along_axis(routed, arg[..., None], g4[..., None], axis=-1)
        routed = routed.reshape(batch, channels, oh, ow, window, window).transpose(0, 1, 2, 4, 3, 5)
        routed = routed.reshape(batch, channels, height, width)
        x._accumulate(routed[0] if squeeze else routed)

    return _result(value[0] if squeeze else value, (x,), backward)


class Conv2d(Module):
    def __init__(self, in_channels, out_channels, kernel_size, rng, stride=1, padding=0):
        fan_in = in_channels * kernel_size * kernel_size
        self.stride = stride
        self.padding = padding
        self.weight = Parameter(uniform_init(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in))
        self.bias = Parameter(uniform_init(rng, (out_channels,), fan_in))

    def forward(self, x):
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)


class LayerNorm(Module):
    def __init__(self, dim, eps=1e-5):
        self.eps = eps
        self.gamma = Parameter(np.ones(dim, dtype=default_dtype()))
        self.beta = Parameter(np.zeros(dim, dtype=default_dtype()))

    def forward(self, x):
        centered = x - mean(x, axis=-1, keepdims=True)
        variance = mean(centered * centered, axis=-1, keepdims=True)
        return centered / sqrt(variance + self.eps) * self.gamma + self.beta


class Dropout(Module):
    def __init__(self, rate, rng):
        self.rate = rate
        self.rng = rng

    def forward(self, x):
        return dropout(x, self.rate, self.rng, self.training)


def flatten(x, start=1):
    x = as_tensor(x)
    return x.reshape(x.shape[:start] + (-1,))
