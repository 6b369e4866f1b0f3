"""Attention multi-têtes et bloc transformer (post-norm, sans encodage positionnel)."""
import numpy as np

from errors import ShapeError
from numerics.layers import LayerNorm, Linear, Module
from numerics.tensor import as_tensor, relu, softmax, transpose


class MultiHeadAttention(Module):
    def __init__(self, dim, heads, rng):
        if dim % heads:
            raise ShapeError(f"Dimension {dim} non divisible par {heads} têtes")
        self.heads = heads
        self.head_dim = dim // heads
        self.query = Linear(dim, dim, rng)
        self.key = Linear(dim, dim, rng)
        self.value = Linear(dim, dim, rng)
        self.out = Linear(dim, dim, rng)

    def _split(self, x):
        # (..., N, d) -> (..., h, N, d/h)
        lead = x.shape[:-1]
        x = x.reshape(lead + (self.heads, self.head_dim))
        axes = tuple(range(len(lead) - 1)) + (len(lead), len(lead) - 1, len(lead) + 1)
        return transpose(x, axes)

    def _merge(self, x):
        lead = x.shape[:-3]
        axes = tuple(range(len(lead))) + (len(lead) + 1, len(lead), len(lead) + 2)
        x = transpose(x, axes)
        return x.reshape(lead + (x.shape[-3], self.heads * self.head_dim))

    def attention_weights(self, x):
        x = as_tensor(x)
        q, k = self._split(self.query(x)), self._split(self.key(x))
        return softmax(q @ transpose(k) * (1.0 / np.sqrt(self.head_dim)), axis=-1)

    def forward(self, x):
        x = as_tensor(x)
        weights = self.attention_weights(x)
        v = self._split(self.value(x))
        return self.out(self._merge(weights @ v))


class TransformerBlock(Module):
    """x = LN1(x + MHA(x)) ; x = LN2(x + FFN(x)), FFN = Linear-ReLU-Linear."""

    def __init__(self, dim, heads, rng, ff_multiplier=2):
        self.attention = MultiHeadAttention(dim, heads, rng)
        self.norm1 = LayerNorm(dim)
        self.ff_in = Linear(dim, dim * ff_multiplier, rng)
        self.ff_out = Linear(dim * ff_multiplier, dim, rng)
        self.norm2 = LayerNorm(dim)

    def forward(self, x):
        x = self.norm1(as_tensor(x) + self.attention(x))
        return self.norm2(x + self.ff_out(relu(self.ff_in(x))))