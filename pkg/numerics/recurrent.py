"""Cellules récurrentes GRU et LSTM (formulations à portes standard).

GRU, pour une entrée x_t et un état h_{t-1} :
    z_t = σ(W_z x_t + U_z h_{t-1} + b_z)
    r_t = σ(W_r x_t + U_r h_{t-1} + b_r)
    n_t = tanh(W_n x_t + U_n (r_t ⊙ h_{t-1}) + b_n)
    h_t = (1 - z_t) ⊙ h_{t-1} + z_t ⊙ n_t

LSTM :
    i_t = σ(W_i x_t + U_i h_{t-1} + b_i)
    f_t = σ(W_f x_t + U_f h_{t-1} + b_f)
    o_t = σ(W_o x_t + U_o h_{t-1} + b_o)
    g_t = tanh(W_g x_t + U_g h_{t-1} + b_g)
    c_t = f_t ⊙ c_{t-1} + i_t ⊙ g_t
    h_t = o_t ⊙ tanh(c_t)

États initiaux nuls. Les séquences sont (L, d) ou (B, L, d). `forget_bias` fixe b_f à
l'initialisation.
"""
import numpy as np

from errors import ShapeError
from numerics.layers import Linear, Module
from numerics.tensor import as_tensor, concat, flip, sigmoid, stack, tanh


def _zeros_state(x, hidden):
    return as_tensor(np.zeros(x.shape[:-1] + (hidden,), dtype=x.dtype))


class GRUCell(Module):
    def __init__(self, input_size, hidden_size, rng):
        self.hidden_size = hidden_size
        self.update_x = Linear(input_size, hidden_size, rng)
        self.update_h = Linear(hidden_size, hidden_size, rng, bias=False)
        self.reset_x = Linear(input_size, hidden_size, rng)
        self.reset_h = Linear(hidden_size, hidden_size, rng, bias=False)
        self.candidate_x = Linear(input_size, hidden_size, rng)
        self.candidate_h = Linear(hidden_size, hidden_size, rng, bias=False)

    def forward(self, x, h):
        z = sigmoid(self.update_x(x) + self.update_h(h))
        r = sigmoid(self.reset_x(x) + self.reset_h(h))
        n = tanh(self.candidate_x(x) + self.candidate_h(r * h))
        return (1.0 - z) * h + z * n


class LSTMCell(Module):
    def __init__(self, input_size, hidden_size, rng, forget_bias=None):
        self.hidden_size = hidden_size
        self.input_x = Linear(input_size, hidden_size, rng)
        self.input_h = Linear(hidden_size, hidden_size, rng, bias=False)
        self.forget_x = Linear(input_size, hidden_size, rng)
        self.forget_h = Linear(hidden_size, hidden_size, rng, bias=False)
        if forget_bias is not None:
            self.forget_x.bias.data[...] = forget_bias
        self.output_x = Linear(input_size, hidden_size, rng)
        self.output_h = Linear(hidden_size, hidden_size, rng, bias=False)
        self.cell_x = Linear(input_size, hidden_size, rng)
        self.cell_h = Linear(hidden_size, hidden_size, rng, bias=False)

    def forward(self, x, h, c):
        i = sigmoid(self.input_x(x) + self.input_h(h))
        f = sigmoid(self.forget_x(x) + self.forget_h(h))
        o = sigmoid(self.output_x(x) + self.output_h(h))
        g = tanh(self.cell_x(x) + self.cell_h(h))
        c = f * c + i * g
        return o * tanh(c), c


def _steps(seq):
    seq = as_tensor(seq)
    if seq.ndim < 2 or seq.shape[-2] == 0:
        raise ShapeError("Séquence vide")
    return seq, seq.shape[-2]


def _at(seq, t):
    return seq[..., t, :]


def gru_sequence(cell, seq):
    """Tous les états cachés d'une GRU unidirectionnelle, empilés sur l'axe temps."""
    seq, length = _steps(seq)
    h = _zeros_state(_at(seq, 0), cell.hidden_size)
    states = []
    for t in range(length):
        h = cell(_at(seq, t), h)
        states.append(h)
    return stack(states, axis=-2)


def bigru_forward(seq, forward_cell, backward_cell):
    """(L, m) -> (L, 2m) : état avant ⊕ état arrière à chaque position."""
    seq, _ = _steps(seq)
    ahead = gru_sequence(forward_cell, seq)
    behind = flip(gru_sequence(backward_cell, flip(seq, axis=-2)), axis=-2)
    return concat([ahead, behind], axis=-1)


def lstm_forward(seq, cell):
    """Dernier état caché d'une LSTM sur (T, d) ou (B, T, d)."""
    seq, length = _steps(seq)
    h = _zeros_state(_at(seq, 0), cell.hidden_size)
    c = _zeros_state(_at(seq, 0), cell.hidden_size)
    for t in range(length):
        h, c = cell(_at(seq, t), h, c)
    return h


class BiGRU(Module):
    def __init__(self, input_size, hidden_size, rng):
        self.forward_cell = GRUCell(input_size, hidden_size, rng)
        self.backward_cell = GRUCell(input_size, hidden_size, rng)

    def forward(self, seq):
        return bigru_forward(seq, self.forward_cell, self.backward_cell)


class LSTM(Module):
    def __init__(self, input_size, hidden_size, rng, forget_bias=None):
        self.cell = LSTMCell(input_size, hidden_size, rng, forget_bias)

    def forward(self, seq):
        return lstm_forward(seq, self.cell)
