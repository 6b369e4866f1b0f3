from numerics.attention import MultiHeadAttention, TransformerBlock
from numerics.gradcheck import grad_check
from numerics.layers import Conv2d, Dropout, LayerNorm, Linear, Module, conv2d, flatten, maxpool2d
from numerics.optim import Adam, AdamState, PlateauScheduler, adam_step, plateau_step
from numerics.recurrent import LSTM, BiGRU, GRUCell, LSTMCell, bigru_forward, gru_sequence, lstm_forward
from numerics.rng import Rng, derive_seed, splitmix64
from numerics.tensor import (
    Parameter, Tensor, activation, as_tensor, concat, cross_entropy, elu, leaky_relu, matmul,
    no_grad, precision, relu, sigmoid, softmax, stack, tanh,
)
