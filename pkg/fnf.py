"""Encodeurs de caractéristiques financières : CNN sur image, GAT sur graphe complet, LSTM."""
import dataclasses

import numpy as np

from errors import ShapeError
from numerics import (
    LSTM, Conv2d, Linear, Module, Parameter, Rng, Tensor, as_tensor, concat, flatten, maxpool2d,
    relu, softmax,
)
from numerics.layers import uniform_init
from numerics.tensor import default_dtype, elu, leaky_relu, mean

ENCODER_KINDS = ("cnn", "gnn", "rnn", "identity")


@dataclasses.dataclass
class FnfConfig:
    kind: str = "cnn"
    output_dim: int = 64
    image_size: int = 8
    cnn_channels: list = dataclasses.field(default_factory=lambda: [16, 32])
    kernel_size: int = 3
    gnn_layers: int = 2
    gnn_hidden: int = 16
    gat_slope: float = 0.2
    rnn_hidden: int = 64
    rnn_step_dim: int = 16
    rnn_forget_bias: float = 2.0

    def validate(self):
        problems = []
        if self.kind not in ENCODER_KINDS:
            problems.append(f"kind doit valoir l'une de {ENCODER_KINDS} (reçu {self.kind!r})")
        if self.output_dim < 1:
            problems.append("output_dim doit être >= 1")
        if self.kernel_size % 2 == 0:
            problems.append("kernel_size doit être impair")
        if self.image_size % (2 ** len(self.cnn_channels)):
            problems.append(f"image_size {self.image_size} incompatible avec {len(self.cnn_channels)} étages de pooling")
        if self.gnn_layers < 1 or self.rnn_step_dim < 2:
            problems.append("gnn_layers >= 1 et rnn_step_dim >= 2 requis")
        return problems


# ================================
# ENCODAGE EN IMAGE
# ================================

class ChannelProjection:
    """Projection linéaire aléatoire figée N -> 3·S², sans biais."""

    def __init__(self, n_features, image_size, seed):
        self.image_size = image_size
        self.matrix = Rng(seed).normal((n_features, 3 * image_size * image_size)) / np.sqrt(n_features)

    def __call__(self, x):
        return np.asarray(x, dtype=np.float64) @ self.matrix


def project_channels(x, seed, image_size=8):
    x = np.asarray(x, dtype=np.float64)
    return ChannelProjection(x.shape[-1], image_size, seed)(x)


def encode_image(channels, image_size=8):
    """P = round((L - min) / (max - min) · 255) par canal ; canal constant -> 0.

    Entrée (3·S²,) ou (B, 3·S²), sortie entière (3, S, S) ou (B, 3, S, S).
    """
    channels = np.asarray(channels, dtype=np.float64)
    squeeze = channels.ndim == 1
    grid = channels.reshape((-1, 3, image_size * image_size))
    low = grid.min(axis=-1, keepdims=True)
    high = grid.max(axis=-1, keepdims=True)
    span = high - low
    flat = span[..., 0] == 0
    scaled = np.rint((grid - low) / np.where(span == 0, 1.0, span) * 255.0)
    scaled[flat] = 0.0
    image = scaled.astype(np.int64).reshape((-1, 3, image_size, image_size))
    return image[0] if squeeze else image


class CnnEncoder(Module):
    """conv-relu-pool ×2 -> aplatissement -> linéaire."""

    def __init__(self, n_features, config, rng, projection_seed):
        self.image_size = config.image_size
        self.projection = ChannelProjection(n_features, config.image_size, projection_seed)
        pad = config.kernel_size // 2
        widths = [3] + list(config.cnn_channels)
        self.convs = [Conv2d(widths[i], widths[i + 1], config.kernel_size, rng, padding=pad)
                      for i in range(len(config.cnn_channels))]
        side = config.image_size // (2 ** len(config.cnn_channels))
        self.head = Linear(widths[-1] * side * side, config.output_dim, rng)

    def images(self, financial):
        return encode_image(self.projection(financial), self.image_size)

    def cnn_forward(self, image):
        x = as_tensor((np.asarray(image, dtype=np.float64) / 255.0).astype(default_dtype()))
        squeeze = x.ndim == 3
        if squeeze:
            x = x.reshape((1,) + x.shape)
        for conv in self.convs:
            x = maxpool2d(relu(conv(x)))
        out = self.head(flatten(x))
        return out[0] if squeeze else out

    def forward(self, financial):
        return self.cnn_forward(self.images(np.atleast_2d(financial)))


# ================================
# GRAPHE DE CARACTÉRISTIQUES
# ================================

@dataclasses.dataclass
class FeatureGraph:
    """d nœuds (un par ratio) ; voisinage = graphe complet avec boucles."""
    nodes: Tensor
    adjacency: np.ndarray

    @classmethod
    def complete(cls, nodes):
        d = nodes.shape[-2]
        return cls(nodes, np.ones((d, d), dtype=bool))


class GatLayer(Module):
    """α_ij = softmax_j(LeakyReLU(aᵀ[Θx_i ‖ Θx_j])) sur N(i) ∪ {i} ; x_i' = Σ_j α_ij Θx_j."""

    def __init__(self, in_dim, out_dim, rng, slope=0.2):
        self.slope = slope
        self.theta = Linear(in_dim, out_dim, rng, bias=False)
        self.attn_src = Parameter(uniform_init(rng, (out_dim,), 2 * out_dim))
        self.attn_dst = Parameter(uniform_init(rng, (out_dim,), 2 * out_dim))

    def attention(self, nodes, adjacency=None):
        wh = self.theta(nodes)
        src = (wh @ self.attn_src).reshape(wh.shape[:-1] + (1,))
        dst = (wh @ self.attn_dst).reshape(wh.shape[:-2] + (1, wh.shape[-2]))
        scores = leaky_relu(src + dst, self.slope)
        if adjacency is not None and not adjacency.all():
            scores = scores + np.where(adjacency, 0.0, -1e9).astype(scores.dtype)
        return softmax(scores, axis=-1), wh

    def forward(self, nodes, adjacency=None):
        alpha, wh = self.attention(as_tensor(nodes), adjacency)
        return alpha @ wh


def gat_layer(nodes, layer, adjacency=None):
    return layer(nodes, adjacency)


class GnnEncoder(Module):
    """GAT (ELU entre couches) -> moyenne sur les nœuds -> linéaire."""

    def __init__(self, n_features, config, rng):
        self.node_embedding = Parameter(uniform_init(rng, (n_features, config.gnn_hidden), 1))
        dims = [config.gnn_hidden] * (config.gnn_layers + 1)
        self.layers = [GatLayer(dims[i], dims[i + 1], rng, config.gat_slope) for i in range(config.gnn_layers)]
        self.head = Linear(dims[-1], config.output_dim, rng)

    def build_graph(self, financial):
        values = as_tensor(np.atleast_2d(np.asarray(financial, dtype=self.node_embedding.dtype)))
        nodes = values.reshape(values.shape + (1,)) * self.node_embedding
        return FeatureGraph.complete(nodes)

    def gnn_forward(self, graph):
        x = graph.nodes
        for i, layer in enumerate(self.layers):
            x = layer(x, graph.adjacency)
            if i < len(self.layers) - 1:
                x = elu(x)
        return self.head(mean(x, axis=-2))

    def forward(self, financial):
        return self.gnn_forward(self.build_graph(financial))


# ================================
# ENCODEUR RÉCURRENT
# ================================

class RnnEncoder(Module):
    """Chaque ratio j devient un pas : embedding_j (dim-1) ⊕ valeur_j -> LSTM -> linéaire.

    Les ratios du début de séquence traversent N-1 portes d'oubli avant l'état final ;
    b_f = `rnn_forget_bias` garde leur contribution d'un ordre comparable aux derniers.
    """

    def __init__(self, n_features, config, rng):
        self.index_embedding = Parameter(uniform_init(rng, (n_features, config.rnn_step_dim - 1), 1))
        self.lstm = LSTM(config.rnn_step_dim, config.rnn_hidden, rng, config.rnn_forget_bias)
        self.head = Linear(config.rnn_hidden, config.output_dim, rng)

    def steps(self, financial):
        values = np.atleast_2d(np.asarray(financial, dtype=self.index_embedding.dtype))
        batch, n = values.shape
        emb = self.index_embedding.reshape((1, n, -1)) * np.ones((batch, 1, 1), dtype=values.dtype)
        return concat([emb, as_tensor(values[..., None])], axis=-1)

    def rnn_forward(self, financial):
        return self.head(self.lstm(self.steps(financial)))

    def forward(self, financial):
        return self.rnn_forward(financial)


class IdentityEncoder(Module):
    """X^F = vecteur standardisé (ligne de base régression logistique)."""

    def __init__(self, n_features):
        self.output_dim = n_features

    def forward(self, financial):
        return as_tensor(np.atleast_2d(np.asarray(financial)).astype(default_dtype()))


def build_fnf_encoder(n_features, config, seed):
    if n_features < 1:
        raise ShapeError("Au moins une caractéristique financière est requise")
    rng = Rng(seed)
    if config.kind == "cnn":
        return CnnEncoder(n_features, config, rng, projection_seed=rng.spawn(1).seed)
    if config.kind == "gnn":
        return GnnEncoder(n_features, config, rng)
    if config.kind == "rnn":
        return RnnEncoder(n_features, config, rng)
    if config.kind == "identity":
        return IdentityEncoder(n_features)
    raise ValueError(f"Type d'encodeur inconnu : {config.kind}")


def encoder_output_dim(n_features, config):
    return n_features if config.kind == "identity" else config.output_dim
