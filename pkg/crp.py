"""Fusion [X^F ; X^A], tête MLP softmax et modèle complet (modes precompute / end_to_end)."""
import dataclasses
import hashlib
import json
import logging

import numpy as np

from arf import ArfConfig, ArfEncoder, ReportDocument, build_provider
from dataset import RatingClass
from errors import DimensionMismatchError, ModeMismatchError, ShapeError
from fnf import FnfConfig, build_fnf_encoder, encoder_output_dim
from numerics import Linear, Module, Rng, Tensor, activation, as_tensor, concat, softmax, stack
from numerics.tensor import default_dtype, dropout, relu

logger = logging.getLogger(__name__)

PIPELINE_MODES = ("precompute", "end_to_end")


@dataclasses.dataclass
class CrpConfig:
    hidden: list = dataclasses.field(default_factory=lambda: [256, 64])
    activation: str = "relu"
    dropout: float = 0.2
    classes: int = 7
    mode: str = "precompute"
    financial_only: bool = False
    adapter_dim: int = 128
    arf_dropout: float = 0.5

    def validate(self):
        problems = []
        if not self.hidden:
            problems.append("hidden doit contenir au moins une couche")
        if any(not isinstance(w, int) or w < 1 for w in self.hidden):
            problems.append(f"largeurs de couches invalides : {self.hidden}")
        if self.activation not in ("relu", "tanh", "sigmoid", "leaky_relu", "elu"):
            problems.append(f"activation inconnue : {self.activation!r}")
        if not 0 <= self.dropout < 1:
            problems.append(f"dropout doit être dans [0, 1[ (reçu {self.dropout})")
        if self.classes != len(RatingClass):
            problems.append(f"classes doit valoir {len(RatingClass)}")
        if self.mode not in PIPELINE_MODES:
            problems.append(f"mode doit valoir l'un de {PIPELINE_MODES} (reçu {self.mode!r})")
        if self.adapter_dim < 1:
            problems.append("adapter_dim doit être >= 1")
        if not 0 <= self.arf_dropout < 1:
            problems.append(f"arf_dropout doit être dans [0, 1[ (reçu {self.arf_dropout})")
        return problems


@dataclasses.dataclass
class ModelSpec:
    n_features: int
    fnf: FnfConfig
    arf: ArfConfig
    crp: CrpConfig
    seeds: dict

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(
            n_features=int(data["n_features"]),
            fnf=FnfConfig(**data["fnf"]),
            arf=ArfConfig(**data["arf"]),
            crp=CrpConfig(**data["crp"]),
            seeds={k: int(v) for k, v in data["seeds"].items()},
        )

    @classmethod
    def from_run_config(cls, config, n_features):
        return cls(
            n_features=n_features,
            fnf=config.fnf,
            arf=config.arf,
            crp=config.crp,
            seeds={name: config.seed_for(name) for name in ("fnf", "arf", "crp")},
        )

    def canonical_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def digest(self):
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    @property
    def arf_dim(self):
        """Largeur de la partie ARF de Z."""
        if self.crp.financial_only:
            return 0
        return self.crp.adapter_dim if self.crp.mode == "precompute" else self.arf.output_dim

    @property
    def fusion_dim(self):
        return encoder_output_dim(self.n_features, self.fnf) + self.arf_dim


# ================================
# FUSION ET TÊTE MLP
# ================================

def fuse(xf, xa=None, financial_only=False):
    """Z = [xf ; xa] le long du dernier axe ; xf seul en mode financier."""
    if financial_only or xa is None or as_tensor(xa).shape[-1] == 0:
        return as_tensor(xf)
    return concat([as_tensor(xf), as_tensor(xa)], axis=-1)


class MlpHead(Module):
    """h_k = σ(W_k h_{k-1} + b_k) ; ŷ = softmax(W_L h + b_L). Sans couche cachée : régression logistique."""

    def __init__(self, in_dim, hidden, classes, rng, kind="relu", rate=0.0):
        widths = [in_dim] + list(hidden)
        self.layers = [Linear(widths[i], widths[i + 1], rng) for i in range(len(hidden))]
        self.output = Linear(widths[-1], classes, rng)
        self.kind = kind
        self.rate = rate
        self.dropout_rng = rng.spawn(0xD0)

    def logits(self, z, training=False):
        h = as_tensor(z)
        expected = (self.layers[0] if self.layers else self.output).in_features
        if h.shape[-1] != expected:
            raise ShapeError(f"Entrée de largeur {h.shape[-1]} pour une tête attendant {expected}")
        for layer in self.layers:
            h = dropout(activation(layer(h), self.kind), self.rate, self.dropout_rng, training)
        return self.output(h)

    def forward(self, z, training=False):
        return softmax(self.logits(z, training), axis=-1)


def mlp_forward(z, head, training=False):
    return head(z, training)


def predict_class(probs):
    """argmax ; égalité -> indice de classe le plus bas."""
    return RatingClass(int(np.argmax(probs.data if isinstance(probs, Tensor) else np.asarray(probs))))


def predict_classes(probs):
    return np.argmax(np.asarray(probs), axis=-1).astype(np.int64)


# ================================
# MODÈLE COMPLET
# ================================

class CreditRatingModel(Module):
    def __init__(self, spec, provider=None):
        self.spec = spec
        rng = Rng(spec.seeds["crp"])
        self.fnf = build_fnf_encoder(spec.n_features, spec.fnf, spec.seeds["fnf"])
        self.adapter = None
        self.arf = None
        self.provider = None
        self._embeddings = {}
        self.arf_dropout_rng = rng.spawn(0xAF)
        if not spec.crp.financial_only:
            if spec.crp.mode == "precompute":
                self.adapter = Linear(spec.arf.output_dim, spec.crp.adapter_dim, rng)
            else:
                self.arf = ArfEncoder(spec.arf, spec.seeds["arf"])
                self.provider = provider or build_provider(spec.arf)
        self.head = MlpHead(spec.fusion_dim, spec.crp.hidden, spec.crp.classes, rng,
                            spec.crp.activation, spec.crp.dropout)
        for name, p in self.named_parameters().items():
            p.name = name

    def _document_embeddings(self, sample):
        if sample.key not in self._embeddings:
            if not sample.report:
                raise ModeMismatchError(f"Mode end_to_end : aucun rapport pour ({sample.corporation}, {sample.year})")
            document = ReportDocument.from_file(sample.report, sample.corporation, sample.year,
                                                self.spec.arf.min_tokens)
            self._embeddings[sample.key] = self.provider.embed_document(document)
        return self._embeddings[sample.key]

    def arf_features(self, samples, training=False):
        """X^A (adaptée en mode precompute), avec dropout `arf_dropout` à l'entraînement."""
        if self.spec.crp.financial_only:
            return None
        if self.spec.crp.mode == "precompute":
            missing = [s for s in samples if s.arf is None]
            if missing:
                s = missing[0]
                raise ModeMismatchError(
                    f"Mode precompute : ArfVector absent pour ({s.corporation}, {s.year}) ; lancer `embed` d'abord")
            matrix = np.stack([s.arf for s in samples]).astype(default_dtype())
            if matrix.shape[1] != self.spec.arf.output_dim:
                raise DimensionMismatchError(
                    f"ArfVector de dimension {matrix.shape[1]}, modèle attendant {self.spec.arf.output_dim}")
            xa = relu(self.adapter(matrix))
        else:
            xa = stack([self.arf(self._document_embeddings(s)) for s in samples], axis=0)
        return dropout(xa, self.spec.crp.arf_dropout, self.arf_dropout_rng, training)

    def forward_batch(self, samples, training=False):
        financial = np.stack([s.financial for s in samples]).astype(default_dtype())
        training = training and self.training
        xf = self.fnf(financial)
        z = fuse(xf, self.arf_features(samples, training), self.spec.crp.financial_only)
        return self.head(z, training)

    def forward(self, samples, training=False):
        return self.forward_batch(samples, training)


def model_forward(sample, model, training=False):
    """Probabilités (7,) pour un échantillon."""
    return model.forward_batch([sample], training)[0]


def build_model(spec, provider=None):
    model = CreditRatingModel(spec, provider)
    logger.debug(f"Modèle {spec.fnf.kind}/{spec.crp.mode} : {sum(p.data.size for p in model.parameters())} paramètres")
    return model
