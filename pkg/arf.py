"""Encodeur hiérarchique des rapports annuels.

Phrases -> lots de 50 -> plongements (fournisseur) -> bi-GRU -> attention par phrase
-> un vecteur de paragraphe par lot -> blocs transformer -> moyenne -> projection d_A.
"""
import dataclasses
import functools
import logging
import os
import re
import struct

import numpy as np

from dataset import report_key
from errors import (
    DimensionMismatchError, EmptyDocumentError, FormatError, InputError, MissingEmbeddingError,
)
from numerics import BiGRU, Linear, Module, Parameter, Rng, TransformerBlock, as_tensor, softmax, stack, tanh
from numerics.layers import uniform_init
from numerics.tensor import default_dtype, mean, no_grad

logger = logging.getLogger(__name__)

ARFE_MAGIC = b"ARFE"
ARFE_VERSION = 1


@dataclasses.dataclass
class ArfConfig:
    embedding_dim: int = 32
    max_tokens: int = 512
    batch_size: int = 50
    att_dim: int = 16
    blocks: int = 2
    heads: int = 4
    ff_multiplier: int = 2
    output_dim: int = 1536
    min_tokens: int = 3
    provider: str = "hash"
    provider_seed: int = None

    def validate(self):
        problems = []
        for name in ("embedding_dim", "max_tokens", "batch_size", "att_dim", "output_dim", "heads"):
            if getattr(self, name) < 1:
                problems.append(f"{name} doit être >= 1")
        if self.heads >= 1 and (2 * self.embedding_dim) % self.heads:
            problems.append(f"2·embedding_dim ({2 * self.embedding_dim}) non divisible par heads ({self.heads})")
        if self.provider != "hash" and not self.provider.startswith("cache:"):
            problems.append(f"provider doit valoir 'hash' ou 'cache:CHEMIN' (reçu {self.provider!r})")
        seed = self.provider_seed
        if seed is not None and (type(seed) is not int or seed < 0):
            problems.append(f"provider_seed doit être un entier positif (reçu {self.provider_seed!r})")
        return problems


@dataclasses.dataclass
class ReportDocument:
    corporation: str
    year: int
    sentences: list

    @classmethod
    def from_text(cls, corporation, year, text, min_tokens=3):
        return cls(corporation, int(year), split_sentences(text, min_tokens))

    @classmethod
    def from_file(cls, path, corporation, year, min_tokens=3):
        if not path or not os.path.exists(path):
            raise InputError(f"Rapport introuvable pour ({corporation}, {year}) : {path}")
        with open(path, encoding="utf-8") as f:
            text = f.read()
        try:
            return cls.from_text(corporation, year, text, min_tokens)
        except EmptyDocumentError:
            raise EmptyDocumentError(f"Rapport vide après filtrage : {path}")


# ================================
# PHRASES ET LOTS
# ================================

_DELIMITERS = re.compile(r"[.!?\n]")


def split_sentences(text, min_tokens=3):
    """Découpe sur '.', '!', '?' et fin de ligne ; phrases de moins de `min_tokens` mots écartées."""
    sentences = [" ".join(part.split()) for part in _DELIMITERS.split(text)]
    kept = [s for s in sentences if len(s.split()) >= min_tokens]
    if not kept:
        raise EmptyDocumentError("Document vide après découpage en phrases")
    return kept


def truncate_sentence(sentence, max_tokens=512):
    tokens = sentence.split()
    return sentence if len(tokens) <= max_tokens else " ".join(tokens[:max_tokens])


def batch_sentences(sentences, batch_size=50):
    return [sentences[i:i + batch_size] for i in range(0, len(sentences), batch_size)]


# ================================
# FOURNISSEURS DE PLONGEMENTS
# ================================

def fnv1a64(text):
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


@functools.lru_cache(maxsize=65536)
def _token_vector(token, m, provider_seed):
    return Rng(fnv1a64(token) ^ (provider_seed & 0xFFFFFFFFFFFFFFFF)).normal((m,))


def hash_embed(sentence, m, provider_seed=0):
    """Moyenne des vecteurs de jetons (FNV-1a -> splitmix64), ramenée à la norme 1."""
    tokens = sentence.lower().split()
    if not tokens:
        raise EmptyDocumentError("Phrase vide")
    vector = np.mean([_token_vector(t, m, provider_seed) for t in tokens], axis=0)
    norm = np.linalg.norm(vector)
    return vector / norm if norm > 0 else vector


class HashEmbedder:
    """Fournisseur déterministe de test : phrases -> matrice [n×m]."""

    def __init__(self, m, provider_seed=0, max_tokens=512):
        self.m = m
        self.provider_seed = provider_seed
        self.max_tokens = max_tokens

    @property
    def identity(self):
        return f"hash:{self.m}:{self.provider_seed}"

    def embed(self, sentences):
        rows = [hash_embed(truncate_sentence(s, self.max_tokens), self.m, self.provider_seed) for s in sentences]
        return np.stack(rows).astype(np.float32)

    def embed_document(self, document):
        return self.embed(document.sentences)


class CachedEmbedder:
    """Plongements calculés hors ligne, lus depuis un fichier ARFE."""

    def __init__(self, path, m):
        self.path = path
        self.m = m
        file_m, self.entries = read_arfe(path)
        if file_m != m:
            raise DimensionMismatchError(f"Cache {path} : dimension {file_m}, configuration {m}")

    @property
    def identity(self):
        return f"cache:{self.path}"

    def embed_document(self, document):
        return load_cached_embeddings(self.entries, document)


def load_cached_embeddings(entries, document):
    key = report_key(document.corporation, document.year)
    if key not in entries:
        raise MissingEmbeddingError(document.corporation, document.year)
    return entries[key]


def build_provider(config, provider=None):
    spec = provider or config.provider
    if spec == "hash":
        return HashEmbedder(config.embedding_dim, config.provider_seed or 0, config.max_tokens)
    if spec.startswith("cache:"):
        return CachedEmbedder(spec[len("cache:"):], config.embedding_dim)
    raise InputError(f"Fournisseur de plongements inconnu : {spec!r}")


# ================================
# FORMAT ARFE
# ================================

def write_arfe(path, m, entries):
    """Clés triées ; chaque matrice n×m en float32 little-endian."""
    chunks = [ARFE_MAGIC, struct.pack("<HII", ARFE_VERSION, m, len(entries))]
    for key in sorted(entries):
        matrix = np.asarray(entries[key], dtype="<f4")
        if matrix.ndim != 2 or matrix.shape[1] != m:
            raise DimensionMismatchError(f"Entrée {key} : forme {matrix.shape}, dimension attendue {m}")
        raw_key = key.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw_key)) + raw_key + struct.pack("<I", matrix.shape[0]))
        chunks.append(matrix.tobytes(order="C"))
    with open(path, "wb") as f:
        f.write(b"".join(chunks))
    logger.info(f"Cache ARFE écrit : {path} ({len(entries)} documents, m={m})")


def read_arfe(path):
    if not os.path.exists(path):
        raise InputError(f"Cache ARFE introuvable : {path}")
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != ARFE_MAGIC:
        raise FormatError(f"{path} : en-tête ARFE invalide")
    try:
        version, m, count = struct.unpack_from("<HII", data, 4)
        if version != ARFE_VERSION:
            raise FormatError(f"{path} : version ARFE {version} non supportée")
        offset = 14
        entries = {}
        for _ in range(count):
            (key_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            key = data[offset:offset + key_len].decode("utf-8")
            offset += key_len
            (n,) = struct.unpack_from("<I", data, offset)
            offset += 4
            size = n * m * 4
            if offset + size > len(data):
                raise FormatError(f"{path} : entrée {key} tronquée")
            entries[key] = np.frombuffer(data, dtype="<f4", count=n * m, offset=offset).reshape(n, m).astype(np.float32)
            offset += size
    except (struct.error, UnicodeDecodeError) as e:
        raise FormatError(f"{path} : fichier ARFE corrompu ({e})")
    if offset != len(data):
        raise FormatError(f"{path} : {len(data) - offset} octets en trop")
    return m, entries


# ================================
# ENCODEUR
# ================================

def sentence_context(embeddings, gru):
    """(L, m) -> (L, 2m)."""
    return gru(embeddings)


def sentence_attention(context, W, b, U):
    """u_s = tanh(W x_s + b) ; α = softmax_s(u_sᵀU) ; paragraphe = Σ_s α_s x_s."""
    context = as_tensor(context)
    u = tanh(context @ as_tensor(W).T + b)
    weights = softmax(u @ U, axis=-1)
    return weights, weights @ context


class SentenceAttention(Module):
    def __init__(self, context_dim, att_dim, rng):
        self.W = Parameter(uniform_init(rng, (att_dim, context_dim), context_dim))
        self.b = Parameter(uniform_init(rng, (att_dim,), context_dim))
        self.U = Parameter(uniform_init(rng, (att_dim,), att_dim))

    def forward(self, context):
        return sentence_attention(context, self.W, self.b, self.U)


class DocumentEncoder(Module):
    """Blocs transformer sans encodage positionnel, moyenne, projection 2m -> d_A."""

    def __init__(self, dim, config, rng):
        self.blocks = [TransformerBlock(dim, config.heads, rng, config.ff_multiplier) for _ in range(config.blocks)]
        self.projection = Linear(dim, config.output_dim, rng)

    def forward(self, paragraphs):
        x = as_tensor(paragraphs)
        for block in self.blocks:
            x = block(x)
        return self.projection(mean(x, axis=-2))


def document_encode(paragraphs, encoder):
    return encoder(paragraphs)


class ArfEncoder(Module):
    def __init__(self, config, seed):
        rng = Rng(seed)
        self.config = config
        m = config.embedding_dim
        self.context = BiGRU(m, m, rng)
        self.attention = SentenceAttention(2 * m, config.att_dim, rng)
        self.document = DocumentEncoder(2 * m, config, rng)

    def paragraphs(self, embeddings):
        embeddings = np.asarray(embeddings)
        if embeddings.ndim != 2 or len(embeddings) == 0:
            raise EmptyDocumentError("Aucun plongement de phrase à encoder")
        if embeddings.shape[1] != self.config.embedding_dim:
            raise DimensionMismatchError(
                f"Plongements de dimension {embeddings.shape[1]}, configuration {self.config.embedding_dim}")
        rows = []
        for batch in batch_sentences(embeddings, self.config.batch_size):
            _, paragraph = self.attention(sentence_context(batch.astype(default_dtype()), self.context))
            rows.append(paragraph)
        return stack(rows, axis=0)

    def forward(self, embeddings):
        return self.document(self.paragraphs(embeddings))


def extract_arf(document, provider, encoder):
    """ArfVector (d_A,) d'un rapport ; déterministe à (document, fournisseur, graine) fixés."""
    embeddings = provider.embed_document(document)
    if embeddings.shape[1] != encoder.config.embedding_dim:
        raise DimensionMismatchError(
            f"Fournisseur {provider.identity} : m={embeddings.shape[1]}, configuration {encoder.config.embedding_dim}")
    return encoder(embeddings)


def embed_store(store, config, seed, provider):
    """Calcule l'ArfVector de chaque échantillon avec un encodeur figé ; rend les plongements pour le cache ARFE."""
    encoder = ArfEncoder(config, seed).eval()
    entries = {}
    with no_grad():
        for sample in store.samples:
            if isinstance(provider, CachedEmbedder):
                document = ReportDocument(sample.corporation, sample.year, [])
            else:
                document = ReportDocument.from_file(sample.report, sample.corporation, sample.year, config.min_tokens)
            embeddings = provider.embed_document(document)
            entries[sample.key] = embeddings
            sample.arf = extract_arf_from_embeddings(embeddings, encoder)
    logger.info(f"{len(entries)} ArfVector calculés (fournisseur {provider.identity}, d_A={config.output_dim})")
    return entries


def extract_arf_from_embeddings(embeddings, encoder):
    return np.asarray(encoder(embeddings).data, dtype=np.float32)
