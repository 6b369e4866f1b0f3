import dataclasses

import numpy as np
import pytest

from arf import ArfConfig
from crp import CrpConfig, ModelSpec
from dataset import META_COLUMNS, RATIO_COLUMNS, RatingClass, Sample
from fnf import FnfConfig
from numerics import precision


@pytest.fixture
def float64():
    with precision("float64"):
        yield


def make_samples(counts, n_features=16, arf_dim=None, seed=0, spread=1.0):
    """Échantillons gaussiens par classe ; `counts[c]` échantillons pour la classe c."""
    rng = np.random.default_rng(seed)
    samples = []
    for label, count in enumerate(counts):
        center = rng.normal(size=n_features) * spread
        for j in range(count):
            samples.append(Sample(
                corporation=f"Corp {label}-{j}",
                year=2015,
                financial=(center + rng.normal(size=n_features) * 0.3).astype(np.float32),
                label=RatingClass(label),
                arf=None if arf_dim is None else rng.normal(size=arf_dim).astype(np.float32),
            ))
    return samples


def tiny_arf_config(**overrides):
    base = ArfConfig(embedding_dim=8, att_dim=4, heads=2, output_dim=16, blocks=1)
    return dataclasses.replace(base, **overrides)


def tiny_spec(kind="cnn", mode="precompute", financial_only=False, n_features=16, hidden=(16,), dropout=0.2):
    return ModelSpec(
        n_features=n_features,
        fnf=FnfConfig(kind=kind, output_dim=8, cnn_channels=[4, 8], gnn_hidden=4, rnn_hidden=8, rnn_step_dim=4),
        arf=tiny_arf_config(),
        crp=CrpConfig(hidden=list(hidden), dropout=dropout, mode=mode, financial_only=financial_only, adapter_dim=8),
        seeds={"fnf": 11, "arf": 12, "crp": 13},
    )


def write_mini_fixture(root, rows=None, reports=None):
    """CSV de 3 lignes et 2 rapports correspondants."""
    header = META_COLUMNS + RATIO_COLUMNS
    if rows is None:
        rows = [
            ["S&P", "Acme Holdings Inc.", "AA-", "2016-03-31"] + [f"{0.1 * i:.2f}" for i in range(16)],
            ["Moody's", "Beta Corp", "BBB+", "6/30/2017"] + [f"{0.2 * i:.2f}" for i in range(16)],
            ["Fitch", "Gamma Energy", "CCC", "2018-12-31"] + [f"{-0.1 * i:.2f}" for i in range(16)],
        ]
    if reports is None:
        reports = {
            "acme-holdings-inc_2016.txt": "Revenue rose sharply this year. Debt fell across all segments.\n",
            "beta-corp_2017.txt": "Margins were stable over the period. Liquidity remains adequate for now.\n",
        }
    csv_path = root / "financials.csv"
    lines = [",".join(f'"{v}"' if "," in v else v for v in header)]
    lines += [",".join(row) for row in rows]
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    reports_dir = root / "reports"
    reports_dir.mkdir(exist_ok=True)
    for name, text in reports.items():
        (reports_dir / name).write_text(text, encoding="utf-8")
    return csv_path, reports_dir


@pytest.fixture
def mini_fixture(tmp_path):
    return write_mini_fixture(tmp_path)


# ================================
# ORACLES NUMPY (float64, pas à pas)
# ================================

def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def affine(layer, x):
    out = x @ layer.weight.data.T
    return out if layer.bias is None else out + layer.bias.data


def gru_states(cell, seq):
    h = np.zeros(cell.hidden_size)
    states = []
    for x in seq:
        z = sigmoid(affine(cell.update_x, x) + affine(cell.update_h, h))
        r = sigmoid(affine(cell.reset_x, x) + affine(cell.reset_h, h))
        n = np.tanh(affine(cell.candidate_x, x) + affine(cell.candidate_h, r * h))
        h = (1.0 - z) * h + z * n
        states.append(h)
    return np.array(states)


def lstm_last_state(cell, seq):
    h = np.zeros(cell.hidden_size)
    c = np.zeros(cell.hidden_size)
    for x in seq:
        i = sigmoid(affine(cell.input_x, x) + affine(cell.input_h, h))
        f = sigmoid(affine(cell.forget_x, x) + affine(cell.forget_h, h))
        o = sigmoid(affine(cell.output_x, x) + affine(cell.output_h, h))
        g = np.tanh(affine(cell.cell_x, x) + affine(cell.cell_h, h))
        c = f * c + i * g
        h = o * np.tanh(c)
    return h


def layer_norm(norm, x):
    centered = x - x.mean(axis=-1, keepdims=True)
    variance = (centered ** 2).mean(axis=-1, keepdims=True)
    return centered / np.sqrt(variance + norm.eps) * norm.gamma.data + norm.beta.data


def transformer_block(block, x):
    """Bloc post-norm calculé tête par tête."""
    attention = block.attention
    q, k, v = affine(attention.query, x), affine(attention.key, x), affine(attention.value, x)
    d = attention.head_dim
    heads = []
    for j in range(attention.heads):
        cols = slice(j * d, (j + 1) * d)
        scores = q[:, cols] @ k[:, cols].T / np.sqrt(d)
        weights = np.exp(scores - scores.max(axis=-1, keepdims=True))
        weights /= weights.sum(axis=-1, keepdims=True)
        heads.append(weights @ v[:, cols])
    x = layer_norm(block.norm1, x + affine(attention.out, np.concatenate(heads, axis=-1)))
    hidden = np.maximum(affine(block.ff_in, x), 0.0)
    return layer_norm(block.norm2, x + affine(block.ff_out, hidden))


def zero_parameters(module):
    for p in module.parameters():
        p.data[...] = 0
