"""Per-token and per-atom contextual encoders.

The text encoder is a deliberately small order-sensitive mixer: token
embeddings plus position embeddings, one block of single-head self-attention
and a feed-forward layer (both with residual connections), then a linear map
into the shared model dimension.  A pretrained-transformer adapter slot exists
but ships unimplemented.

The molecule encoder is a graph convolutional stack over the atom feature
matrix: each layer computes ``act(A_hat @ X @ W)`` where ``A_hat`` is the
adjacency with self-loops under symmetric (default) or row normalization,
followed by a linear output map into the shared model dimension.

Every forward has an explicit ``*_with_cache`` / ``*_backward`` pair; training
composes these by hand, and the finite-difference suite checks them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .datamodel import MoleculeGraph, TokenSequence
from .mathops import row_softmax, row_softmax_backward

__all__ = [
    "TextEncoderParams",
    "MolEncoderParams",
    "init_text_encoder",
    "init_mol_encoder",
    "encode_text",
    "encode_text_with_cache",
    "encode_text_backward",
    "normalized_adjacency",
    "encode_molecule",
    "encode_molecule_with_cache",
    "encode_molecule_backward",
    "mean_pool",
    "mean_pool_backward",
    "load_pretrained_text_encoder",
]


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return std * rng.standard_normal((fan_in, fan_out))


@dataclass
class TextEncoderParams:
    """Embedding table, mixer block weights, and the output map to model dim."""

    embed: np.ndarray      # (vocab, text_dim)
    pos: np.ndarray        # (max_len, text_dim)
    attn_q: np.ndarray     # (text_dim, text_dim)
    attn_k: np.ndarray
    attn_v: np.ndarray
    ffn_w1: np.ndarray     # (text_dim, ffn_dim)
    ffn_b1: np.ndarray
    ffn_w2: np.ndarray     # (ffn_dim, text_dim)
    ffn_b2: np.ndarray
    out_w: np.ndarray      # (text_dim, model_dim)
    out_b: np.ndarray

    @property
    def vocab_size(self) -> int:
        return self.embed.shape[0]

    @property
    def max_len(self) -> int:
        return self.pos.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "text/embed": self.embed,
            "text/pos": self.pos,
            "text/attn_q": self.attn_q,
            "text/attn_k": self.attn_k,
            "text/attn_v": self.attn_v,
            "text/ffn_w1": self.ffn_w1,
            "text/ffn_b1": self.ffn_b1,
            "text/ffn_w2": self.ffn_w2,
            "text/ffn_b2": self.ffn_b2,
            "text/out_w": self.out_w,
            "text/out_b": self.out_b,
        }


def init_text_encoder(
    vocab_size: int,
    text_dim: int,
    model_dim: int,
    rng: np.random.Generator,
    *,
    ffn_dim: int | None = None,
    max_len: int = 64,
) -> TextEncoderParams:
    ffn_dim = ffn_dim if ffn_dim is not None else 2 * text_dim
    return TextEncoderParams(
        embed=0.1 * rng.standard_normal((vocab_size, text_dim)),
        pos=0.02 * rng.standard_normal((max_len, text_dim)),
        attn_q=_glorot(rng, text_dim, text_dim),
        attn_k=_glorot(rng, text_dim, text_dim),
        attn_v=_glorot(rng, text_dim, text_dim),
        ffn_w1=_glorot(rng, text_dim, ffn_dim),
        ffn_b1=np.zeros(ffn_dim),
        ffn_w2=_glorot(rng, ffn_dim, text_dim),
        ffn_b2=np.zeros(text_dim),
        out_w=_glorot(rng, text_dim, model_dim),
        out_b=np.zeros(model_dim),
    )


def encode_text_with_cache(seq: TokenSequence, params: TextEncoderParams):
    tokens = seq.tokens
    if tokens.max() >= params.vocab_size:
        raise ValueError(
            f"token id {int(tokens.max())} out of range for vocab {params.vocab_size}"
        )
    if len(tokens) > params.max_len:
        raise ValueError(f"sequence length {len(tokens)} exceeds max_len {params.max_len}")

    length = len(tokens)
    emb = params.embed[tokens] + params.pos[:length]
    q = emb @ params.attn_q
    k = emb @ params.attn_k
    v = emb @ params.attn_v
    scale = 1.0 / np.sqrt(emb.shape[1])
    attn = row_softmax(q @ k.T * scale)
    mixed = emb + attn @ v
    pre = mixed @ params.ffn_w1 + params.ffn_b1
    hidden = np.maximum(pre, 0.0)
    ffn_out = hidden @ params.ffn_w2 + params.ffn_b2
    res = mixed + ffn_out
    out = res @ params.out_w + params.out_b
    cache = (tokens, emb, q, k, v, attn, mixed, pre, hidden, res, scale, params)
    return out, cache


def encode_text(seq: TokenSequence, params: TextEncoderParams) -> np.ndarray:
    """Encode a token sequence into an L x model_dim representation matrix."""
    out, _ = encode_text_with_cache(seq, params)
    return out


def encode_text_backward(cache, dout: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every text encoder parameter."""
    tokens, emb, q, k, v, attn, mixed, pre, hidden, res, scale, params = cache
    grads = {name: np.zeros_like(arr) for name, arr in params.arrays().items()}

    grads["text/out_w"] += res.T @ dout
    grads["text/out_b"] += dout.sum(axis=0)
    dres = dout @ params.out_w.T

    dffn_out = dres
    dmixed = dres.copy()
    grads["text/ffn_w2"] += hidden.T @ dffn_out
    grads["text/ffn_b2"] += dffn_out.sum(axis=0)
    dhidden = dffn_out @ params.ffn_w2.T
    dpre = dhidden * (pre > 0)
    grads["text/ffn_w1"] += mixed.T @ dpre
    grads["text/ffn_b1"] += dpre.sum(axis=0)
    dmixed += dpre @ params.ffn_w1.T

    dattn_out = dmixed
    demb = dmixed.copy()
    dattn = dattn_out @ v.T
    dv = attn.T @ dattn_out
    dscores = row_softmax_backward(attn, dattn) * scale
    dq = dscores @ k
    dk = dscores.T @ q
    grads["text/attn_q"] += emb.T @ dq
    grads["text/attn_k"] += emb.T @ dk
    grads["text/attn_v"] += emb.T @ dv
    demb += dq @ params.attn_q.T + dk @ params.attn_k.T + dv @ params.attn_v.T

    np.add.at(grads["text/embed"], tokens, demb)
    grads["text/pos"][: len(tokens)] += demb
    return grads


_ACTIVATIONS = {
    "relu": (lambda x: np.maximum(x, 0.0), lambda x, y: (x > 0).astype(float)),
    "tanh": (np.tanh, lambda x, y: 1.0 - y * y),
    "identity": (lambda x: x, lambda x, y: np.ones_like(x)),
}


@dataclass
class MolEncoderParams:
    """Stacked graph-convolution weights plus the output map to model dim."""

    gcn_weights: list[np.ndarray]
    out_w: np.ndarray
    out_b: np.ndarray
    activation: str = "relu"
    adjacency_norm: str = "sym"   # "sym" or "row"

    def arrays(self) -> dict[str, np.ndarray]:
        named = {f"mol/gcn_w{i}": w for i, w in enumerate(self.gcn_weights)}
        named["mol/out_w"] = self.out_w
        named["mol/out_b"] = self.out_b
        return named


def init_mol_encoder(
    atom_dim: int,
    model_dim: int,
    rng: np.random.Generator,
    *,
    hidden_dims: Sequence[int] | None = None,
    activation: str = "relu",
    adjacency_norm: str = "sym",
) -> MolEncoderParams:
    dims = [atom_dim] + list(hidden_dims if hidden_dims is not None else [model_dim, model_dim])
    weights = [_glorot(rng, dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
    return MolEncoderParams(
        gcn_weights=weights,
        out_w=_glorot(rng, dims[-1], model_dim),
        out_b=np.zeros(model_dim),
        activation=activation,
        adjacency_norm=adjacency_norm,
    )


def normalized_adjacency(edges: np.ndarray, num_atoms: int, kind: str = "sym") -> np.ndarray:
    """Dense adjacency with self-loops, symmetrically or row normalized."""
    adj = np.eye(num_atoms)
    for i, j in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
        adj[i, j] = 1.0
        adj[j, i] = 1.0
    degree = adj.sum(axis=1)
    if kind == "sym":
        inv_sqrt = 1.0 / np.sqrt(degree)
        return adj * inv_sqrt[:, None] * inv_sqrt[None, :]
    if kind == "row":
        return adj / degree[:, None]
    raise ValueError(f"unknown adjacency normalization {kind!r}")


def encode_molecule_with_cache(graph: MoleculeGraph, params: MolEncoderParams):
    act, _ = _ACTIVATIONS[params.activation]
    a_hat = normalized_adjacency(graph.edges, graph.num_atoms, params.adjacency_norm)
    x = graph.atom_features
    layer_inputs, pres, outs = [], [], []
    for w in params.gcn_weights:
        layer_inputs.append(x)
        pre = a_hat @ x @ w
        pres.append(pre)
        x = act(pre)
        outs.append(x)
    h = x @ params.out_w + params.out_b
    cache = (a_hat, layer_inputs, pres, outs, params)
    return h, cache


def encode_molecule(graph: MoleculeGraph, params: MolEncoderParams) -> np.ndarray:
    """Encode a molecule graph into a K x model_dim representation matrix."""
    h, _ = encode_molecule_with_cache(graph, params)
    return h


def encode_molecule_backward(cache, dout: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every molecule encoder parameter."""
    a_hat, layer_inputs, pres, outs, params = cache
    _, act_grad = _ACTIVATIONS[params.activation]
    grads = {name: np.zeros_like(arr) for name, arr in params.arrays().items()}

    grads["mol/out_w"] += outs[-1].T @ dout
    grads["mol/out_b"] += dout.sum(axis=0)
    dx = dout @ params.out_w.T

    for i in reversed(range(len(params.gcn_weights))):
        dpre = dx * act_grad(pres[i], outs[i])
        grads[f"mol/gcn_w{i}"] += (a_hat @ layer_inputs[i]).T @ dpre
        dx = a_hat.T @ dpre @ params.gcn_weights[i].T
    return grads


def mean_pool(h: np.ndarray) -> np.ndarray:
    """Column-wise mean of a representation matrix (the global vector)."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] < 1:
        raise ValueError("mean_pool expects a non-empty P x d matrix")
    return h.mean(axis=0)


def mean_pool_backward(dpooled: np.ndarray, num_rows: int) -> np.ndarray:
    return np.tile(dpooled / num_rows, (num_rows, 1))


def load_pretrained_text_encoder(path: str):
    """Adapter slot for pretrained transformer weights; not bundled here."""
    raise NotImplementedError(
        "pretrained text encoder adapters are not shipped; use init_text_encoder"
    )
