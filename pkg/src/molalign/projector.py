"""Memory-bank feature projector shared by both modalities.

A single set of learnable memory vectors acts as cross-attention queries over
an encoder output of any length, producing a fixed row count of shared
feature vectors; mean pooling plus a linear layer yields the final retrieval
embedding.  The same parameter object serves text and molecule inputs, which
is what makes it a bridge between the modalities.

An alternative projector with the memory bank removed (mean pooling straight
into one modality-shared linear layer) exists for ablation runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mathops import row_softmax, row_softmax_backward

__all__ = [
    "MemoryBank",
    "SharedLinearProjector",
    "ModalityEmbedding",
    "init_memory_bank",
    "init_shared_linear",
    "attention",
    "project",
    "finalize",
    "embed_sequence",
    "embed_with_cache",
    "embed_backward",
]

MEMORY_INIT_STD = 0.02


@dataclass(frozen=True)
class ModalityEmbedding:
    """Final fixed-size embedding of one instance in one modality."""

    x: np.ndarray
    modality: str

    def __post_init__(self):
        if self.modality not in ("text", "molecule"):
            raise ValueError(f"unknown modality {self.modality!r}")
        if not np.isfinite(self.x).all():
            raise FloatingPointError("non-finite embedding")


@dataclass
class MemoryBank:
    """Learnable queries plus key/value projections and the output linear layer."""

    queries: np.ndarray    # (n, d)
    key_w: np.ndarray      # (d, d)
    value_w: np.ndarray    # (d, d)
    fc_w: np.ndarray       # (d, out_dim)
    fc_b: np.ndarray
    scaled: bool = True    # divide attention scores by sqrt(d)

    @property
    def n_memory(self) -> int:
        return self.queries.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "projector/queries": self.queries,
            "projector/key_w": self.key_w,
            "projector/value_w": self.value_w,
            "projector/fc_w": self.fc_w,
            "projector/fc_b": self.fc_b,
        }


@dataclass
class SharedLinearProjector:
    """Memory-bank-free variant: mean pooling into one shared linear layer."""

    fc_w: np.ndarray       # (d, out_dim)
    fc_b: np.ndarray

    def arrays(self) -> dict[str, np.ndarray]:
        return {"projector/fc_w": self.fc_w, "projector/fc_b": self.fc_b}


def init_memory_bank(
    n_memory: int,
    model_dim: int,
    rng: np.random.Generator,
    *,
    out_dim: int | None = None,
    scaled: bool = True,
) -> MemoryBank:
    out_dim = out_dim if out_dim is not None else model_dim
    std = np.sqrt(2.0 / (model_dim + model_dim))
    return MemoryBank(
        queries=MEMORY_INIT_STD * rng.standard_normal((n_memory, model_dim)),
        key_w=std * rng.standard_normal((model_dim, model_dim)),
        value_w=std * rng.standard_normal((model_dim, model_dim)),
        fc_w=np.sqrt(2.0 / (model_dim + out_dim)) * rng.standard_normal((model_dim, out_dim)),
        fc_b=np.zeros(out_dim),
        scaled=scaled,
    )


def init_shared_linear(
    model_dim: int, rng: np.random.Generator, *, out_dim: int | None = None
) -> SharedLinearProjector:
    out_dim = out_dim if out_dim is not None else model_dim
    return SharedLinearProjector(
        fc_w=np.sqrt(2.0 / (model_dim + out_dim)) * rng.standard_normal((model_dim, out_dim)),
        fc_b=np.zeros(out_dim),
    )


def attention(
    queries: np.ndarray, keys: np.ndarray, values: np.ndarray, *, scaled: bool = True
) -> np.ndarray:
    """Cross-attention: each query row attends over key/value rows.

    Row ``i`` of the result is ``softmax(q_i . K^T / sqrt(d)) @ V`` (the
    ``sqrt(d)`` scaling can be disabled).
    """
    if queries.shape[1] != keys.shape[1] or keys.shape[0] != values.shape[0]:
        raise ValueError("attention dimensions disagree")
    scale = 1.0 / np.sqrt(queries.shape[1]) if scaled else 1.0
    weights = row_softmax(queries @ keys.T * scale)
    return weights @ values


def project(h: np.ndarray, bank: MemoryBank) -> np.ndarray:
    """Attend the memory queries over an encoder output; returns n x d features."""
    out, _ = _project_with_cache(h, bank)
    return out


def _project_with_cache(h: np.ndarray, bank: MemoryBank):
    if h.shape[1] != bank.queries.shape[1]:
        raise ValueError(
            f"input dim {h.shape[1]} does not match memory dim {bank.queries.shape[1]}"
        )
    keys = h @ bank.key_w
    values = h @ bank.value_w
    scale = 1.0 / np.sqrt(bank.queries.shape[1]) if bank.scaled else 1.0
    weights = row_softmax(bank.queries @ keys.T * scale)
    out = weights @ values
    return out, (h, keys, values, weights, scale, bank)


def _project_backward(cache, dout: np.ndarray):
    h, keys, values, weights, scale, bank = cache
    dweights = dout @ values.T
    dvalues = weights.T @ dout
    dscores = row_softmax_backward(weights, dweights) * scale
    dqueries = dscores @ keys
    dkeys = dscores.T @ bank.queries
    dh = dkeys @ bank.key_w.T + dvalues @ bank.value_w.T
    grads = {
        "projector/queries": dqueries,
        "projector/key_w": h.T @ dkeys,
        "projector/value_w": h.T @ dvalues,
    }
    return dh, grads


def finalize(o: np.ndarray, bank: MemoryBank | SharedLinearProjector, modality: str) -> ModalityEmbedding:
    """Mean-pool the shared features and apply the output linear layer."""
    pooled = np.asarray(o).mean(axis=0)
    return ModalityEmbedding(x=pooled @ bank.fc_w + bank.fc_b, modality=modality)


def embed_sequence(
    h: np.ndarray, projector: MemoryBank | SharedLinearProjector, modality: str
) -> ModalityEmbedding:
    """Full projector path from an encoder output to the retrieval embedding."""
    x, _ = embed_with_cache(h, projector)
    return ModalityEmbedding(x=x, modality=modality)


def embed_with_cache(h: np.ndarray, projector: MemoryBank | SharedLinearProjector):
    if isinstance(projector, MemoryBank):
        shared, proj_cache = _project_with_cache(h, projector)
    else:
        shared, proj_cache = h, None
    pooled = shared.mean(axis=0)
    x = pooled @ projector.fc_w + projector.fc_b
    return x, (proj_cache, shared, pooled, projector)


def embed_backward(cache, dx: np.ndarray):
    """Backward through finalize and (when present) the memory-bank attention.

    Returns the gradient w.r.t. the encoder output and a dict of projector
    parameter gradients.
    """
    proj_cache, shared, pooled, projector = cache
    grads = {
        "projector/fc_w": np.outer(pooled, dx),
        "projector/fc_b": dx.copy(),
    }
    dpooled = projector.fc_w @ dx
    dshared = np.tile(dpooled / shared.shape[0], (shared.shape[0], 1))
    if proj_cache is None:
        return dshared, grads
    dh, proj_grads = _project_backward(proj_cache, dshared)
    grads.update(proj_grads)
    return dh, grads
