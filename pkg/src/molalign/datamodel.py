"""Dataset ingestion, featurization, batching and synthetic paired data.

A dataset is a list of :class:`InstancePair` objects, each coupling a tokenized
text description with a molecule graph describing the same instance.  Datasets
are stored as JSONL, one object per line with keys:

* ``id``            -- unique string identifier
* ``text_tokens``   -- int array, or ``text`` (string, whitespace tokenized
  through an optional vocabulary with a deterministic hashed fallback)
* ``atom_features`` -- array of float arrays, or ``atoms`` (substructure id
  strings resolved through an :class:`AtomFeatureTable`)
* ``edges``         -- array of ``[i, j]`` undirected atom index pairs

Atom feature tables are JSONL files of ``{"key": ..., "vector": [...]}``
records.  Lookups never fail: unknown substructure ids map to a deterministic
hash-seeded unit-norm vector so small-scale runs need no pretrained
embeddings.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "DatasetError",
    "TokenSequence",
    "MoleculeGraph",
    "InstancePair",
    "Triplet",
    "AtomFeatureTable",
    "TEXT_ANCHOR",
    "MOLECULE_ANCHOR",
    "TEXT_QUANT_BINS",
    "NEIGHBOR_MIX",
    "hashed_fallback_vector",
    "load_atom_table",
    "tokenize_text",
    "load_dataset",
    "save_dataset",
    "featurize_molecule",
    "make_batches",
    "sample_triplets",
    "generate_synthetic",
    "ring_chain_edges",
    "decode_text_latent",
    "decode_molecule_latent",
    "split_dataset",
    "derive_seed",
]


class DatasetError(ValueError):
    """Raised for malformed dataset files or invalid dataset structures."""


TEXT_ANCHOR = "text-anchor"
MOLECULE_ANCHOR = "molecule-anchor"

# Synthetic rendering constants (documented so decoding oracles can be
# written without touching generator internals).
TEXT_QUANT_BINS = 32       # quantization bins per latent coordinate
TEXT_QUANT_RANGE = 3.0     # latent coordinates binned over [-3, 3]
NEIGHBOR_MIX = 0.5         # attenuation of neighbor coordinates in atom features


@dataclass(frozen=True)
class TokenSequence:
    """Integer token ids for one text description."""

    tokens: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.tokens, dtype=np.int64)
        if arr.ndim != 1 or arr.size < 1:
            raise DatasetError("token sequence must be a non-empty 1-d array")
        if (arr < 0).any():
            raise DatasetError("token ids must be non-negative")
        object.__setattr__(self, "tokens", arr)

    @property
    def length(self) -> int:
        return int(self.tokens.shape[0])


@dataclass(frozen=True)
class MoleculeGraph:
    """Atom feature matrix plus an undirected edge list.

    Self-loops are not stored; the molecule encoder adds them when it builds
    its normalized adjacency.  The graph may be disconnected.
    """

    atom_features: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.atom_features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise DatasetError("atom_features must be a K x d_atom matrix with K >= 1")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        k = feats.shape[0]
        if edges.size and ((edges < 0).any() or (edges >= k).any()):
            raise DatasetError(f"edge indices must lie in [0, {k})")
        if edges.size and (edges[:, 0] == edges[:, 1]).any():
            raise DatasetError("explicit self-loops are not allowed")
        object.__setattr__(self, "atom_features", feats)
        object.__setattr__(self, "edges", edges)

    @property
    def num_atoms(self) -> int:
        return int(self.atom_features.shape[0])


@dataclass(frozen=True)
class InstancePair:
    """One text description and the molecule it describes."""

    id: str
    text: TokenSequence
    molecule: MoleculeGraph


@dataclass(frozen=True)
class Triplet:
    """Batch-local anchor/positive/negative indices for one contrastive term."""

    anchor_index: int
    positive_index: int
    negative_index: int
    direction: str

    def __post_init__(self):
        if self.direction not in (TEXT_ANCHOR, MOLECULE_ANCHOR):
            raise ValueError(f"unknown triplet direction {self.direction!r}")
        if self.negative_index == self.anchor_index:
            raise ValueError("negative must differ from the anchor")


def hashed_fallback_vector(key: str, dim: int) -> np.ndarray:
    """Deterministic unit-norm vector for a substructure id absent from the table.

    The vector is drawn from a PCG64 stream seeded with SHA-256 of the key, so
    the same key maps to the same vector in every process.
    """
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    v = np.random.default_rng(seed).standard_normal(dim)
    return v / np.linalg.norm(v)


@dataclass
class AtomFeatureTable:
    """Substructure id -> feature vector mapping with a total hashed fallback."""

    vectors: dict[str, np.ndarray]
    dim: int

    def __post_init__(self):
        for key, vec in self.vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dim,):
                raise DatasetError(
                    f"table entry {key!r} has dim {arr.shape}, expected ({self.dim},)"
                )
            self.vectors[key] = arr

    def lookup(self, key: str) -> np.ndarray:
        known = self.vectors.get(key)
        if known is not None:
            return known
        return hashed_fallback_vector(key, self.dim)


def load_atom_table(path: str | Path) -> AtomFeatureTable:
    """Load a JSONL atom feature table of ``{"key", "vector"}`` records."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                key, vec = obj["key"], np.asarray(obj["vector"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DatasetError(f"atom table line {lineno}: {exc}") from exc
            if dim is None:
                dim = int(vec.shape[0])
            vectors[str(key)] = vec
    if dim is None:
        raise DatasetError("atom table is empty")
    return AtomFeatureTable(vectors=vectors, dim=dim)


def _stable_token_id(word: str, vocab_size: int) -> int:
    digest = hashlib.sha256(word.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % vocab_size


def tokenize_text(
    text: str, vocab: dict[str, int] | None = None, vocab_size: int = 512
) -> np.ndarray:
    """Whitespace tokenizer with vocabulary lookup and hashed fallback ids."""
    words = text.split()
    if not words:
        raise DatasetError("text has no tokens")
    ids = []
    for word in words:
        if vocab is not None and word in vocab:
            ids.append(vocab[word])
        else:
            ids.append(_stable_token_id(word, vocab_size))
    return np.asarray(ids, dtype=np.int64)


def featurize_molecule(
    atoms: Sequence[str], edges, table: AtomFeatureTable
) -> MoleculeGraph:
    """Resolve substructure ids to feature rows; unknown ids use the hashed fallback."""
    if len(atoms) == 0:
        raise DatasetError("a molecule needs at least one atom")
    feats = np.stack([table.lookup(str(a)) for a in atoms])
    return MoleculeGraph(atom_features=feats, edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2))


def _pair_from_record(
    obj: dict,
    lineno: int,
    atom_table: AtomFeatureTable | None,
    vocab: dict[str, int] | None,
    fallback_vocab_size: int,
) -> InstancePair:
    if "id" not in obj:
        raise DatasetError(f"line {lineno}: missing 'id'")
    if "edges" not in obj:
        raise DatasetError(f"line {lineno}: missing 'edges'")

    if "text_tokens" in obj:
        tokens = np.asarray(obj["text_tokens"], dtype=np.int64)
    elif "text" in obj:
        tokens = tokenize_text(obj["text"], vocab=vocab, vocab_size=fallback_vocab_size)
    else:
        raise DatasetError(f"line {lineno}: needs 'text_tokens' or 'text'")

    if "atom_features" in obj:
        feats = np.asarray(obj["atom_features"], dtype=np.float64)
        molecule = MoleculeGraph(atom_features=feats, edges=obj["edges"])
    elif "atoms" in obj:
        if atom_table is None:
            raise DatasetError(f"line {lineno}: 'atoms' given but no atom table loaded")
        molecule = featurize_molecule(obj["atoms"], obj["edges"], atom_table)
    else:
        raise DatasetError(f"line {lineno}: needs 'atom_features' or 'atoms'")

    return InstancePair(id=str(obj["id"]), text=TokenSequence(tokens), molecule=molecule)


def load_dataset(
    path: str | Path,
    *,
    atom_table: AtomFeatureTable | None = None,
    vocab: dict[str, int] | None = None,
    fallback_vocab_size: int = 512,
) -> list[InstancePair]:
    """Read a JSONL dataset, preserving line order.

    Raises :class:`DatasetError` naming the offending line for malformed
    records, and for duplicate ids.
    """
    pairs: list[InstancePair] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            pair = _pair_from_record(obj, lineno, atom_table, vocab, fallback_vocab_size)
            if pair.id in seen:
                raise DatasetError(f"line {lineno}: duplicate id {pair.id!r}")
            seen.add(pair.id)
            pairs.append(pair)
    return pairs


def save_dataset(pairs: Sequence[InstancePair], path: str | Path) -> None:
    """Write pairs as JSONL with explicit token and feature arrays.

    ``load_dataset(save_dataset(pairs))`` round-trips field-exactly: floats are
    emitted with repr precision, which is lossless for float64.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            record = {
                "id": pair.id,
                "text_tokens": pair.text.tokens.tolist(),
                "atom_features": pair.molecule.atom_features.tolist(),
                "edges": pair.molecule.edges.tolist(),
            }
            fh.write(json.dumps(record) + "\n")


def derive_seed(*parts: int) -> int:
    """Collapse a tuple of integers into one reproducible 32-bit seed."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def make_batches(
    dataset: Sequence[InstancePair], batch_size: int, seed: int
) -> list[list[InstancePair]]:
    """Shuffle deterministically and cut into full batches.

    Short final batches are dropped rather than padded: the similarity
    distribution losses are defined over a full batch and padding would
    distort their denominators.
    """
    if batch_size < 2:
        raise ValueError("batch_size must be >= 2 (batch losses need >= 2 instances)")
    order = np.random.default_rng(seed).permutation(len(dataset))
    batches = []
    for start in range(0, len(dataset) - batch_size + 1, batch_size):
        idx = order[start : start + batch_size]
        batches.append([dataset[i] for i in idx])
    return batches


def sample_triplets(batch, seed: int) -> list[Triplet]:
    """One triplet per instance per direction with uniform in-batch negatives.

    ``batch`` is the batch itself or its size; emitted indices are batch-local.
    The sampling scheme is fixed so it can be reproduced externally: a PCG64
    stream seeded with ``seed`` first draws the text-anchor negatives for
    anchors 0..B-1, then the molecule-anchor negatives.  Each draw is
    ``rng.integers(0, B - 1)`` shifted up by one when it lands on or above the
    anchor, which makes the negative uniform over the other B - 1 instances.
    """
    batch_size = batch if isinstance(batch, int) else len(batch)
    if batch_size < 2:
        raise ValueError("need at least 2 instances to sample negatives")
    rng = np.random.default_rng(seed)
    triplets = []
    for direction in (TEXT_ANCHOR, MOLECULE_ANCHOR):
        for anchor in range(batch_size):
            neg = int(rng.integers(0, batch_size - 1))
            if neg >= anchor:
                neg += 1
            triplets.append(
                Triplet(
                    anchor_index=anchor,
                    positive_index=anchor,
                    negative_index=neg,
                    direction=direction,
                )
            )
    return triplets


def ring_chain_edges(num_atoms: int) -> np.ndarray:
    """Ring-plus-chain topology: a ring on the first nodes, a chain hung off node 0."""
    if num_atoms < 2:
        raise ValueError("need at least 2 atoms")
    if num_atoms == 2:
        return np.array([[0, 1]], dtype=np.int64)
    if num_atoms == 3:
        return np.array([[0, 1], [1, 2], [2, 0]], dtype=np.int64)
    ring = max(3, (2 * num_atoms) // 3)
    edges = [[i, (i + 1) % ring] for i in range(ring)]
    if ring < num_atoms:
        edges.append([0, ring])
        edges.extend([i, i + 1] for i in range(ring, num_atoms - 1))
    return np.asarray(edges, dtype=np.int64)


def _quantize_latent(z: np.ndarray) -> np.ndarray:
    scaled = (z + TEXT_QUANT_RANGE) / (2 * TEXT_QUANT_RANGE) * TEXT_QUANT_BINS
    return np.clip(np.floor(scaled), 0, TEXT_QUANT_BINS - 1).astype(np.int64)


def decode_text_latent(tokens: np.ndarray, latent_dim: int) -> np.ndarray:
    """Invert the synthetic text rendering back to bin-center coordinates."""
    tokens = np.asarray(tokens)
    bins = tokens - np.arange(latent_dim) * TEXT_QUANT_BINS
    width = 2 * TEXT_QUANT_RANGE / TEXT_QUANT_BINS
    return -TEXT_QUANT_RANGE + (bins + 0.5) * width


def decode_molecule_latent(graph: MoleculeGraph, latent_dim: int) -> np.ndarray:
    """Invert the synthetic molecule rendering: atom j holds coordinate j on axis j."""
    return np.diag(graph.atom_features[:latent_dim, :latent_dim]).copy()


def generate_synthetic(
    n_pairs: int,
    latent_dim: int,
    noise: float,
    seed: int,
    *,
    return_latents: bool = False,
):
    """Paired synthetic data sharing one latent vector per instance.

    Each pair renders a latent ``z`` twice with independent noise draws:

    * text: ``latent_dim`` tokens, one per coordinate; token ``k`` encodes
      coordinate ``k`` quantized into ``TEXT_QUANT_BINS`` bins over
      ``[-TEXT_QUANT_RANGE, TEXT_QUANT_RANGE]`` (id ``k * bins + bin``).
    * molecule: a ring-plus-chain graph on ``latent_dim`` atoms where atom
      ``j`` carries its own coordinate on feature axis ``j`` plus attenuated
      copies of its graph neighbors' coordinates, so message passing sees
      redundant neighborhood structure.

    With ``return_latents=True`` also returns the ``n_pairs x latent_dim``
    latent matrix for diagnostics.
    """
    if n_pairs < 2:
        raise ValueError("n_pairs must be >= 2")
    if latent_dim < 2:
        raise ValueError("latent_dim must be >= 2")
    if noise < 0:
        raise ValueError("noise must be >= 0")

    rng = np.random.default_rng(seed)
    latents = rng.standard_normal((n_pairs, latent_dim))
    edges = ring_chain_edges(latent_dim)
    neighbors: list[list[int]] = [[] for _ in range(latent_dim)]
    for i, j in edges:
        neighbors[i].append(int(j))
        neighbors[j].append(int(i))

    pairs = []
    for idx in range(n_pairs):
        z = latents[idx]
        z_text = z + noise * rng.standard_normal(latent_dim)
        tokens = np.arange(latent_dim) * TEXT_QUANT_BINS + _quantize_latent(z_text)

        feats = np.zeros((latent_dim, latent_dim))
        feats[np.arange(latent_dim), np.arange(latent_dim)] = z
        for j in range(latent_dim):
            nbrs = neighbors[j]
            feats[j, nbrs] += NEIGHBOR_MIX * z[nbrs] / len(nbrs)
        feats += noise * rng.standard_normal((latent_dim, latent_dim))

        pairs.append(
            InstancePair(
                id=f"synth-{idx:05d}",
                text=TokenSequence(tokens),
                molecule=MoleculeGraph(atom_features=feats, edges=edges),
            )
        )
    if return_latents:
        return pairs, latents
    return pairs


def split_dataset(
    pairs: Sequence[InstancePair], n_val: int, n_test: int, seed: int
) -> tuple[list[InstancePair], list[InstancePair], list[InstancePair]]:
    """Deterministic shuffle-then-cut into (train, val, test)."""
    if n_val + n_test > len(pairs):
        raise ValueError("n_val + n_test exceeds dataset size")
    order = np.random.default_rng(seed).permutation(len(pairs))
    val = [pairs[i] for i in order[:n_val]]
    test = [pairs[i] for i in order[n_val : n_val + n_test]]
    train = [pairs[i] for i in order[n_val + n_test :]]
    return train, val, test
