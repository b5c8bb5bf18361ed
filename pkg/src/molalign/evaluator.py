"""Bidirectional retrieval metrics, embedding-space diagnostics, and the
ablation grid runner.

Retrieval scores queries against the whole supplied corpus by cosine
similarity (Euclidean available behind a flag), with deterministic tie
breaking by corpus index.  Diagnostics cover the per-instance modality gap
(1 minus the cosine of a paired couple) and the cross-instance similarity
consistency between the two modalities.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace as dc_replace
from typing import Sequence

import numpy as np

from .datamodel import InstancePair
from .encoders import encode_molecule, encode_text
from .objectives import cosine_similarity
from .projector import embed_with_cache

__all__ = [
    "DirectionMetrics",
    "RetrievalReport",
    "GapReport",
    "embed_corpus",
    "rank",
    "metrics",
    "evaluate_retrieval",
    "modality_gap",
    "pairwise_consistency",
    "run_ablation",
    "ablation_to_csv",
    "ABLATION_GRID",
]


@dataclass(frozen=True)
class DirectionMetrics:
    """Retrieval quality for one query direction over a corpus of size n."""

    hits_at_1: float
    hits_at_10: float
    mrr: float
    mean_rank: float
    n: int

    def as_dict(self) -> dict:
        return {
            "hits_at_1": self.hits_at_1,
            "hits_at_10": self.hits_at_10,
            "mrr": self.mrr,
            "mean_rank": self.mean_rank,
            "n": self.n,
        }


@dataclass(frozen=True)
class RetrievalReport:
    text_to_molecule: DirectionMetrics
    molecule_to_text: DirectionMetrics
    n: int

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "text_to_molecule": self.text_to_molecule.as_dict(),
            "molecule_to_text": self.molecule_to_text.as_dict(),
        }


@dataclass(frozen=True)
class GapReport:
    """Per-instance modality gaps with summary statistics and optional KDE."""

    gaps: np.ndarray
    mean: float
    median: float
    kde_x: np.ndarray | None = None
    kde_y: np.ndarray | None = None

    def as_dict(self) -> dict:
        out = {"gaps": self.gaps.tolist(), "mean": self.mean, "median": self.median}
        if self.kde_x is not None:
            out["kde_x"] = self.kde_x.tolist()
            out["kde_y"] = self.kde_y.tolist()
        return out


def embed_corpus(model, pairs: Sequence[InstancePair]) -> tuple[np.ndarray, np.ndarray]:
    """Embed every pair with a model snapshot; row i matches instance i.

    ``model`` is anything exposing ``text``, ``mol`` and ``projector``
    parameter attributes (a TrainState qualifies).  Encoder errors propagate
    annotated with the instance id.
    """
    x_text, x_mol = [], []
    for pair in pairs:
        try:
            ht = encode_text(pair.text, model.text)
            hm = encode_molecule(pair.molecule, model.mol)
            xt, _ = embed_with_cache(ht, model.projector)
            xm, _ = embed_with_cache(hm, model.projector)
        except Exception as exc:
            raise type(exc)(f"instance {pair.id!r}: {exc}") from exc
        x_text.append(xt)
        x_mol.append(xm)
    return np.stack(x_text), np.stack(x_mol)


def rank(query: np.ndarray, corpus: np.ndarray, *, metric: str = "cosine") -> np.ndarray:
    """1-based rank of every corpus item for one query.

    Items are ordered by descending cosine similarity (or ascending Euclidean
    distance with ``metric="euclidean"``); ties break by ascending corpus
    index so ranking is deterministic.
    """
    query = np.asarray(query, dtype=np.float64)
    corpus = np.atleast_2d(np.asarray(corpus, dtype=np.float64))
    if corpus.shape[0] == 0:
        raise ValueError("corpus is empty")
    if metric == "cosine":
        qn = np.linalg.norm(query)
        cn = np.linalg.norm(corpus, axis=1)
        if qn == 0 or (cn == 0).any():
            raise ValueError("zero-norm embedding in ranking")
        scores = corpus @ query / (cn * qn)
    elif metric == "euclidean":
        scores = -np.linalg.norm(corpus - query[None, :], axis=1)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    order = np.lexsort((np.arange(len(scores)), -scores))
    ranks = np.empty(len(scores), dtype=np.int64)
    ranks[order] = np.arange(1, len(scores) + 1)
    return ranks


def metrics(gold_ranks: Sequence[int], n: int, ks: Sequence[int] = (1, 10)) -> DirectionMetrics:
    """Hits@k, MRR and Mean Rank from the gold items' 1-based ranks."""
    ranks = np.asarray(gold_ranks, dtype=np.float64)
    if ranks.size == 0:
        raise ValueError("no ranks given")
    if (ranks < 1).any() or (ranks > n).any():
        raise ValueError(f"ranks must lie in [1, {n}]")
    hits = {k: float((ranks <= k).mean()) for k in ks}
    return DirectionMetrics(
        hits_at_1=hits.get(1, float((ranks <= 1).mean())),
        hits_at_10=hits.get(10, float((ranks <= 10).mean())),
        mrr=float((1.0 / ranks).mean()),
        mean_rank=float(ranks.mean()),
        n=int(n),
    )


def evaluate_retrieval(
    x_text: np.ndarray, x_mol: np.ndarray, *, metric: str = "cosine"
) -> RetrievalReport:
    """Rank every query against the full aligned corpus, both directions."""
    x_text = np.atleast_2d(x_text)
    x_mol = np.atleast_2d(x_mol)
    if x_text.shape != x_mol.shape:
        raise ValueError("embedding arrays must be aligned")
    n = x_text.shape[0]
    gold_t2m = [rank(x_text[i], x_mol, metric=metric)[i] for i in range(n)]
    gold_m2t = [rank(x_mol[i], x_text, metric=metric)[i] for i in range(n)]
    return RetrievalReport(
        text_to_molecule=metrics(gold_t2m, n),
        molecule_to_text=metrics(gold_m2t, n),
        n=n,
    )


def modality_gap(
    x_text: np.ndarray,
    x_mol: np.ndarray,
    *,
    include_kde: bool = False,
    kde_points: int = 200,
) -> GapReport:
    """Per-instance gap ``1 - cos(x_text_i, x_mol_i)``, each in [0, 2].

    The optional KDE curve (Gaussian kernel, Silverman bandwidth, sampled at
    evenly spaced points over [0, 2]) is a plotting convenience.
    """
    x_text = np.atleast_2d(x_text)
    x_mol = np.atleast_2d(x_mol)
    if x_text.shape != x_mol.shape:
        raise ValueError("embedding arrays must be aligned")
    gaps = np.array(
        [1.0 - cosine_similarity(x_text[i], x_mol[i]) for i in range(x_text.shape[0])]
    )
    kde_x = kde_y = None
    if include_kde and gaps.size >= 2 and np.ptp(gaps) > 0:
        from scipy.stats import gaussian_kde

        kde = gaussian_kde(gaps, bw_method="silverman")
        kde_x = np.linspace(0.0, 2.0, kde_points)
        kde_y = kde(kde_x)
    return GapReport(
        gaps=gaps,
        mean=float(gaps.mean()),
        median=float(np.median(gaps)),
        kde_x=kde_x,
        kde_y=kde_y,
    )


def pairwise_consistency(
    x_text: np.ndarray,
    x_mol: np.ndarray,
    n_samples: int | None = None,
    seed: int = 0,
) -> float:
    """Mean |cos(text_i, text_j) - cos(mol_i, mol_j)| over instance pairs.

    With ``n_samples=None`` every unordered pair is used; otherwise pairs are
    sampled uniformly with replacement from the i != j set.
    """
    x_text = np.atleast_2d(x_text)
    x_mol = np.atleast_2d(x_mol)
    n = x_text.shape[0]
    if n < 2:
        raise ValueError("need at least 2 instances")
    if n_samples is None:
        idx_i, idx_j = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(seed)
        idx_i = rng.integers(0, n, size=n_samples)
        offset = rng.integers(1, n, size=n_samples)
        idx_j = (idx_i + offset) % n
    diffs = [
        abs(
            cosine_similarity(x_text[i], x_text[j])
            - cosine_similarity(x_mol[i], x_mol[j])
        )
        for i, j in zip(idx_i, idx_j)
    ]
    return float(np.mean(diffs))


# The six ablation rows: which alignment-loss components stay on and whether
# the memory bank is replaced by the shared linear projector.
ABLATION_GRID = (
    {"row": 1, "use_t2m": True, "use_m2t": True, "use_2m": True, "use_2t": True, "use_memory_bank": True},
    {"row": 2, "use_t2m": False, "use_m2t": True, "use_2m": True, "use_2t": True, "use_memory_bank": True},
    {"row": 3, "use_t2m": False, "use_m2t": False, "use_2m": True, "use_2t": True, "use_memory_bank": True},
    {"row": 4, "use_t2m": False, "use_m2t": False, "use_2m": False, "use_2t": True, "use_memory_bank": True},
    {"row": 5, "use_t2m": False, "use_m2t": False, "use_2m": False, "use_2t": False, "use_memory_bank": True},
    {"row": 6, "use_t2m": False, "use_m2t": False, "use_2m": False, "use_2t": False, "use_memory_bank": False},
)


def run_ablation(
    train_pairs: Sequence[InstancePair],
    eval_pairs: Sequence[InstancePair],
    base_config,
) -> list[dict]:
    """Train and evaluate the six-row component grid.

    Row 1 is the full objective; rows 2-5 strip the alignment-loss components
    one by one; row 6 additionally swaps the memory bank for the shared
    linear projector.  Errors propagate annotated with the row number.
    """
    from .trainer import train

    rows = []
    for spec_row in ABLATION_GRID:
        toggles = {k: v for k, v in spec_row.items() if k != "row"}
        cfg = dc_replace(base_config, **toggles)
        try:
            state, _ = train(train_pairs, cfg)
            x_text, x_mol = embed_corpus(state, eval_pairs)
            report = evaluate_retrieval(x_text, x_mol)
        except Exception as exc:
            raise type(exc)(f"ablation row {spec_row['row']}: {exc}") from exc
        rows.append(
            {
                **spec_row,
                "t2m_mean_rank": report.text_to_molecule.mean_rank,
                "t2m_mrr": report.text_to_molecule.mrr,
                "t2m_hits_at_1": report.text_to_molecule.hits_at_1,
                "t2m_hits_at_10": report.text_to_molecule.hits_at_10,
                "m2t_mean_rank": report.molecule_to_text.mean_rank,
                "m2t_mrr": report.molecule_to_text.mrr,
                "m2t_hits_at_1": report.molecule_to_text.hits_at_1,
                "m2t_hits_at_10": report.molecule_to_text.hits_at_10,
            }
        )
    return rows


_CSV_COLUMNS = (
    ("row", "#"),
    ("use_t2m", "L_t2m"),
    ("use_m2t", "L_m2t"),
    ("use_2m", "L_2m"),
    ("use_2t", "L_2t"),
    ("use_memory_bank", "MB"),
    ("t2m_mean_rank", "T2M Mean Rank"),
    ("t2m_mrr", "T2M MRR"),
    ("t2m_hits_at_1", "T2M Hits@1"),
    ("t2m_hits_at_10", "T2M Hits@10"),
    ("m2t_mean_rank", "M2T Mean Rank"),
    ("m2t_mrr", "M2T MRR"),
    ("m2t_hits_at_1", "M2T Hits@1"),
    ("m2t_hits_at_10", "M2T Hits@10"),
)


def ablation_to_csv(rows: list[dict]) -> str:
    """Render ablation rows as CSV with the component grid columns."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow([header for _, header in _CSV_COLUMNS])
    for row in rows:
        writer.writerow([row[key] for key, _ in _CSV_COLUMNS])
    return buf.getvalue()
