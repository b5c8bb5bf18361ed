"""Central finite-difference verification of every analytical gradient.

Each check evaluates a scalar objective twice per parameter entry and
compares the resulting derivative estimate with the hand-derived gradient,
reporting a norm-based relative error.  All checks run at float64 on tiny
instances and the full suite stays well under a minute of CPU.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import objectives as obj
from .datamodel import MoleculeGraph, TokenSequence, ring_chain_edges
from .encoders import (
    encode_molecule_backward,
    encode_molecule_with_cache,
    encode_text_backward,
    encode_text_with_cache,
    init_mol_encoder,
    init_text_encoder,
)
from .projector import embed_backward, embed_with_cache, init_memory_bank

__all__ = [
    "central_difference",
    "relative_error",
    "check_param_grads",
    "run_gradient_suite",
    "GRAD_TOLERANCE",
]

GRAD_TOLERANCE = 1e-4


def central_difference(f: Callable[[], float], arr: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Finite-difference gradient of ``f()`` w.r.t. ``arr``, mutated in place."""
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = arr[idx]
        arr[idx] = old + h
        f_plus = f()
        arr[idx] = old - h
        f_minus = f()
        arr[idx] = old
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-based relative disagreement between two gradient arrays."""
    diff = np.linalg.norm(np.asarray(analytic) - np.asarray(numeric))
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(diff / scale)


def check_param_grads(
    f: Callable[[], float],
    arrays: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    h: float = 1e-6,
) -> float:
    """Worst relative error of the analytic gradients across named arrays."""
    worst = 0.0
    for name, arr in arrays.items():
        numeric = central_difference(f, arr, h)
        worst = max(worst, relative_error(analytic[name], numeric))
    return worst


# ---------------------------------------------------------------------------
# the named checks


def _check_triplet(rng: np.random.Generator) -> float:
    batch, dim = 3, 6
    blocks = [rng.standard_normal((batch, dim)) for _ in range(6)]
    alpha = 0.3
    _, *grads = obj.triplet_loss_and_grads(*blocks, alpha)
    worst = 0.0
    for block, grad in zip(blocks, grads):
        numeric = central_difference(
            lambda: obj.triplet_loss_and_grads(*blocks, alpha)[0], block
        )
        worst = max(worst, relative_error(grad, numeric))
    return worst


def _check_u2u(rng: np.random.Generator) -> float:
    x_t = rng.standard_normal((4, 6))
    x_m = rng.standard_normal((4, 6))
    _, dt, dm = obj.u2u_loss_and_grads(x_t, x_m)
    worst = relative_error(dt, central_difference(lambda: obj.u2u_loss_and_grads(x_t, x_m)[0], x_t))
    worst = max(
        worst,
        relative_error(dm, central_difference(lambda: obj.u2u_loss_and_grads(x_t, x_m)[0], x_m)),
    )
    return worst


def _check_u2c(rng: np.random.Generator) -> float:
    x_t = rng.standard_normal((4, 6))
    x_m = rng.standard_normal((4, 6))
    _, dt, dm = obj.u2c_loss_and_grads(x_t, x_m)
    worst = relative_error(dt, central_difference(lambda: obj.u2c_loss_and_grads(x_t, x_m)[0], x_t))
    worst = max(
        worst,
        relative_error(dm, central_difference(lambda: obj.u2c_loss_and_grads(x_t, x_m)[0], x_m)),
    )
    return worst


def _check_gradient_penalty(rng: np.random.Generator) -> float:
    batch, dim = 3, 5
    disc = obj.init_discriminator(dim, rng, hidden=(7,))
    g_t = rng.standard_normal((batch, dim))
    g_m = rng.standard_normal((batch, dim))
    eps = rng.uniform(size=(batch, 1))
    lambda_gp = 10.0
    _, grads = obj.critic_loss_and_grads(g_t, g_m, disc, lambda_gp, eps)
    return check_param_grads(
        lambda: obj.critic_loss_and_grads(g_t, g_m, disc, lambda_gp, eps)[0],
        disc.arrays(),
        grads,
    )


def _check_projector(rng: np.random.Generator) -> float:
    n_memory, model_dim, length = 3, 5, 4
    bank = init_memory_bank(n_memory, model_dim, rng)
    h = rng.standard_normal((length, model_dim))
    probe = rng.standard_normal(model_dim)

    def loss() -> float:
        x, _ = embed_with_cache(h, bank)
        return float(probe @ x)

    x, cache = embed_with_cache(h, bank)
    dh, grads = embed_backward(cache, probe)
    worst = check_param_grads(loss, bank.arrays(), grads)
    worst = max(worst, relative_error(dh, central_difference(loss, h)))
    return worst


def _check_text_encoder(rng: np.random.Generator) -> float:
    params = init_text_encoder(vocab_size=9, text_dim=4, model_dim=3, rng=rng, max_len=6)
    seq = TokenSequence(np.array([1, 4, 7]))
    probe = rng.standard_normal((3, 3))

    def loss() -> float:
        out, _ = encode_text_with_cache(seq, params)
        return float((probe * out).sum())

    _, cache = encode_text_with_cache(seq, params)
    grads = encode_text_backward(cache, probe)
    return check_param_grads(loss, params.arrays(), grads)


def _check_mol_encoder(rng: np.random.Generator) -> float:
    params = init_mol_encoder(atom_dim=4, model_dim=3, rng=rng, hidden_dims=(5, 3))
    graph = MoleculeGraph(
        atom_features=rng.standard_normal((5, 4)), edges=ring_chain_edges(5)
    )
    probe = rng.standard_normal((5, 3))

    def loss() -> float:
        out, _ = encode_molecule_with_cache(graph, params)
        return float((probe * out).sum())

    _, cache = encode_molecule_with_cache(graph, params)
    grads = encode_molecule_backward(cache, probe)
    return check_param_grads(loss, params.arrays(), grads)


_CHECKS = {
    "triplet_loss": _check_triplet,
    "loss_u2u": _check_u2u,
    "loss_u2c": _check_u2c,
    "wgan_gp_critic": _check_gradient_penalty,
    "projector_embed": _check_projector,
    "text_encoder": _check_text_encoder,
    "molecule_encoder": _check_mol_encoder,
}


def run_gradient_suite(seed: int = 0, tolerance: float = GRAD_TOLERANCE) -> dict[str, dict]:
    """Run every named gradient check; returns per-check error and pass flag."""
    results = {}
    for name, fn in _CHECKS.items():
        rel = fn(np.random.default_rng(seed))
        results[name] = {"rel_err": rel, "ok": bool(rel <= tolerance), "tolerance": tolerance}
    return results
