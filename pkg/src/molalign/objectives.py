"""Training losses: triplet contrastive, adversarial, and the two
similarity-distribution alignment losses, with analytical gradients.

First-order terms operate on individual embeddings: a bidirectional Euclidean
triplet hinge, and an adversarial critic scoring the global text/molecule
representations (gradient-penalty objective by default, a literal log-loss
mode behind a flag).  Second-order terms operate on the batch's four
similarity distributions: row softmaxes over pairwise cosine similarities,
aligned with KL divergence (uni-modal to uni-modal bidirectionally, uni-modal
as soft labels for cross-modal).

Every loss ships with a hand-derived gradient used by the trainer; the
finite-difference suite in :mod:`molalign.gradcheck` validates them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mathops import row_softmax, row_softmax_backward

__all__ = [
    "LossBundle",
    "DiscriminatorParams",
    "init_discriminator",
    "euclidean_distance",
    "cosine_similarity",
    "triplet_loss",
    "triplet_loss_and_grads",
    "discriminator_score",
    "discriminator_scores",
    "discriminator_input_grad",
    "adversarial_losses",
    "critic_loss_and_grads",
    "generator_loss_and_grad",
    "log_adversarial_losses",
    "log_critic_loss_and_grads",
    "log_generator_loss_and_grad",
    "similarity_distribution",
    "kl_divergence",
    "loss_u2u",
    "loss_u2c",
    "u2u_loss_and_grads",
    "u2c_loss_and_grads",
    "total_loss",
]

KL_FLOOR = 1e-12          # numeric guard inside logs, never active for softmax rows
ROW_SUM_TOL = 1e-6


# ---------------------------------------------------------------------------
# elementary similarities


def euclidean_distance(u: np.ndarray, v: np.ndarray) -> float:
    """L2 distance between two equal-length vectors."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError("euclidean_distance needs equal dimensions")
    return float(np.linalg.norm(u - v))


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between two nonzero vectors, in [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine_similarity is undefined for zero-norm vectors")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


# ---------------------------------------------------------------------------
# triplet contrastive loss


def _rows(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    return arr[None, :] if arr.ndim == 1 else arr


def triplet_loss(
    anchor_text, pos_mol, neg_mol, anchor_mol, pos_text, neg_text, alpha: float
) -> float:
    """Bidirectional margin hinge on Euclidean distances, averaged over rows.

    Per instance the loss is ``max(d(a_t, p_m) - d(a_t, n_m) + alpha, 0) +
    max(d(a_m, p_t) - d(a_m, n_t) + alpha, 0)``; inputs may be single vectors
    or row-aligned batches.
    """
    loss, *_ = triplet_loss_and_grads(
        anchor_text, pos_mol, neg_mol, anchor_mol, pos_text, neg_text, alpha
    )
    return loss


def _hinge_direction(anchor, pos, neg, alpha):
    diff_ap = anchor - pos
    diff_an = anchor - neg
    d_ap = np.linalg.norm(diff_ap, axis=1)
    d_an = np.linalg.norm(diff_an, axis=1)
    hinge = np.maximum(d_ap - d_an + alpha, 0.0)
    active = hinge > 0.0
    # unit vectors; zero where the distance (or the hinge) vanishes
    u_ap = np.where((d_ap > 0)[:, None], diff_ap / np.maximum(d_ap, 1e-300)[:, None], 0.0)
    u_an = np.where((d_an > 0)[:, None], diff_an / np.maximum(d_an, 1e-300)[:, None], 0.0)
    mask = active[:, None]
    danchor = mask * (u_ap - u_an)
    dpos = mask * (-u_ap)
    dneg = mask * u_an
    return hinge, danchor, dpos, dneg


def triplet_loss_and_grads(
    anchor_text, pos_mol, neg_mol, anchor_mol, pos_text, neg_text, alpha: float
):
    """Triplet loss plus gradients w.r.t. each of the six embedding blocks."""
    a_t, p_m, n_m = _rows(anchor_text), _rows(pos_mol), _rows(neg_mol)
    a_m, p_t, n_t = _rows(anchor_mol), _rows(pos_text), _rows(neg_text)
    if not (a_t.shape == p_m.shape == n_m.shape == a_m.shape == p_t.shape == n_t.shape):
        raise ValueError("triplet embeddings must share one shape")
    batch = a_t.shape[0]

    h_t, da_t, dp_m, dn_m = _hinge_direction(a_t, p_m, n_m, alpha)
    h_m, da_m, dp_t, dn_t = _hinge_direction(a_m, p_t, n_t, alpha)
    loss = float((h_t + h_m).mean())
    scale = 1.0 / batch
    return (
        loss,
        da_t * scale,
        dp_m * scale,
        dn_m * scale,
        da_m * scale,
        dp_t * scale,
        dn_t * scale,
    )


# ---------------------------------------------------------------------------
# adversarial critic

# The critic is a feed-forward scorer with tanh hidden layers and an affine
# output.  tanh is chosen over relu so the gradient-penalty term, which needs
# second derivatives of the critic, is smooth everywhere.


@dataclass
class DiscriminatorParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> dict[str, np.ndarray]:
        named = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            named[f"disc/w{i}"] = w
            named[f"disc/b{i}"] = b
        return named


def init_discriminator(
    input_dim: int, rng: np.random.Generator, *, hidden: Sequence[int] = (16,)
) -> DiscriminatorParams:
    dims = [input_dim, *hidden, 1]
    weights, biases = [], []
    for i in range(len(dims) - 1):
        std = np.sqrt(2.0 / (dims[i] + dims[i + 1]))
        weights.append(std * rng.standard_normal((dims[i], dims[i + 1])))
        biases.append(np.zeros(dims[i + 1]))
    return DiscriminatorParams(weights=weights, biases=biases)


def _disc_forward(g: np.ndarray, disc: DiscriminatorParams):
    acts = [np.asarray(g, dtype=np.float64)]
    last = len(disc.weights) - 1
    for l, (w, b) in enumerate(zip(disc.weights, disc.biases)):
        z = acts[-1] @ w + b
        acts.append(np.tanh(z) if l < last else z)
    return acts[-1][:, 0], acts


def discriminator_scores(g: np.ndarray, disc: DiscriminatorParams) -> np.ndarray:
    """Critic scores for a batch of global representations (unbounded reals)."""
    scores, _ = _disc_forward(np.atleast_2d(g), disc)
    return scores


def discriminator_score(g: np.ndarray, disc: DiscriminatorParams) -> float:
    """Critic score of a single global representation."""
    return float(discriminator_scores(np.atleast_2d(g), disc)[0])


def _disc_param_grads(acts, dscores: np.ndarray, disc: DiscriminatorParams):
    """Reverse pass accumulating parameter grads; returns (grads, input grad)."""
    grads = {name: np.zeros_like(arr) for name, arr in disc.arrays().items()}
    dz = dscores[:, None]
    for l in reversed(range(len(disc.weights))):
        grads[f"disc/w{l}"] += acts[l].T @ dz
        grads[f"disc/b{l}"] += dz.sum(axis=0)
        da = dz @ disc.weights[l].T
        if l > 0:
            dz = da * (1.0 - acts[l] ** 2)
    return grads, da


def discriminator_input_grad(g: np.ndarray, disc: DiscriminatorParams) -> np.ndarray:
    """Per-row gradient of the critic score w.r.t. its input."""
    g = np.atleast_2d(np.asarray(g, dtype=np.float64))
    _, acts = _disc_forward(g, disc)
    _, dinput = _disc_param_grads(acts, np.ones(g.shape[0]), disc)
    return dinput


def _gp_param_grads(interp: np.ndarray, tangent: np.ndarray, disc: DiscriminatorParams):
    """Gradient w.r.t. critic parameters of ``sum_i tangent_i . grad_g D(interp_i)``.

    Forward-over-reverse with the tangent held constant: a dual forward pass
    propagates (value, directional derivative) pairs through the network, and
    one reverse pass differentiates the summed output directional derivative
    w.r.t. the parameters.  This is the second-order term the gradient
    penalty needs, valid for any depth because the hidden activation (tanh)
    is smooth.
    """
    last = len(disc.weights) - 1
    acts, tans, zdots = [interp], [tangent], [None]
    for l, (w, b) in enumerate(zip(disc.weights, disc.biases)):
        z = acts[-1] @ w + b
        zdot = tans[-1] @ w
        zdots.append(zdot)
        if l < last:
            a = np.tanh(z)
            acts.append(a)
            tans.append((1.0 - a * a) * zdot)
        else:
            acts.append(z)
            tans.append(zdot)

    grads = {name: np.zeros_like(arr) for name, arr in disc.arrays().items()}
    # adjoints of the post-activation pair (acts[l+1], tans[l+1])
    da = np.zeros_like(acts[-1])
    dadot = np.ones_like(tans[-1])
    for l in reversed(range(len(disc.weights))):
        if l == last:
            dz, dzdot = da, dadot
        else:
            a = acts[l + 1]
            sech2 = 1.0 - a * a
            # a = tanh(z), adot = sech2 * zdot: the tangent adjoint feeds both
            # the zdot path and, through d(sech2)/dz, the primal path
            dz = da * sech2 + dadot * (-2.0 * a * sech2 * zdots[l + 1])
            dzdot = dadot * sech2
        grads[f"disc/w{l}"] += acts[l].T @ dz + tans[l].T @ dzdot
        grads[f"disc/b{l}"] += dz.sum(axis=0)
        da = dz @ disc.weights[l].T
        dadot = dzdot @ disc.weights[l].T
    return grads


def _gradient_penalty_terms(interp: np.ndarray, disc: DiscriminatorParams):
    input_grad = discriminator_input_grad(interp, disc)
    norms = np.linalg.norm(input_grad, axis=1)
    penalties = (norms - 1.0) ** 2
    return input_grad, norms, penalties


def adversarial_losses(
    g_text: np.ndarray,
    g_mol: np.ndarray,
    disc: DiscriminatorParams,
    lambda_gp: float,
    rng: np.random.Generator,
):
    """Gradient-penalty critic and generator losses.

    ``critic_loss = mean D(g_m) - mean D(g_t) + lambda_gp * mean (|grad D| - 1)^2``
    on per-pair uniform interpolates; ``generator_loss = -mean D(g_m)``.  The
    interpolation draws come from the caller-supplied ``rng`` so parallel
    evaluation stays reproducible.
    """
    g_text = np.atleast_2d(np.asarray(g_text, dtype=np.float64))
    g_mol = np.atleast_2d(np.asarray(g_mol, dtype=np.float64))
    eps = rng.uniform(size=(g_text.shape[0], 1))
    critic_loss, _ = critic_loss_and_grads(g_text, g_mol, disc, lambda_gp, eps)
    generator_loss = -float(discriminator_scores(g_mol, disc).mean())
    return critic_loss, generator_loss


def critic_loss_and_grads(
    g_text: np.ndarray,
    g_mol: np.ndarray,
    disc: DiscriminatorParams,
    lambda_gp: float,
    eps: np.ndarray,
):
    """Critic loss and its parameter gradients for fixed interpolation draws."""
    g_text = np.atleast_2d(np.asarray(g_text, dtype=np.float64))
    g_mol = np.atleast_2d(np.asarray(g_mol, dtype=np.float64))
    batch = g_text.shape[0]
    eps = np.asarray(eps, dtype=np.float64).reshape(batch, 1)

    scores_m, acts_m = _disc_forward(g_mol, disc)
    scores_t, acts_t = _disc_forward(g_text, disc)
    grads_m, _ = _disc_param_grads(acts_m, np.full(batch, 1.0 / batch), disc)
    grads_t, _ = _disc_param_grads(acts_t, np.full(batch, -1.0 / batch), disc)

    interp = eps * g_text + (1.0 - eps) * g_mol
    input_grad, norms, penalties = _gradient_penalty_terms(interp, disc)
    # d penalty / d grad-field, with the measure-zero norm-0 subgradient set to 0
    safe = np.where(norms > 0.0, norms, 1.0)
    coeff = np.where(norms > 0.0, 2.0 * (norms - 1.0) / safe, 0.0)
    tangent = coeff[:, None] * input_grad * (lambda_gp / batch)
    grads_gp = _gp_param_grads(interp, tangent, disc)

    grads = {
        name: grads_m[name] + grads_t[name] + grads_gp[name] for name in grads_m
    }
    critic_loss = float(
        scores_m.mean() - scores_t.mean() + lambda_gp * penalties.mean()
    )
    return critic_loss, grads


def generator_loss_and_grad(g_mol: np.ndarray, disc: DiscriminatorParams):
    """Generator-side adversarial loss ``-mean D(g_m)`` and its input gradient."""
    g_mol = np.atleast_2d(np.asarray(g_mol, dtype=np.float64))
    scores = discriminator_scores(g_mol, disc)
    dg_mol = -discriminator_input_grad(g_mol, disc) / g_mol.shape[0]
    return -float(scores.mean()), dg_mol


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -x)


def log_adversarial_losses(g_text, g_mol, disc: DiscriminatorParams):
    """Literal log-loss mode: the critic output is read through a sigmoid.

    ``critic_loss = -(mean log s(D(g_t)) + mean log(1 - s(D(g_m))))`` and the
    generator minimizes ``mean log(1 - s(D(g_m)))``.
    """
    critic_loss, _ = log_critic_loss_and_grads(g_text, g_mol, disc)
    generator_loss, _ = log_generator_loss_and_grad(g_mol, disc)
    return critic_loss, generator_loss


def log_critic_loss_and_grads(g_text, g_mol, disc: DiscriminatorParams):
    g_text = np.atleast_2d(np.asarray(g_text, dtype=np.float64))
    g_mol = np.atleast_2d(np.asarray(g_mol, dtype=np.float64))
    batch = g_text.shape[0]
    scores_t, acts_t = _disc_forward(g_text, disc)
    scores_m, acts_m = _disc_forward(g_mol, disc)
    loss = -float(_log_sigmoid(scores_t).mean() + _log_sigmoid(-scores_m).mean())
    # d/dx[-log s(x)] = s(x) - 1 ; d/dx[-log(1 - s(x))] = s(x)
    sig_t = 1.0 / (1.0 + np.exp(-scores_t))
    sig_m = 1.0 / (1.0 + np.exp(-scores_m))
    grads_t, _ = _disc_param_grads(acts_t, (sig_t - 1.0) / batch, disc)
    grads_m, _ = _disc_param_grads(acts_m, sig_m / batch, disc)
    grads = {name: grads_t[name] + grads_m[name] for name in grads_t}
    return loss, grads


def log_generator_loss_and_grad(g_mol, disc: DiscriminatorParams):
    g_mol = np.atleast_2d(np.asarray(g_mol, dtype=np.float64))
    batch = g_mol.shape[0]
    scores_m, _ = _disc_forward(g_mol, disc)
    loss = float(_log_sigmoid(-scores_m).mean())
    sig_m = 1.0 / (1.0 + np.exp(-scores_m))
    dscores = -sig_m / batch
    dg = dscores[:, None] * discriminator_input_grad(g_mol, disc)
    return loss, dg


# ---------------------------------------------------------------------------
# similarity distributions and their KL alignment losses


def _cosine_matrix_with_cache(x: np.ndarray, y: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx = np.linalg.norm(x, axis=1)
    ny = np.linalg.norm(y, axis=1)
    if (nx == 0).any() or (ny == 0).any():
        raise ValueError("zero-norm embedding row in similarity computation")
    xn = x / nx[:, None]
    yn = y / ny[:, None]
    sims = xn @ yn.T
    return sims, (xn, yn, nx, ny)


def _cosine_matrix_backward(cache, dsims: np.ndarray):
    xn, yn, nx, ny = cache
    dxn = dsims @ yn
    dyn = dsims.T @ xn
    dx = (dxn - (dxn * xn).sum(axis=1, keepdims=True) * xn) / nx[:, None]
    dy = (dyn - (dyn * yn).sum(axis=1, keepdims=True) * yn) / ny[:, None]
    return dx, dy


def similarity_distribution(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-stochastic matrix of softmaxed pairwise cosine similarities.

    Row ``i`` is the softmax over ``j`` of ``cos(x_i, y_j)``, the diagonal
    included.  Requires at least two rows and no zero-norm rows.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[0] < 2 or y.shape[0] < 2:
        raise ValueError("similarity distributions need a batch of >= 2 instances")
    sims, _ = _cosine_matrix_with_cache(x, y)
    return row_softmax(sims)


def _validate_distribution(p: np.ndarray, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if (p <= 0).any():
        raise ValueError(f"{name} must be strictly positive")
    sums = p.sum(axis=-1)
    if not np.allclose(sums, 1.0, atol=ROW_SUM_TOL):
        raise ValueError(f"{name} rows must sum to 1 (got {sums})")
    return p


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q) in nats for strictly positive normalized vectors."""
    p = _validate_distribution(np.atleast_1d(p), "p")
    q = _validate_distribution(np.atleast_1d(q), "q")
    if p.shape != q.shape:
        raise ValueError("kl_divergence needs equal shapes")
    return float(np.sum(p * (np.log(np.maximum(p, KL_FLOOR)) - np.log(np.maximum(q, KL_FLOOR)))))


def _kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    logs = np.log(np.maximum(p, KL_FLOOR)) - np.log(np.maximum(q, KL_FLOOR))
    return (p * logs).sum(axis=1)


def loss_u2u(p_tt: np.ndarray, p_mm: np.ndarray) -> float:
    """Symmetric KL between the two uni-modal similarity distributions."""
    p_tt = _validate_distribution(p_tt, "p_tt")
    p_mm = _validate_distribution(p_mm, "p_mm")
    if p_tt.shape != p_mm.shape:
        raise ValueError("distribution shapes disagree")
    return float((_kl_rows(p_tt, p_mm) + _kl_rows(p_mm, p_tt)).mean())


def loss_u2c(p_tt, p_mm, p_tm, p_mt) -> float:
    """KL from the uni-modal references to the cross-modal distributions."""
    p_tt = _validate_distribution(p_tt, "p_tt")
    p_mm = _validate_distribution(p_mm, "p_mm")
    p_tm = _validate_distribution(p_tm, "p_tm")
    p_mt = _validate_distribution(p_mt, "p_mt")
    if not (p_tt.shape == p_mm.shape == p_tm.shape == p_mt.shape):
        raise ValueError("distribution shapes disagree")
    return float((_kl_rows(p_tt, p_mt) + _kl_rows(p_mm, p_tm)).mean())


def _dkl_dp(p: np.ndarray, q: np.ndarray, scale: float) -> np.ndarray:
    return scale * (np.log(np.maximum(p, KL_FLOOR)) - np.log(np.maximum(q, KL_FLOOR)) + 1.0)


def _dkl_dq(p: np.ndarray, q: np.ndarray, scale: float) -> np.ndarray:
    return scale * (-p / np.maximum(q, KL_FLOOR))


def _distribution_with_cache(x, y):
    sims, cos_cache = _cosine_matrix_with_cache(x, y)
    probs = row_softmax(sims)
    return probs, (cos_cache, probs)


def _distribution_backward(cache, dprobs):
    cos_cache, probs = cache
    dsims = row_softmax_backward(probs, dprobs)
    return _cosine_matrix_backward(cos_cache, dsims)


def u2u_loss_and_grads(
    x_text: np.ndarray,
    x_mol: np.ndarray,
    *,
    include_t2m: bool = True,
    include_m2t: bool = True,
):
    """Uni-to-uni alignment loss and gradients w.r.t. both embedding batches.

    ``include_t2m`` keeps the KL(text-text || mol-mol) direction and
    ``include_m2t`` the reverse; both on reproduces the bidirectional loss.
    """
    x_text = np.asarray(x_text, dtype=np.float64)
    x_mol = np.asarray(x_mol, dtype=np.float64)
    batch = x_text.shape[0]
    p_tt, cache_tt = _distribution_with_cache(x_text, x_text)
    p_mm, cache_mm = _distribution_with_cache(x_mol, x_mol)

    value = 0.0
    dp_tt = np.zeros_like(p_tt)
    dp_mm = np.zeros_like(p_mm)
    scale = 1.0 / batch
    if include_t2m:
        value += float(_kl_rows(p_tt, p_mm).mean())
        dp_tt += _dkl_dp(p_tt, p_mm, scale)
        dp_mm += _dkl_dq(p_tt, p_mm, scale)
    if include_m2t:
        value += float(_kl_rows(p_mm, p_tt).mean())
        dp_mm += _dkl_dp(p_mm, p_tt, scale)
        dp_tt += _dkl_dq(p_mm, p_tt, scale)

    dx_a, dx_b = _distribution_backward(cache_tt, dp_tt)
    dx_text = dx_a + dx_b
    dm_a, dm_b = _distribution_backward(cache_mm, dp_mm)
    dx_mol = dm_a + dm_b
    return value, dx_text, dx_mol


def u2c_loss_and_grads(
    x_text: np.ndarray,
    x_mol: np.ndarray,
    *,
    include_2t: bool = True,
    include_2m: bool = True,
):
    """Uni-to-cross alignment loss and gradients w.r.t. both embedding batches.

    ``include_2t`` keeps KL(text-text || mol-text) and ``include_2m`` keeps
    KL(mol-mol || text-mol); the uni-modal distribution is always the
    reference (first) argument.
    """
    x_text = np.asarray(x_text, dtype=np.float64)
    x_mol = np.asarray(x_mol, dtype=np.float64)
    batch = x_text.shape[0]
    scale = 1.0 / batch

    value = 0.0
    dx_text = np.zeros_like(x_text)
    dx_mol = np.zeros_like(x_mol)

    if include_2t:
        p_tt, cache_tt = _distribution_with_cache(x_text, x_text)
        p_mt, cache_mt = _distribution_with_cache(x_mol, x_text)
        value += float(_kl_rows(p_tt, p_mt).mean())
        da, db = _distribution_backward(cache_tt, _dkl_dp(p_tt, p_mt, scale))
        dx_text += da + db
        dm, dt = _distribution_backward(cache_mt, _dkl_dq(p_tt, p_mt, scale))
        dx_mol += dm
        dx_text += dt
    if include_2m:
        p_mm, cache_mm = _distribution_with_cache(x_mol, x_mol)
        p_tm, cache_tm = _distribution_with_cache(x_text, x_mol)
        value += float(_kl_rows(p_mm, p_tm).mean())
        da, db = _distribution_backward(cache_mm, _dkl_dp(p_mm, p_tm, scale))
        dx_mol += da + db
        dt, dm = _distribution_backward(cache_tm, _dkl_dq(p_mm, p_tm, scale))
        dx_text += dt
        dx_mol += dm
    return value, dx_text, dx_mol


# ---------------------------------------------------------------------------
# combined objective


@dataclass(frozen=True)
class LossBundle:
    """The four loss components and their weighted total for one step."""

    l_cl: float
    l_adv: float
    l_u2u: float
    l_u2c: float
    lambda_1: float
    w_u2u: float
    w_u2c: float
    total: float

    def as_record(self, step: int) -> dict:
        return {
            "step": step,
            "l_cl": self.l_cl,
            "l_adv": self.l_adv,
            "l_u2u": self.l_u2u,
            "l_u2c": self.l_u2c,
            "total": self.total,
        }


def total_loss(
    l_cl: float,
    l_adv: float,
    l_u2u: float,
    l_u2c: float,
    lambda_1: float,
    *,
    w_u2u: float = 1.0,
    w_u2c: float = 1.0,
) -> LossBundle:
    """Combine the components; the alignment-loss weights default to 1."""
    components = (l_cl, l_adv, l_u2u, l_u2c)
    if not np.isfinite(components).all():
        names = ("l_cl", "l_adv", "l_u2u", "l_u2c")
        bad = [n for n, c in zip(names, components) if not np.isfinite(c)]
        raise FloatingPointError(f"non-finite loss component(s): {', '.join(bad)}")
    total = float(l_cl + lambda_1 * l_adv + w_u2u * l_u2u + w_u2c * l_u2c)
    return LossBundle(
        l_cl=float(l_cl),
        l_adv=float(l_adv),
        l_u2u=float(l_u2u),
        l_u2c=float(l_u2c),
        lambda_1=float(lambda_1),
        w_u2u=float(w_u2u),
        w_u2c=float(w_u2c),
        total=total,
    )
