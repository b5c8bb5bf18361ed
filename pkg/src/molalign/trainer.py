"""Min-max training loop: critic updates interleaved with model updates.

Each step first updates the adversarial critic on the global encoder
representations, then takes one Adam step on the encoders and projector
against the combined objective (triplet + weighted adversarial + the two
similarity-distribution losses).  Adversarial gradients reach only the
molecule encoder; the text encoder is detached from that term.

All randomness (batch order, triplet negatives, interpolation draws) is
derived from the config seed plus step counters, so runs are reproducible
and checkpoints resume deterministically.
"""

from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import objectives as obj
from .checkpoint import load_archive, save_archive
from .datamodel import (
    MOLECULE_ANCHOR,
    TEXT_ANCHOR,
    InstancePair,
    derive_seed,
    make_batches,
    sample_triplets,
)
from .encoders import (
    MolEncoderParams,
    TextEncoderParams,
    encode_molecule,
    encode_molecule_backward,
    encode_molecule_with_cache,
    encode_text,
    encode_text_backward,
    encode_text_with_cache,
    init_mol_encoder,
    init_text_encoder,
    mean_pool_backward,
)
from .objectives import DiscriminatorParams, LossBundle, init_discriminator
from .projector import (
    MemoryBank,
    SharedLinearProjector,
    embed_backward,
    embed_with_cache,
    init_memory_bank,
    init_shared_linear,
)

__all__ = [
    "ConfigError",
    "TrainConfig",
    "AdamState",
    "TrainState",
    "init_state",
    "train_step",
    "train",
    "sweep",
    "save_checkpoint",
    "load_checkpoint",
]


class ConfigError(ValueError):
    """Invalid training configuration; the message names the field."""


_ADV_MODES = ("wgan-gp", "log")


@dataclass(frozen=True)
class TrainConfig:
    """Every knob of one training run; defaults follow the reference recipe."""

    # model scale
    vocab_size: int = 512
    atom_dim: int = 16
    model_dim: int = 300
    text_dim: int = 300
    ffn_dim: int | None = None          # defaults to 2 * text_dim
    max_len: int = 64
    out_dim: int | None = None          # defaults to model_dim
    n_memory: int = 28
    gcn_hidden: tuple[int, ...] | None = None   # defaults to (model_dim, model_dim)
    gcn_activation: str = "relu"
    adjacency_norm: str = "sym"
    attn_scaled: bool = True
    disc_hidden: tuple[int, ...] = (64,)
    # optimization
    batch_size: int = 32
    epochs: int = 60
    lr_text: float = 3e-5
    lr_other: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    critic_steps_per_model_step: int = 1
    # objective
    alpha: float = 0.3
    lambda_1: float = 2e-4
    lambda_gp: float = 10.0
    adv_mode: str = "wgan-gp"
    w_u2u: float = 1.0
    w_u2c: float = 1.0
    use_cl: bool = True
    use_adv: bool = True
    use_t2m: bool = True
    use_m2t: bool = True
    use_2m: bool = True
    use_2t: bool = True
    use_memory_bank: bool = True
    # bookkeeping
    seed: int = 0
    checkpoint_every: int = 1           # epochs between checkpoint writes

    def validate(self) -> None:
        positive = ("lr_text", "lr_other", "adam_eps")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        at_least = {
            "vocab_size": 1, "atom_dim": 1, "model_dim": 1, "text_dim": 1,
            "max_len": 1, "n_memory": 1, "batch_size": 2, "epochs": 0,
            "critic_steps_per_model_step": 0, "checkpoint_every": 1,
        }
        for name, bound in at_least.items():
            if getattr(self, name) < bound:
                raise ConfigError(f"{name} must be >= {bound}")
        nonneg = ("alpha", "lambda_1", "lambda_gp", "w_u2u", "w_u2c")
        for name in nonneg:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.adv_mode not in _ADV_MODES:
            raise ConfigError(f"adv_mode must be one of {_ADV_MODES}")
        if self.adjacency_norm not in ("sym", "row"):
            raise ConfigError("adjacency_norm must be 'sym' or 'row'")
        if self.gcn_activation not in ("relu", "tanh", "identity"):
            raise ConfigError("gcn_activation must be 'relu', 'tanh' or 'identity'")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigError("adam_beta1/adam_beta2 must lie in [0, 1)")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("gcn_hidden", "disc_hidden"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown config field '{key}'")
        data = dict(data)
        for key in ("gcn_hidden", "disc_hidden"):
            if key in data and data[key] is not None:
                data[key] = tuple(data[key])
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path: str | Path) -> "TrainConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class AdamState:
    """First/second moment accumulators keyed like the parameter arrays."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_arrays(cls, arrays: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in arrays.items()},
            v={k: np.zeros_like(a) for k, a in arrays.items()},
        )


def _adam_update(
    arrays: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
    lr_for: callable,
) -> None:
    state.t += 1
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    bias1 = 1.0 - b1**state.t
    bias2 = 1.0 - b2**state.t
    for name, param in arrays.items():
        g = grads[name]
        state.m[name] = b1 * state.m[name] + (1 - b1) * g
        state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = state.m[name] / bias1
        v_hat = state.v[name] / bias2
        param -= lr_for(name) * m_hat / (np.sqrt(v_hat) + eps)


@dataclass
class TrainState:
    """All parameters, optimizer moments and counters of one training run."""

    config: TrainConfig
    text: TextEncoderParams
    mol: MolEncoderParams
    projector: MemoryBank | SharedLinearProjector
    disc: DiscriminatorParams
    opt_model: AdamState
    opt_disc: AdamState
    step: int = 0
    epoch: int = 0

    def model_arrays(self) -> dict[str, np.ndarray]:
        return {**self.text.arrays(), **self.mol.arrays(), **self.projector.arrays()}

    def all_arrays(self) -> dict[str, np.ndarray]:
        return {**self.model_arrays(), **self.disc.arrays()}


def init_state(config: TrainConfig) -> TrainState:
    """Build freshly initialized parameters from the config seed."""
    config.validate()
    rng = np.random.default_rng(derive_seed(config.seed, 0))
    text = init_text_encoder(
        config.vocab_size,
        config.text_dim,
        config.model_dim,
        rng,
        ffn_dim=config.ffn_dim,
        max_len=config.max_len,
    )
    mol = init_mol_encoder(
        config.atom_dim,
        config.model_dim,
        rng,
        hidden_dims=config.gcn_hidden,
        activation=config.gcn_activation,
        adjacency_norm=config.adjacency_norm,
    )
    if config.use_memory_bank:
        projector = init_memory_bank(
            config.n_memory,
            config.model_dim,
            rng,
            out_dim=config.out_dim,
            scaled=config.attn_scaled,
        )
    else:
        projector = init_shared_linear(config.model_dim, rng, out_dim=config.out_dim)
    disc = init_discriminator(config.model_dim, rng, hidden=config.disc_hidden)
    state = TrainState(
        config=config,
        text=text,
        mol=mol,
        projector=projector,
        disc=disc,
        opt_model=AdamState.for_arrays({}),
        opt_disc=AdamState.for_arrays(disc.arrays()),
    )
    state.opt_model = AdamState.for_arrays(state.model_arrays())
    return state


def _parse_triplets(triplets, batch_size: int):
    neg_for_text_anchor = np.zeros(batch_size, dtype=np.int64)
    neg_for_mol_anchor = np.zeros(batch_size, dtype=np.int64)
    for t in triplets:
        if t.direction == TEXT_ANCHOR:
            neg_for_text_anchor[t.anchor_index] = t.negative_index
        elif t.direction == MOLECULE_ANCHOR:
            neg_for_mol_anchor[t.anchor_index] = t.negative_index
    return neg_for_text_anchor, neg_for_mol_anchor


def model_loss_and_grads(
    batch: Sequence[InstancePair], state: TrainState, config: TrainConfig, step: int
) -> tuple[LossBundle, dict[str, np.ndarray]]:
    """Forward the batch, assemble the combined objective, backprop by hand.

    Pure in the parameters (no updates), so finite differences over any
    parameter array can validate the returned gradients directly.  ``step``
    seeds the triplet sampling.
    """
    batch_size = len(batch)
    if batch_size < 2:
        raise ValueError("batch losses need >= 2 instances")

    text_caches, mol_caches = [], []
    h_text, h_mol = [], []
    for pair in batch:
        ht, tc = encode_text_with_cache(pair.text, state.text)
        hm, mc = encode_molecule_with_cache(pair.molecule, state.mol)
        text_caches.append(tc)
        mol_caches.append(mc)
        h_text.append(ht)
        h_mol.append(hm)
    g_mol = np.stack([h.mean(axis=0) for h in h_mol])

    embed_caches_t, embed_caches_m = [], []
    x_text_rows, x_mol_rows = [], []
    for i in range(batch_size):
        xt, ct = embed_with_cache(h_text[i], state.projector)
        xm, cm = embed_with_cache(h_mol[i], state.projector)
        embed_caches_t.append(ct)
        embed_caches_m.append(cm)
        x_text_rows.append(xt)
        x_mol_rows.append(xm)
    x_text = np.stack(x_text_rows)
    x_mol = np.stack(x_mol_rows)

    dx_text = np.zeros_like(x_text)
    dx_mol = np.zeros_like(x_mol)

    l_cl = 0.0
    if config.use_cl:
        triplets = sample_triplets(batch_size, derive_seed(config.seed, 3, step))
        neg_t, neg_m = _parse_triplets(triplets, batch_size)
        l_cl, da_t, dp_m, dn_m, da_m, dp_t, dn_t = obj.triplet_loss_and_grads(
            x_text, x_mol, x_mol[neg_t], x_mol, x_text, x_text[neg_m], config.alpha
        )
        dx_text += da_t + dp_t
        dx_mol += dp_m + da_m
        np.add.at(dx_mol, neg_t, dn_m)
        np.add.at(dx_text, neg_m, dn_t)

    l_u2u = 0.0
    if config.use_t2m or config.use_m2t:
        l_u2u, dt, dm = obj.u2u_loss_and_grads(
            x_text, x_mol, include_t2m=config.use_t2m, include_m2t=config.use_m2t
        )
        dx_text += config.w_u2u * dt
        dx_mol += config.w_u2u * dm

    l_u2c = 0.0
    if config.use_2t or config.use_2m:
        l_u2c, dt, dm = obj.u2c_loss_and_grads(
            x_text, x_mol, include_2t=config.use_2t, include_2m=config.use_2m
        )
        dx_text += config.w_u2c * dt
        dx_mol += config.w_u2c * dm

    l_adv = 0.0
    dg_mol = None
    if config.use_adv:
        if config.adv_mode == "wgan-gp":
            l_adv, dg = obj.generator_loss_and_grad(g_mol, state.disc)
        else:
            l_adv, dg = obj.log_generator_loss_and_grad(g_mol, state.disc)
        dg_mol = config.lambda_1 * dg

    bundle = obj.total_loss(
        l_cl, l_adv, l_u2u, l_u2c, config.lambda_1,
        w_u2u=config.w_u2u, w_u2c=config.w_u2c,
    )

    model_arrays = state.model_arrays()
    grads = {name: np.zeros_like(arr) for name, arr in model_arrays.items()}
    for i in range(batch_size):
        dh_t, proj_grads = embed_backward(embed_caches_t[i], dx_text[i])
        for name, g in proj_grads.items():
            grads[name] += g
        dh_m, proj_grads = embed_backward(embed_caches_m[i], dx_mol[i])
        for name, g in proj_grads.items():
            grads[name] += g
        if dg_mol is not None:
            # adversarial term reaches the molecule encoder only, via its
            # mean-pooled global representation
            dh_m = dh_m + mean_pool_backward(dg_mol[i], h_mol[i].shape[0])
        for name, g in encode_text_backward(text_caches[i], dh_t).items():
            grads[name] += g
        for name, g in encode_molecule_backward(mol_caches[i], dh_m).items():
            grads[name] += g
    return bundle, grads


def train_step(
    batch: Sequence[InstancePair], state: TrainState, config: TrainConfig
) -> tuple[TrainState, LossBundle]:
    """One critic phase plus one model update; returns the loss bundle.

    Raises ``FloatingPointError`` naming the offending component if any loss
    goes non-finite.
    """
    batch_size = len(batch)
    if batch_size < 2:
        raise ValueError("train_step needs a batch of >= 2 instances")

    # critic phase: encoder outputs are constants, only the critic updates
    if config.use_adv and config.critic_steps_per_model_step > 0:
        g_text = np.stack(
            [encode_text(pair.text, state.text).mean(axis=0) for pair in batch]
        )
        g_mol = np.stack(
            [encode_molecule(pair.molecule, state.mol).mean(axis=0) for pair in batch]
        )
        for k in range(config.critic_steps_per_model_step):
            if config.adv_mode == "wgan-gp":
                rng = np.random.default_rng(derive_seed(config.seed, 2, state.step, k))
                eps = rng.uniform(size=(batch_size, 1))
                _, disc_grads = obj.critic_loss_and_grads(
                    g_text, g_mol, state.disc, config.lambda_gp, eps
                )
            else:
                _, disc_grads = obj.log_critic_loss_and_grads(g_text, g_mol, state.disc)
            _adam_update(
                state.disc.arrays(), disc_grads, state.opt_disc, config,
                lr_for=lambda name: config.lr_other,
            )

    bundle, grads = model_loss_and_grads(batch, state, config, state.step)
    _adam_update(
        state.model_arrays(), grads, state.opt_model, config,
        lr_for=lambda name: config.lr_text if name.startswith("text/") else config.lr_other,
    )
    state.step += 1
    return state, bundle


def save_checkpoint(state: TrainState, path: str | Path) -> None:
    """Archive parameters, optimizer moments and counters; loads bit-identically."""
    arrays = dict(state.all_arrays())
    for prefix, opt in (("adam_model", state.opt_model), ("adam_disc", state.opt_disc)):
        for name, arr in opt.m.items():
            arrays[f"{prefix}/m/{name}"] = arr
        for name, arr in opt.v.items():
            arrays[f"{prefix}/v/{name}"] = arr
    meta = {
        "config": state.config.to_dict(),
        "step": state.step,
        "epoch": state.epoch,
        "opt_model_t": state.opt_model.t,
        "opt_disc_t": state.opt_disc.t,
    }
    save_archive(path, arrays, meta)


def load_checkpoint(path: str | Path) -> TrainState:
    arrays, meta = load_archive(path)
    config = TrainConfig.from_dict(meta["config"])
    state = init_state(config)
    for name, param in state.all_arrays().items():
        param[...] = arrays[name]
    for prefix, opt in (("adam_model", state.opt_model), ("adam_disc", state.opt_disc)):
        for name in opt.m:
            opt.m[name][...] = arrays[f"{prefix}/m/{name}"]
            opt.v[name][...] = arrays[f"{prefix}/v/{name}"]
    state.opt_model.t = int(meta["opt_model_t"])
    state.opt_disc.t = int(meta["opt_disc_t"])
    state.step = int(meta["step"])
    state.epoch = int(meta["epoch"])
    return state


def _validation_mrr(state: TrainState, pairs: Sequence[InstancePair]) -> float:
    from .evaluator import embed_corpus, evaluate_retrieval

    x_text, x_mol = embed_corpus(state, pairs)
    report = evaluate_retrieval(x_text, x_mol)
    return (report.text_to_molecule.mrr + report.molecule_to_text.mrr) / 2.0


def train(
    dataset: Sequence[InstancePair],
    config: TrainConfig,
    *,
    val: Sequence[InstancePair] | None = None,
    out_dir: str | Path | None = None,
    resume_from: str | Path | None = None,
) -> tuple[TrainState, Path | None]:
    """Epoch loop around :func:`train_step` with logging and checkpointing.

    Writes one JSON object per step to ``train_log.jsonl`` under ``out_dir``
    and checkpoints every ``config.checkpoint_every`` epochs.  When a
    validation split is given, returns the state with the best mean
    bidirectional MRR; otherwise the final state.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    config.validate()
    state = load_checkpoint(resume_from) if resume_from else init_state(config)

    log_path = None
    log_fh = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / "train_log.jsonl"
        log_fh = open(log_path, "a" if resume_from else "w", encoding="utf-8")

    best_state = None
    best_mrr = -np.inf
    try:
        for epoch in range(state.epoch, config.epochs):
            batches = make_batches(dataset, config.batch_size, derive_seed(config.seed, 1, epoch))
            for batch in batches:
                state, bundle = train_step(batch, state, config)
                if log_fh is not None:
                    log_fh.write(json.dumps(bundle.as_record(state.step)) + "\n")
            state.epoch = epoch + 1
            if log_fh is not None:
                log_fh.flush()
            if out_dir is not None and (epoch + 1) % config.checkpoint_every == 0:
                save_checkpoint(state, out_dir / "checkpoint_last.npz")
            if val:
                mrr = _validation_mrr(state, val)
                if mrr > best_mrr:
                    best_mrr = mrr
                    best_state = copy.deepcopy(state)
                    if out_dir is not None:
                        save_checkpoint(best_state, out_dir / "checkpoint_best.npz")
    finally:
        if log_fh is not None:
            log_fh.close()

    if out_dir is not None and state.epoch == config.epochs:
        save_checkpoint(state, out_dir / "checkpoint_last.npz")
    return (best_state if best_state is not None else state), log_path


def sweep(
    train_pairs: Sequence[InstancePair],
    eval_pairs: Sequence[InstancePair],
    config: TrainConfig,
    loss_name: str,
    weights: Sequence[float],
) -> list[dict]:
    """Train one model per alignment-loss weight and report retrieval metrics.

    ``loss_name`` selects which of the two alignment losses is reweighted
    ("u2u" or "u2c"); everything else stays fixed.
    """
    from .evaluator import embed_corpus, evaluate_retrieval

    if loss_name not in ("u2u", "u2c"):
        raise ValueError("loss_name must be 'u2u' or 'u2c'")
    if len(weights) == 0:
        raise ValueError("weights must be nonempty")
    rows = []
    for weight in weights:
        cfg = replace(config, **{("w_u2u" if loss_name == "u2u" else "w_u2c"): float(weight)})
        state, _ = train(train_pairs, cfg)
        x_text, x_mol = embed_corpus(state, eval_pairs)
        report = evaluate_retrieval(x_text, x_mol)
        rows.append(
            {
                "loss": loss_name,
                "weight": float(weight),
                "t2m_hits_at_1": report.text_to_molecule.hits_at_1,
                "t2m_mean_rank": report.text_to_molecule.mean_rank,
                "m2t_hits_at_1": report.molecule_to_text.hits_at_1,
                "m2t_mean_rank": report.molecule_to_text.mean_rank,
            }
        )
    return rows
