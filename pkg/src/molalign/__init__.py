"""Cross-modal text-molecule retrieval with a shared memory-bank projector.

The package pairs a small order-sensitive text encoder with a graph
convolutional molecule encoder, projects both through one set of learnable
memory vectors into a shared space, and trains with a triplet hinge, an
adversarial critic and two similarity-distribution alignment losses.  A full
evaluation and diagnostics harness (bidirectional retrieval metrics, modality
gap, ablation and weight-sweep runners) rounds out the library.
"""

__version__ = "0.1.0"

from .datamodel import (
    AtomFeatureTable,
    DatasetError,
    InstancePair,
    MoleculeGraph,
    TokenSequence,
    Triplet,
    featurize_molecule,
    generate_synthetic,
    load_dataset,
    make_batches,
    sample_triplets,
    save_dataset,
    split_dataset,
)
from .encoders import (
    MolEncoderParams,
    TextEncoderParams,
    encode_molecule,
    encode_text,
    init_mol_encoder,
    init_text_encoder,
    mean_pool,
)
from .evaluator import (
    GapReport,
    RetrievalReport,
    embed_corpus,
    evaluate_retrieval,
    metrics,
    modality_gap,
    pairwise_consistency,
    rank,
    run_ablation,
)
from .objectives import (
    DiscriminatorParams,
    LossBundle,
    adversarial_losses,
    cosine_similarity,
    discriminator_score,
    euclidean_distance,
    kl_divergence,
    loss_u2c,
    loss_u2u,
    similarity_distribution,
    total_loss,
    triplet_loss,
)
from .projector import (
    MemoryBank,
    ModalityEmbedding,
    SharedLinearProjector,
    attention,
    finalize,
    init_memory_bank,
    project,
)
from .trainer import (
    ConfigError,
    TrainConfig,
    TrainState,
    init_state,
    load_checkpoint,
    save_checkpoint,
    sweep,
    train,
    train_step,
)
