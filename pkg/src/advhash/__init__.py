"""Binary hash codes for approximate nearest-neighbor search.

Learns codes with an adversarially trained reconstruction model, ships LSH
and ITQ baselines behind the same {-1,+1} code contract, and evaluates all
of them with Hamming ranking against exact Euclidean ground truth.
"""

from .baselines import ItqModel, itq_encode, itq_train, lsh_train
from .datasets import Dataset, read_bvecs, read_fvecs, read_idx_images, synthetic_mixture
from .metrics import EvalReport, average_precision, evaluate, precision_at_k, recall_curve
from .model import (
    AdvHashModel,
    EnergyDiscriminator,
    HashEncoder,
    MeasurementMatrix,
    SparseGenerator,
    discriminator_energy,
    encode_binary,
    generator_forward,
    hash_forward,
    init_model,
    reconstruct,
    synthesize,
)
from .numerics import AdamState, RngStream, adam_step, finite_diff_grad, gaussian_matrix, matmul, svd_small
from .search import (
    PackedCodeSet,
    exact_topn_euclidean,
    hamming,
    pack_codes,
    rank_by_hamming,
    unpack_codes,
)
from .training import BatchGraph, TrainConfig, TrainHistory, batch_similarity, graph_loss, train

__version__ = "0.1.0"
