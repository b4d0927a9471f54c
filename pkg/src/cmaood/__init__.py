"""Cross-modal alignment (CMA) fine-tuning objective, NegLabel-style OoD scoring,
negative-label mining and hyperspherical modality-gap diagnostics."""

from .sphere import EmbeddingSet, normalize, normalize_rows, cosine_matrix, log_sum_exp
from .losses import (
    CmaConfig, LossBreakdown, PairedBatch, Temperature, clip_loss, cma_objective,
    cma_objective_rewritten, cma_regularizer, log_marginal_estimate, loss_gradients,
)
from .data import SyntheticDataset, SyntheticSpec, generate_synthetic
from .encoder import EncoderParams, encoder_forward, init_params, objective_and_gradients
from .train import TrainConfig, accuracy_from_embeddings, id_accuracy, pretrain, sweep, train
from .negmining import NegMiningConfig, NegativeLabelSet, mine_negatives, percentile
from .scoring import (
    ScoreConfig, ScoreVector, mcm_score, neglabel_score, neglabel_score_grouped, score_batch,
)
from .metrics import (
    DetectionReport, GapReport, PairMode, alignment, auroc, detection_report, fpr_at_tpr,
    gap_report, roc_points, uniformity,
)
from .io import read_embeddings, write_embeddings

__version__ = "0.1.0"
