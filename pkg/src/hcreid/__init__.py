"""Cross-modality metric learning with the Hetero-Center loss family.

Submodules
----------
linalg      normalization, softmax and activation primitives with backward passes
losses      cross-entropy, Hetero-Center loss (margin / cosine / strong variants), center loss
sampler     L x T identity- and modality-balanced mini-batch sampling
data        synthetic two-modality datasets, identity-disjoint splits, text file format
network     two-stream stripe-pooling embedding network with exact gradients
trainer     SGD-with-momentum training loop under the joint CE + lambda * HC objective
evaluation  gallery/probe construction, ranking, CMC, mAP, 2-D projection
config      INI run configuration
experiment  train-and-evaluate runs and one-axis sweeps
cli         ``hcreid`` command-line entry point
"""

from hcreid.linalg import l2_normalize, l2_normalize_backward, softmax
from hcreid.losses import (
    CenterLossState,
    HcConfig,
    LabeledFeatures,
    center_loss,
    cross_entropy,
    hc_loss,
    hc_loss_gradient,
    modality_centers,
    strong_constraint_gradient,
    strong_constraint_loss,
    total_loss,
)
from hcreid.sampler import DatasetIndex, MiniBatch, legacy_sample_batch, sample_batch
from hcreid.data import Dataset, SynthSpec, generate, load, save, split, standard_benchmark
from hcreid.network import ModelConfig, backward, extract_descriptor, forward, init_params
from hcreid.trainer import TrainConfig, TrainHistory, center_distance_probe, sgd_momentum_step, train
from hcreid.evaluation import (
    EvalProtocol,
    EvalReport,
    build_gallery,
    cmc_curve,
    evaluate,
    mean_average_precision,
    project_2d,
    rank_gallery,
)

__version__ = "0.1.0"
