"""Local-neighborhood graph autoencoders for link prediction and node classification."""
from .graph import (ABSENT, PRESENT, UNK, AugmentedRow, EdgeSplit, FeatureMatrix, LabelSet,
                    MaskedAdjacency, augment_row, build_adjacency, degrade_edges, make_mf_split,
                    make_vgae_split)
from .harness import (TrainConfig, Trainer, run_link_prediction, run_multitask,
                      run_node_classification, run_reconstruction)
from .kernels import BACKEND
from .losses import LossConfig, alpha_mbce, compute_zeta, mbce, multitask_loss
from .metrics import accuracy, average_precision, precision_at_k, roc_auc
from .model import (ModelConfig, ModelParams, backward, encode, forward, forward_autoencoder,
                    forward_classifier, init_params, score_pairs)
from .numeric import make_rng

__version__ = "0.1.0"
