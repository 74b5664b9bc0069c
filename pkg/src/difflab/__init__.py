"""Desk-scale lab for label smoothing, distillation temperature and representation diffusion."""

from .data import HierarchySpec, LabeledDataset, generate, ground_truth_sets, load_dataset, save_dataset
from .errors import DifflabError
from .geometry import (FeatureMatrix, SemanticSets, centroids, diffusion_index,
                       diffusion_index_pairwise, relative_distance, select_semantic_sets)
from .nn import NetworkParams, SgdConfig, backward, forward, init_network, sgd_step, train
from .objectives import (DistillConfig, SmoothingConfig, SoftDistribution, cross_entropy,
                         kd_loss, kd_loss_grad, ls_targets, tempered_softmax)

__version__ = "0.1.0"
