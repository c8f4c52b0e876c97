"""ReLU value networks: evaluation, sizing, training, exact constructions, diagnostics."""

from .construct import IncompleteTableError, exact_fit_gnn, exact_fit_isnn, multilinear_coefficients
from .diagnostics import SupermodularityResult, check_supermodular, lipschitz_bound, spectral_norm
from .net import (GNN, ISNN, Layer, ValueNet, closed_form_gnn, closed_form_isnn, count_parameters,
                  parse_kind, zero_net)
from .sizing import Architecture, gnn_min_neurons, gnn_params, size_for, size_gnn, size_isnn
from .train import TrainConfig, init_net, project_isnn, train

__all__ = [
    "GNN", "ISNN", "Layer", "ValueNet", "Architecture", "TrainConfig", "IncompleteTableError",
    "SupermodularityResult", "check_supermodular", "closed_form_gnn", "closed_form_isnn",
    "count_parameters", "exact_fit_gnn", "exact_fit_isnn", "gnn_min_neurons", "gnn_params", "init_net",
    "lipschitz_bound", "multilinear_coefficients", "parse_kind", "project_isnn", "size_for",
    "size_gnn", "size_isnn", "spectral_norm", "train", "zero_net",
]
