"""Loss-aware curriculum training for heterogeneous graph node classification."""

from .curriculum import ScheduleConfig, ScheduleState, SelectionResult, advance, pacing_value, select_nodes
from .estimator import LTSNodeClassifier
from .gnn_core import RelationalModelParams, backward, forward, init_params, per_node_losses
from .hetero_graph import (
    HeteroGraph,
    NoiseRecord,
    SyntheticSpec,
    generate_synthetic,
    inject_label_noise,
    load_graph,
    save_graph,
    simple_spec,
)
from .experiment import Comparison, compare
from .metrics import accuracy, exclusion_purity
from .trainer import TrainConfig, TrainReport, run_training

__version__ = "0.1.0"

__all__ = [
    "HeteroGraph", "NoiseRecord", "SyntheticSpec", "generate_synthetic", "inject_label_noise",
    "load_graph", "save_graph", "simple_spec", "compare", "Comparison", "RelationalModelParams", "init_params", "forward", "backward",
    "per_node_losses", "ScheduleConfig", "ScheduleState", "SelectionResult", "pacing_value",
    "select_nodes", "advance", "TrainConfig", "TrainReport", "run_training", "accuracy",
    "exclusion_purity", "LTSNodeClassifier",
]
