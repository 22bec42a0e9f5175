"""Link prediction on random-walk sampled enclosing subgraphs.

Pipeline: split edges -> extract enclosing subgraphs (exact BFS or
walk-sampled) -> double-radius node labeling -> heuristic scoring or a
small trained subgraph classifier -> seed-averaged AUC evaluation and
sparsity profiling.
"""

from .evaluate import ExperimentReport, auc, profile_samples, run_experiment, sweep
from .extract import (
    ExtractionConfig,
    bfs_enclosing,
    extract_batch,
    random_walk,
    rw_enclosing,
    strip_target_edge,
)
from .graph import DataError, Graph, SubgraphSample, build_graph, induced_subgraph, read_edge_list
from .heuristics import HeuristicKind, adamic_adar, common_neighbors, ppr_score, score_instances
from .kernels import backend as kernel_backend
from .labeling import LabeledSubgraph, assemble_node_input, drnl_hash, label_subgraph
from .model import ModelConfig, ModelParams, predict, train
from .splits import LinkInstance, SplitSet, read_splits, sample_negatives, split_edges, write_splits

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "kernel_backend",
    "DataError",
    "Graph",
    "SubgraphSample",
    "build_graph",
    "induced_subgraph",
    "read_edge_list",
    "LinkInstance",
    "SplitSet",
    "split_edges",
    "sample_negatives",
    "write_splits",
    "read_splits",
    "ExtractionConfig",
    "bfs_enclosing",
    "rw_enclosing",
    "random_walk",
    "strip_target_edge",
    "extract_batch",
    "LabeledSubgraph",
    "drnl_hash",
    "label_subgraph",
    "assemble_node_input",
    "HeuristicKind",
    "common_neighbors",
    "adamic_adar",
    "ppr_score",
    "score_instances",
    "ModelConfig",
    "ModelParams",
    "train",
    "predict",
    "auc",
    "profile_samples",
    "run_experiment",
    "sweep",
    "ExperimentReport",
]
