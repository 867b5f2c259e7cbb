"""hetformer: heterogeneous-graph fake/real news classification.

Pipeline: random-walk-with-restart neighbor sampling over a typed social
graph, attention-based fusion of per-node multi-modal embeddings, and an
encoder-decoder Transformer that aggregates each news node's propagation
neighborhood into a classification representation.
"""

from .dataset import Dataset, load_dataset
from .embeddings import (
    MISSING,
    AttributeKey,
    EmbeddingTable,
    load_embedding_dir,
    load_embeddings,
    write_embeddings,
)
from .estimator import HetTransformerClassifier, Split, TrainRun, run_experiment, split_news
from .graph import (
    EdgeType,
    GraphStats,
    HetGraph,
    NodeType,
    load_graph,
    load_graph_dir,
    save_graph,
    save_graph_dir,
)
from .metrics import MetricsReport, binary_report, f1_score
from .model import HetTransformerModel, bce_loss, head_forward
from .rwr import (
    NeighborSample,
    WalkConfig,
    load_sample_cache,
    rwr_oracle,
    sample_all,
    sample_neighbors,
    sort_most_frequent,
    write_sample_cache,
)
from .synth import SynthConfig, content_free_variant, generate

__version__ = "0.1.0"

__all__ = [
    "AttributeKey",
    "Dataset",
    "EdgeType",
    "EmbeddingTable",
    "GraphStats",
    "HetGraph",
    "HetTransformerClassifier",
    "HetTransformerModel",
    "MISSING",
    "MetricsReport",
    "NeighborSample",
    "NodeType",
    "Split",
    "SynthConfig",
    "TrainRun",
    "WalkConfig",
    "bce_loss",
    "binary_report",
    "content_free_variant",
    "f1_score",
    "generate",
    "head_forward",
    "load_dataset",
    "load_embedding_dir",
    "load_embeddings",
    "load_graph",
    "load_graph_dir",
    "load_sample_cache",
    "rwr_oracle",
    "run_experiment",
    "sample_all",
    "sample_neighbors",
    "save_graph",
    "save_graph_dir",
    "sort_most_frequent",
    "split_news",
    "write_embeddings",
    "write_sample_cache",
]
