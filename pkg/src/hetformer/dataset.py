"""Bundle of everything one experiment consumes: graph, embedding tables,
and the RWR sample cache."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .embeddings import AttributeKey, EmbeddingTable, load_embedding_dir
from .graph import HetGraph, NodeType, load_graph_dir
from .rwr import NeighborSample, load_sample_cache


@dataclass
class Dataset:
    graph: HetGraph
    tables: dict[AttributeKey, EmbeddingTable]
    samples: dict[int, NeighborSample] = field(default_factory=dict)

    def attributes_by_type(self) -> dict[NodeType, list[AttributeKey]]:
        out: dict[NodeType, list[AttributeKey]] = {}
        for key in self.tables:
            out.setdefault(key.node_type, []).append(key)
        for ntype in out:
            out[ntype].sort(key=lambda k: k.attr_name)
        return out

    def max_sequence_len(self) -> int:
        longest = max((s.l for s in self.samples.values()), default=0)
        return longest + 1


def load_dataset(graph_dir, emb_dir=None, cache_path=None, schema=None) -> Dataset:
    graph = load_graph_dir(graph_dir, schema=schema)
    tables = load_embedding_dir(emb_dir if emb_dir is not None else graph_dir)
    samples = {}
    if cache_path is not None and Path(cache_path).exists():
        samples = load_sample_cache(cache_path)
    return Dataset(graph=graph, tables=tables, samples=samples)
