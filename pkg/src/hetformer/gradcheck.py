"""Finite-difference verification of the full model's tape gradients.

Builds a small fixed instance (one news root with a mixed-type ranked
neighborhood, plus one isolated root exercising the empty-sample paths),
sums the two cross-entropy losses, and compares every parameter's tape
gradient against central differences in 64-bit.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .content import ContentConfig
from .embeddings import AttributeKey, EmbeddingTable
from .graph import NodeType
from .model import HetTransformerModel, bce_loss
from .rwr import NeighborSample
from .transformer import TransformerConfig


def build_toy_instance(dim: int = 8, attr_dim: int = 12, seed: int = 7):
    """Embedding tables plus two ranked samples for a toy forward pass."""
    rng = np.random.default_rng(seed)
    tables = {}
    dims = {NodeType.NEWS: attr_dim, NodeType.POST: attr_dim, NodeType.USER: attr_dim}
    names = {NodeType.NEWS: "text", NodeType.POST: "text", NodeType.USER: "profile"}
    node_ids = {NodeType.NEWS: [0, 1, 6], NodeType.POST: [2, 3], NodeType.USER: [4, 5]}
    for ntype in NodeType:
        table = EmbeddingTable(AttributeKey(ntype, names[ntype], dims[ntype]))
        for node_id in node_ids[ntype]:
            table.put(node_id, rng.normal(size=dims[ntype]) * 0.8)
        tables[table.key] = table

    sample = NeighborSample(
        root=0,
        ranked=[
            (2, NodeType.POST, 5),
            (4, NodeType.USER, 3),
            (1, NodeType.NEWS, 2),
            (3, NodeType.POST, 1),
        ],
    )
    lonely = NeighborSample.empty(6)
    attributes = {t: [k for k in tables if k.node_type is t] for t in NodeType}
    return tables, attributes, sample, lonely


def full_model_grad_check(
    dim: int = 8,
    heads: int = 2,
    layers: int = 1,
    gamma: int = 4,
    seed: int = 7,
    eps: float = 1e-5,
    literal_eq8: bool = False,
) -> float:
    """Max relative gradient error over every parameter of the full model."""
    tables, attributes, sample, lonely = build_toy_instance(dim=dim, seed=seed)
    if gamma < sample.l:
        sample = NeighborSample(root=sample.root, ranked=sample.ranked[:gamma])
    model = HetTransformerModel(
        ContentConfig(unified_dim=dim, heads=heads, attention_layers=1),
        TransformerConfig(layers=layers, heads=heads, model_dim=dim, dropout=0.0,
                          max_len=gamma + 1),
        attributes,
        literal_eq8=literal_eq8,
        seed=seed,
        dtype=np.float64,
    )

    def loss_fn():
        y1 = model.predict_news(sample.root, sample, tables, train=False)
        y2 = model.predict_news(lonely.root, lonely, tables, train=False)
        return ad.add(bce_loss(y1, 1), bce_loss(y2, 0))

    return ad.grad_check(loss_fn, model.parameters(), eps=eps)
