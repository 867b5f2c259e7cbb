"""Per-type content aggregation: project each attribute's vectors to the
unified dimension, contextualize same-type nodes with multi-head
self-attention, and mean-pool across attributes into one matrix per type.

The target news node runs through the same per-type machinery on its own
(a length-1 sequence), separately from its news-type neighbors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .embeddings import MISSING, AttributeKey, EmbeddingTable
from .errors import DimMismatch, NotANewsNode, ShapeMismatch
from .graph import NodeType


@dataclass
class ContentConfig:
    unified_dim: int = 32
    heads: int = 4
    attention_layers: int = 1
    per_attribute_blocks: bool = False

    def __post_init__(self):
        if self.unified_dim % self.heads != 0:
            raise ValueError(
                f"unified_dim {self.unified_dim} not divisible by heads {self.heads}"
            )


@dataclass
class MultiHeadBlock:
    """One attention layer: per-head query/key/value maps plus the output map."""

    heads: list[tuple[Parameter, Parameter, Parameter]]
    wo: Parameter

    @property
    def head_dim(self) -> int:
        return self.heads[0][0].shape[1]


def multi_head_attention(
    q_in: Tensor, kv_in: Tensor, block: MultiHeadBlock, key_bias: Tensor | None = None
) -> Tensor:
    """Scaled dot-product attention over ``heads`` parallel subspaces.

    ``key_bias`` is an additive logit row (0 for real keys, a large negative
    number for padded ones) applied to every query row.
    """
    inv_sqrt_dk = 1.0 / math.sqrt(block.head_dim)
    outs = []
    for wq, wk, wv in block.heads:
        q = ad.matmul(q_in, wq)
        k = ad.matmul(kv_in, wk)
        v = ad.matmul(kv_in, wv)
        logits = ad.scale(ad.matmul(q, ad.transpose(k)), inv_sqrt_dk)
        if key_bias is not None:
            logits = ad.add(logits, key_bias)
        attn = ad.softmax_rows(logits)
        outs.append(ad.matmul(attn, v))
    return ad.matmul(ad.concat_cols(outs), block.wo)


def stack_attribute(
    node_ids: list[int], table: EmbeddingTable, dtype=np.float32
) -> tuple[Tensor, np.ndarray]:
    """Stack one attribute's vectors for the given nodes, in the given order.

    Missing rows become zero vectors; the boolean companion array records
    which rows were actually present.
    """
    dim = table.key.dim
    data = np.zeros((len(node_ids), dim), dtype=dtype)
    present = np.zeros(len(node_ids), dtype=bool)
    for j, node_id in enumerate(node_ids):
        vec = table.lookup(node_id)
        if vec is MISSING:
            continue
        if vec.shape != (dim,):
            raise DimMismatch(f"stored vector for node {node_id} has shape {vec.shape}")
        data[j] = vec
        present[j] = True
    return Tensor(data, dtype=dtype), present


def project(q: Tensor, proj: Parameter) -> Tensor:
    """Map [m x d_ik] attribute rows to the unified dimension: q @ proj^T."""
    if q.shape[1] != proj.shape[1]:
        raise ShapeMismatch(f"project {q.shape} with matrix {proj.shape}")
    return ad.matmul(q, ad.transpose(proj))


def attend(q_proj: Tensor, blocks: list[MultiHeadBlock]) -> Tensor:
    """Stacked self-attention over same-type rows (Q = K = V)."""
    x = q_proj
    for block in blocks:
        x = multi_head_attention(x, x, block)
    return x


def fuse(per_attribute: list[Tensor]) -> Tensor:
    """Elementwise arithmetic mean across attribute outputs."""
    if not per_attribute:
        raise ShapeMismatch("fuse of empty attribute list")
    shape = per_attribute[0].shape
    for t in per_attribute:
        if t.shape != shape:
            raise ShapeMismatch(f"fuse shapes differ: {[t.shape for t in per_attribute]}")
    if len(per_attribute) == 1:
        return per_attribute[0]
    acc = per_attribute[0]
    for t in per_attribute[1:]:
        acc = ad.add(acc, t)
    return ad.scale(acc, 1.0 / len(per_attribute))


@dataclass
class ContentAggregator:
    """Parameters and forward pass of the per-type content pipeline."""

    cfg: ContentConfig
    attributes: dict[NodeType, list[AttributeKey]]
    projections: dict[AttributeKey, Parameter] = field(default_factory=dict)
    blocks: dict[tuple, list[MultiHeadBlock]] = field(default_factory=dict)
    dtype: type = np.float32

    def _blocks_for(self, ntype: NodeType, key: AttributeKey) -> list[MultiHeadBlock]:
        tag = (ntype, key.attr_name) if self.cfg.per_attribute_blocks else (ntype,)
        return self.blocks[tag]

    def encode_nodes(self, ntype: NodeType, node_ids: list[int], tables) -> Tensor:
        """Node representations [m x d] for same-type nodes in rank order."""
        d = self.cfg.unified_dim
        if not node_ids:
            return Tensor(np.zeros((0, d), dtype=self.dtype))
        if not self.attributes.get(ntype):
            raise ShapeMismatch(
                f"sample contains {ntype.value} nodes but no {ntype.value} "
                f"attribute table is configured"
            )
        per_attr = []
        for key in self.attributes[ntype]:
            q, _ = stack_attribute(node_ids, tables[key], dtype=self.dtype)
            q_proj = project(q, self.projections[key])
            per_attr.append(attend(q_proj, self._blocks_for(ntype, key)))
        return fuse(per_attr)

    def encode_target(self, news_id: int, node_type: NodeType, tables) -> Tensor:
        if node_type is not NodeType.NEWS:
            raise NotANewsNode(news_id)
        return self.encode_nodes(NodeType.NEWS, [news_id], tables)


def build_content_aggregator(
    cfg: ContentConfig,
    attributes: dict[NodeType, list[AttributeKey]],
    register,
    rng: np.random.Generator,
    dtype=np.float32,
) -> ContentAggregator:
    """Create all projection and attention parameters.

    ``register`` is called with each new Parameter so the caller can keep a
    flat name-indexed store for the optimizer and checkpoints.
    """
    d = cfg.unified_dim
    dk = d // cfg.heads
    agg = ContentAggregator(cfg=cfg, attributes=attributes, dtype=dtype)

    def param(name, shape):
        p = Parameter(ad.xavier_uniform(shape, rng, dtype=dtype), name=name)
        register(p)
        return p

    def make_stack(prefix):
        stack = []
        for layer in range(cfg.attention_layers):
            heads = [
                (
                    param(f"{prefix}.layer{layer}.h{i}.q", (d, dk)),
                    param(f"{prefix}.layer{layer}.h{i}.k", (d, dk)),
                    param(f"{prefix}.layer{layer}.h{i}.v", (d, dk)),
                )
                for i in range(cfg.heads)
            ]
            wo = param(f"{prefix}.layer{layer}.o", (d, d))
            stack.append(MultiHeadBlock(heads=heads, wo=wo))
        return stack

    for ntype in sorted(attributes, key=lambda t: t.code):
        keys = sorted(attributes[ntype], key=lambda k: k.attr_name)
        attributes[ntype] = keys
        for key in keys:
            agg.projections[key] = param(f"proj.{ntype.value}.{key.attr_name}", (d, key.dim))
        if cfg.per_attribute_blocks:
            for key in keys:
                agg.blocks[(ntype, key.attr_name)] = make_stack(
                    f"attn.{ntype.value}.{key.attr_name}"
                )
        else:
            agg.blocks[(ntype,)] = make_stack(f"attn.{ntype.value}")
    return agg
