"""Full classifier: content aggregation, neighbor Transformer, and the
prediction head, with a flat name-indexed parameter store.

The default head widens the decoder readout through a ReLU hidden layer
before the sigmoid output. ``literal_eq8=True`` switches to a single-layer
head (sigmoid of one ReLU'd affine scalar) for comparison runs; note that
form can never emit a probability below 0.5, so the fake class is
unreachable at the usual threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor, load_checkpoint, save_checkpoint
from .content import ContentAggregator, ContentConfig, build_content_aggregator
from .dataset import Dataset
from .embeddings import AttributeKey
from .errors import ShapeMismatch
from .graph import NodeType
from .rwr import NeighborSample
from .transformer import (
    TransformerConfig,
    TransformerParams,
    build_dec_input,
    build_enc_input,
    build_transformer_params,
    transformer_forward,
)


@dataclass
class HeadParams:
    w_hidden: Parameter | None
    b_hidden: Parameter | None
    w_out: Parameter
    b_out: Parameter
    literal: bool


def head_forward(rep: Tensor, head: HeadParams) -> Tensor:
    """Class probability of "real" from the target representation."""
    if head.literal:
        z = ad.add(ad.matmul(rep, head.w_out), head.b_out)
        return ad.sigmoid(ad.relu(z))
    h = ad.relu(ad.add(ad.matmul(rep, head.w_hidden), head.b_hidden))
    return ad.sigmoid(ad.add(ad.matmul(h, head.w_out), head.b_out))


def bce_loss(y_hat: Tensor, y: int, eps: float = 1e-7) -> Tensor:
    """Cross-entropy of one prediction against a {0,1} label."""
    y_hat = ad.clamp(y_hat, eps, 1.0 - eps)
    if y == 1:
        return ad.scale(ad.mean_all(ad.log(y_hat)), -1.0)
    return ad.scale(ad.mean_all(ad.log(ad.add_const(ad.scale(y_hat, -1.0), 1.0))), -1.0)


class HetTransformerModel:
    """Owns all parameters and computes per-news predictions."""

    def __init__(
        self,
        content_cfg: ContentConfig,
        xf_cfg: TransformerConfig,
        attributes: dict[NodeType, list[AttributeKey]],
        head_hidden: int | None = None,
        literal_eq8: bool = False,
        ablate_decoder: bool = False,
        ablate_positional: bool = False,
        seed: int = 0,
        dtype=np.float32,
    ):
        if content_cfg.unified_dim != xf_cfg.model_dim:
            raise ShapeMismatch("content unified_dim must equal transformer model_dim")
        self.content_cfg = content_cfg
        self.xf_cfg = xf_cfg
        self.ablate_decoder = ablate_decoder
        self.ablate_positional = ablate_positional
        self.dtype = dtype
        self.params: dict[str, Parameter] = {}

        rng = np.random.default_rng(seed)
        self.aggregator: ContentAggregator = build_content_aggregator(
            content_cfg, attributes, self._register, rng, dtype=dtype
        )
        self.xf_params: TransformerParams = build_transformer_params(
            xf_cfg,
            self._register,
            rng,
            ablate_decoder=ablate_decoder,
            ablate_positional=ablate_positional,
            dtype=dtype,
        )

        d = content_cfg.unified_dim
        d_h = head_hidden if head_hidden is not None else d
        if literal_eq8:
            w_out = Parameter(ad.xavier_uniform((d, 1), rng, dtype=dtype), name="head.w_out")
            b_out = Parameter(np.zeros(1, dtype=dtype), name="head.b_out")
            self._register(w_out)
            self._register(b_out)
            self.head = HeadParams(None, None, w_out, b_out, literal=True)
        else:
            w_hidden = Parameter(ad.xavier_uniform((d, d_h), rng, dtype=dtype), name="head.w_hidden")
            b_hidden = Parameter(np.zeros(d_h, dtype=dtype), name="head.b_hidden")
            w_out = Parameter(ad.xavier_uniform((d_h, 1), rng, dtype=dtype), name="head.w_out")
            b_out = Parameter(np.zeros(1, dtype=dtype), name="head.b_out")
            for p in (w_hidden, b_hidden, w_out, b_out):
                self._register(p)
            self.head = HeadParams(w_hidden, b_hidden, w_out, b_out, literal=False)

    def _register(self, p: Parameter) -> None:
        if p.name in self.params:
            raise ValueError(f"duplicate parameter name {p.name}")
        self.params[p.name] = p

    def parameters(self) -> list[Parameter]:
        return [self.params[name] for name in sorted(self.params)]

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    # --- forward ---

    def target_representation(
        self,
        news_id: int,
        sample: NeighborSample,
        tables,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        agg = self.aggregator
        target = agg.encode_target(news_id, NodeType.NEWS, tables)
        type_rows = {
            t: agg.encode_nodes(t, sample.ids_of_type(t), tables) for t in NodeType
        }
        enc_tokens = build_enc_input(
            target, type_rows, sample, self.xf_params, self.xf_cfg.max_len
        )
        dec_tokens = None
        if not self.ablate_decoder:
            dec_tokens = build_dec_input(
                target, type_rows[NodeType.NEWS], self.xf_params, self.xf_cfg.max_len
            )
        return transformer_forward(
            enc_tokens, dec_tokens, self.xf_params, self.xf_cfg, train=train, rng=rng
        )

    def predict_news(
        self,
        news_id: int,
        sample: NeighborSample,
        tables,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        rep = self.target_representation(news_id, sample, tables, train=train, rng=rng)
        return head_forward(rep, self.head)

    # --- persistence ---

    def save(self, path) -> None:
        save_checkpoint(self.params, path)

    def load(self, path) -> None:
        state = load_checkpoint(path)
        missing = sorted(set(self.params) - set(state))
        extra = sorted(set(state) - set(self.params))
        if missing or extra:
            raise ValueError(f"checkpoint mismatch: missing={missing}, extra={extra}")
        for name, arr in state.items():
            p = self.params[name]
            if arr.shape != p.data.shape:
                raise ShapeMismatch(f"checkpoint {name}: {arr.shape} != {p.data.shape}")
            p.data = arr.astype(self.dtype)

    @classmethod
    def build(
        cls,
        dataset: Dataset,
        content_cfg: ContentConfig | None = None,
        xf_cfg: TransformerConfig | None = None,
        **kwargs,
    ) -> "HetTransformerModel":
        content_cfg = content_cfg or ContentConfig()
        if xf_cfg is None:
            xf_cfg = TransformerConfig(
                model_dim=content_cfg.unified_dim,
                max_len=max(2, dataset.max_sequence_len()),
            )
        return cls(content_cfg, xf_cfg, dataset.attributes_by_type(), **kwargs)
