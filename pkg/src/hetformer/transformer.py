"""Encoder-decoder Transformer over propagation neighborhoods.

The encoder ingests the target news token followed by every sampled
neighbor in walk-frequency rank order (types interleaved as sampled, so the
propagation pattern survives); the decoder ingests the target plus its
news-type neighbors only and cross-attends to the encoder output. The
decoder's position-0 output is the aggregated target representation.

Both sequences add learned positional and type embeddings on top of the
content rows. Attention is never causal: the whole neighborhood is given at
once and only position 0 is ever read out. Padding is expressed as additive
key-logit bias, so padded positions cannot influence any real position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .content import MultiHeadBlock, multi_head_attention
from .errors import LengthOverflow
from .graph import NodeType
from .rwr import NeighborSample

# token type-ids: 0 reserved for the target slot, then one per node type
TYPE_TARGET = 0
TYPE_OF_NODE = {t: t.code + 1 for t in NodeType}
NUM_TOKEN_TYPES = 4

MASK_BIAS = -1e9


@dataclass
class TransformerConfig:
    layers: int = 1
    heads: int = 4
    model_dim: int = 32
    ff_dim: int | None = None
    dropout: float = 0.1
    max_len: int = 64

    def __post_init__(self):
        if self.model_dim % self.heads != 0:
            raise ValueError(f"model_dim {self.model_dim} not divisible by heads {self.heads}")
        if self.ff_dim is None:
            self.ff_dim = 4 * self.model_dim


@dataclass
class NormParams:
    gain: Parameter
    bias: Parameter


@dataclass
class FeedForwardParams:
    w1: Parameter
    b1: Parameter
    w2: Parameter
    b2: Parameter


@dataclass
class EncoderLayerParams:
    self_attn: MultiHeadBlock
    norm1: NormParams
    norm2: NormParams
    ffn: FeedForwardParams


@dataclass
class DecoderLayerParams:
    self_attn: MultiHeadBlock
    cross_attn: MultiHeadBlock
    norm1: NormParams
    norm2: NormParams
    norm3: NormParams
    ffn: FeedForwardParams


@dataclass
class TransformerParams:
    enc_layers: list[EncoderLayerParams]
    enc_norm: NormParams
    dec_layers: list[DecoderLayerParams]  # empty when the decoder is ablated
    dec_norm: NormParams | None
    pos_table: Parameter | None  # None when positional embeddings are ablated
    type_table: Parameter


def pad_bias(pad: np.ndarray | None, dtype) -> Tensor | None:
    """Turn a boolean padding mask (True = padded) into additive key logits."""
    if pad is None or not pad.any():
        return None
    return Tensor(np.where(pad, MASK_BIAS, 0.0).astype(dtype))


def _with_pos_and_type(tokens: Tensor, type_ids: np.ndarray, params: TransformerParams) -> Tensor:
    n = tokens.shape[0]
    if params.pos_table is not None:
        tokens = ad.add(tokens, ad.embedding_lookup(params.pos_table, np.arange(n)))
    tokens = ad.add(tokens, ad.embedding_lookup(params.type_table, type_ids))
    return tokens


def build_enc_input(
    target: Tensor,
    type_rows: dict[NodeType, Tensor],
    sample: NeighborSample,
    params: TransformerParams,
    max_len: int,
) -> Tensor:
    """Encoder token sequence: target first, then all ranked neighbors.

    ``type_rows[k]`` holds the content rows of type-k neighbors in their
    partition (rank) order; rows are re-interleaved here to follow the full
    ranked order of the sample.
    """
    length = sample.l + 1
    if length > max_len:
        raise LengthOverflow(f"encoder sequence {length} exceeds max length {max_len}")
    stacked = ad.concat_rows(
        [target] + [type_rows[t] for t in NodeType]
    )
    offsets = {}
    base = 1
    for t in NodeType:
        offsets[t] = base
        base += type_rows[t].shape[0]
    idx = np.zeros(length, dtype=np.int64)
    type_ids = np.zeros(length, dtype=np.int64)
    type_ids[0] = TYPE_TARGET
    counters = {t: 0 for t in NodeType}
    for pos, (_, ntype, _) in enumerate(sample.ranked, start=1):
        idx[pos] = offsets[ntype] + counters[ntype]
        counters[ntype] += 1
        type_ids[pos] = TYPE_OF_NODE[ntype]
    tokens = ad.gather_rows(stacked, idx)
    return _with_pos_and_type(tokens, type_ids, params)


def build_dec_input(
    target: Tensor,
    news_rows: Tensor,
    params: TransformerParams,
    max_len: int,
) -> Tensor:
    """Decoder token sequence: target then news-type neighbors in rank order.

    Every decoder token carries the news type embedding.
    """
    length = news_rows.shape[0] + 1
    if length > max_len:
        raise LengthOverflow(f"decoder sequence {length} exceeds max length {max_len}")
    tokens = ad.concat_rows([target, news_rows]) if news_rows.shape[0] else target
    type_ids = np.full(length, TYPE_OF_NODE[NodeType.NEWS], dtype=np.int64)
    return _with_pos_and_type(tokens, type_ids, params)


def _feed_forward(x: Tensor, ffn: FeedForwardParams) -> Tensor:
    h = ad.relu(ad.add(ad.matmul(x, ffn.w1), ffn.b1))
    return ad.add(ad.matmul(h, ffn.w2), ffn.b2)


def _encoder_layer(x, lp: EncoderLayerParams, key_bias, cfg, train, rng):
    h = ad.layer_norm(x, lp.norm1.gain, lp.norm1.bias)
    a = multi_head_attention(h, h, lp.self_attn, key_bias)
    x = ad.add(x, ad.dropout(a, cfg.dropout, train, rng))
    h = ad.layer_norm(x, lp.norm2.gain, lp.norm2.bias)
    f = _feed_forward(h, lp.ffn)
    return ad.add(x, ad.dropout(f, cfg.dropout, train, rng))


def _decoder_layer(x, memory, lp: DecoderLayerParams, dec_bias, enc_bias, cfg, train, rng):
    h = ad.layer_norm(x, lp.norm1.gain, lp.norm1.bias)
    a = multi_head_attention(h, h, lp.self_attn, dec_bias)
    x = ad.add(x, ad.dropout(a, cfg.dropout, train, rng))
    h = ad.layer_norm(x, lp.norm2.gain, lp.norm2.bias)
    a = multi_head_attention(h, memory, lp.cross_attn, enc_bias)
    x = ad.add(x, ad.dropout(a, cfg.dropout, train, rng))
    h = ad.layer_norm(x, lp.norm3.gain, lp.norm3.bias)
    f = _feed_forward(h, lp.ffn)
    return ad.add(x, ad.dropout(f, cfg.dropout, train, rng))


def transformer_forward(
    enc_tokens: Tensor,
    dec_tokens: Tensor | None,
    params: TransformerParams,
    cfg: TransformerConfig,
    enc_pad: np.ndarray | None = None,
    dec_pad: np.ndarray | None = None,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Run the encoder (and decoder, unless ablated); return the position-0
    representation [1 x d]."""
    dtype = enc_tokens.dtype
    enc_bias = pad_bias(enc_pad, dtype)
    x = enc_tokens
    for lp in params.enc_layers:
        x = _encoder_layer(x, lp, enc_bias, cfg, train, rng)
    memory = ad.layer_norm(x, params.enc_norm.gain, params.enc_norm.bias)

    if not params.dec_layers:
        return ad.slice_rows(memory, 0, 1)

    dec_bias = pad_bias(dec_pad, dtype)
    y = dec_tokens
    for lp in params.dec_layers:
        y = _decoder_layer(y, memory, lp, dec_bias, enc_bias, cfg, train, rng)
    y = ad.layer_norm(y, params.dec_norm.gain, params.dec_norm.bias)
    return ad.slice_rows(y, 0, 1)


def build_transformer_params(
    cfg: TransformerConfig,
    register,
    rng: np.random.Generator,
    ablate_decoder: bool = False,
    ablate_positional: bool = False,
    dtype=np.float32,
) -> TransformerParams:
    d = cfg.model_dim
    dk = d // cfg.heads

    def weight(name, shape):
        p = Parameter(ad.xavier_uniform(shape, rng, dtype=dtype), name=name)
        register(p)
        return p

    def zeros(name, shape):
        p = Parameter(np.zeros(shape, dtype=dtype), name=name)
        register(p)
        return p

    def norm(prefix):
        gain = Parameter(np.ones(d, dtype=dtype), name=f"{prefix}.gain")
        register(gain)
        return NormParams(gain=gain, bias=zeros(f"{prefix}.bias", (d,)))

    def attn(prefix):
        heads = [
            (
                weight(f"{prefix}.h{i}.q", (d, dk)),
                weight(f"{prefix}.h{i}.k", (d, dk)),
                weight(f"{prefix}.h{i}.v", (d, dk)),
            )
            for i in range(cfg.heads)
        ]
        return MultiHeadBlock(heads=heads, wo=weight(f"{prefix}.o", (d, d)))

    def ffn(prefix):
        return FeedForwardParams(
            w1=weight(f"{prefix}.w1", (d, cfg.ff_dim)),
            b1=zeros(f"{prefix}.b1", (cfg.ff_dim,)),
            w2=weight(f"{prefix}.w2", (cfg.ff_dim, d)),
            b2=zeros(f"{prefix}.b2", (d,)),
        )

    enc_layers = [
        EncoderLayerParams(
            self_attn=attn(f"xf.enc.layer{j}.self"),
            norm1=norm(f"xf.enc.layer{j}.norm1"),
            norm2=norm(f"xf.enc.layer{j}.norm2"),
            ffn=ffn(f"xf.enc.layer{j}.ffn"),
        )
        for j in range(cfg.layers)
    ]
    enc_norm = norm("xf.enc.norm")

    dec_layers = []
    dec_norm = None
    if not ablate_decoder:
        dec_layers = [
            DecoderLayerParams(
                self_attn=attn(f"xf.dec.layer{j}.self"),
                cross_attn=attn(f"xf.dec.layer{j}.cross"),
                norm1=norm(f"xf.dec.layer{j}.norm1"),
                norm2=norm(f"xf.dec.layer{j}.norm2"),
                norm3=norm(f"xf.dec.layer{j}.norm3"),
                ffn=ffn(f"xf.dec.layer{j}.ffn"),
            )
            for j in range(cfg.layers)
        ]
        dec_norm = norm("xf.dec.norm")

    pos_table = None
    if not ablate_positional:
        pos_table = Parameter(
            (rng.normal(0.0, 0.02, size=(cfg.max_len, d))).astype(dtype), name="xf.pos"
        )
        register(pos_table)
    type_table = Parameter(
        (rng.normal(0.0, 0.02, size=(NUM_TOKEN_TYPES, d))).astype(dtype), name="xf.type"
    )
    register(type_table)

    return TransformerParams(
        enc_layers=enc_layers,
        enc_norm=enc_norm,
        dec_layers=dec_layers,
        dec_norm=dec_norm,
        pos_table=pos_table,
        type_table=type_table,
    )
