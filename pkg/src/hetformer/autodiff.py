"""Dense tensors with a reverse-mode gradient tape, backed by numpy.

Small by design: 2-D matrices (plus 1-D vectors and 0-D scalars), the op set
the model needs, and strict shapes — broadcasting is limited to a trailing
bias/gain vector over rows. Every forward op verifies its output is finite.

The tape lives implicitly in the ``_parents``/``_backward`` links of each
tensor; ``backward`` runs an iterative topological pass so deep graphs don't
hit the recursion limit.

Checkpoint format HETCKPT1 (little-endian):
    magic  8 bytes  b"HETCKPT1"
    count  u32
    per parameter, lexicographic by name:
        [name_len u16][name utf-8][rank u8][dims u32 x rank][data f32 row-major]
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import (
    IndexOutOfRange,
    NonFiniteGradient,
    NonFiniteValue,
    NotScalar,
    ShapeMismatch,
)

FINITE_CHECKS = True


def _check_finite(arr: np.ndarray, op: str) -> None:
    if FINITE_CHECKS and not np.isfinite(arr).all():
        raise NonFiniteValue(f"non-finite value produced by {op}")


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype)
        elif not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        if self.data.size != 1:
            raise NotScalar(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    __slots__ = ("name",)

    def __init__(self, data, name: str, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def _result(data: np.ndarray, parents, backward, op: str) -> Tensor:
    _check_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


# --- core ops ---

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(g @ b.data.T)
        if b.requires_grad:
            b.accumulate(a.data.T @ g)

    return _result(out_data, (a, b), backward, "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeMismatch(f"transpose on shape {a.shape}")

    def backward(g):
        if a.requires_grad:
            a.accumulate(g.T)

    return _result(a.data.T.copy(), (a,), backward, "transpose")


def _bias_compatible(a: Tensor, b: Tensor) -> bool:
    return b.data.ndim == 1 and a.data.ndim >= 1 and a.shape[-1] == b.shape[0]


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape == b.shape:
        bias = False
    elif _bias_compatible(a, b):
        bias = True
    else:
        raise ShapeMismatch(f"add {a.shape} + {b.shape}")
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(g.reshape(-1, b.shape[0]).sum(axis=0) if bias else g)

    return _result(out_data, (a, b), backward, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, scale(b, -1.0))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape == b.shape:
        bias = False
    elif _bias_compatible(a, b):
        bias = True
    else:
        raise ShapeMismatch(f"mul {a.shape} * {b.shape}")
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * b.data)
        if b.requires_grad:
            gb = g * a.data
            b.accumulate(gb.reshape(-1, b.shape[0]).sum(axis=0) if bias else gb)

    return _result(out_data, (a, b), backward, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * c)

    return _result(a.data * c, (a,), backward, "scale")


def add_const(a: Tensor, c: float) -> Tensor:
    def backward(g):
        if a.requires_grad:
            a.accumulate(g)

    return _result(a.data + float(c), (a,), backward, "add_const")


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * (a.data > 0))

    return _result(out_data, (a,), backward, "relu")


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out_data = out_data.astype(x.dtype, copy=False)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * out_data * (1.0 - out_data))

    return _result(out_data, (a,), backward, "sigmoid")


def log(a: Tensor) -> Tensor:
    with np.errstate(invalid="ignore", divide="ignore"):
        out_data = np.log(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g / a.data)

    return _result(out_data, (a,), backward, "log")


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    out_data = np.clip(a.data, lo, hi)
    passthrough = (a.data > lo) & (a.data < hi)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * passthrough)

    return _result(out_data, (a,), backward, "clamp")


def softmax_rows(a: Tensor) -> Tensor:
    x = a.data
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        if a.requires_grad:
            inner = (g * out_data).sum(axis=-1, keepdims=True)
            a.accumulate((g - inner) * out_data)

    return _result(out_data, (a,), backward, "softmax_rows")


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    n = a.shape[-1]
    if gain.shape != (n,) or bias.shape != (n,):
        raise ShapeMismatch(f"layer_norm affine shapes {gain.shape}/{bias.shape} for dim {n}")
    mu = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mu) * inv
    out_data = xhat * gain.data + bias.data

    def backward(g):
        if bias.requires_grad:
            bias.accumulate(g.reshape(-1, n).sum(axis=0))
        if gain.requires_grad:
            gain.accumulate((g * xhat).reshape(-1, n).sum(axis=0))
        if a.requires_grad:
            dxhat = g * gain.data
            a.accumulate(
                inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                       - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
            )

    return _result(out_data, (a, gain, bias), backward, "layer_norm")


def dropout(a: Tensor, rate: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; exact identity when ``train`` is false or rate is 0."""
    if not train or rate == 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0,1), got {rate}")
    if rng is None:
        raise ValueError("dropout in train mode needs an explicit rng")
    keep = (rng.random(a.shape) >= rate).astype(a.data.dtype) / (1.0 - rate)
    out_data = a.data * keep

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * keep)

    return _result(out_data, (a,), backward, "dropout")


def concat_rows(xs: list[Tensor]) -> Tensor:
    if not xs:
        raise ShapeMismatch("concat_rows of empty list")
    width = xs[0].shape[-1]
    for x in xs:
        if x.data.ndim != 2 or x.shape[-1] != width:
            raise ShapeMismatch(f"concat_rows widths differ: {[x.shape for x in xs]}")
    out_data = np.concatenate([x.data for x in xs], axis=0)

    def backward(g):
        off = 0
        for x in xs:
            m = x.shape[0]
            if x.requires_grad and m:
                x.accumulate(g[off:off + m])
            off += m

    return _result(out_data, tuple(xs), backward, "concat_rows")


def concat_cols(xs: list[Tensor]) -> Tensor:
    if not xs:
        raise ShapeMismatch("concat_cols of empty list")
    rows = xs[0].shape[0]
    for x in xs:
        if x.data.ndim != 2 or x.shape[0] != rows:
            raise ShapeMismatch(f"concat_cols heights differ: {[x.shape for x in xs]}")
    out_data = np.concatenate([x.data for x in xs], axis=1)

    def backward(g):
        off = 0
        for x in xs:
            d = x.shape[1]
            if x.requires_grad and d:
                x.accumulate(g[:, off:off + d])
            off += d

    return _result(out_data, tuple(xs), backward, "concat_cols")


def mean_rows(a: Tensor) -> Tensor:
    if a.data.ndim != 2 or a.shape[0] == 0:
        raise ShapeMismatch(f"mean_rows on shape {a.shape}")
    m = a.shape[0]
    out_data = a.data.mean(axis=0)

    def backward(g):
        if a.requires_grad:
            a.accumulate(np.broadcast_to(g / m, a.shape).copy())

    return _result(out_data, (a,), backward, "mean_rows")


def gather_rows(a: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeMismatch(f"gather_rows index shape {idx.shape}")
    if a.data.ndim != 2:
        raise ShapeMismatch(f"gather_rows on shape {a.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise IndexOutOfRange(f"row index out of range for {a.shape[0]} rows")
    out_data = a.data[idx]

    def backward(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            np.add.at(a.grad, idx, g)

    return _result(out_data, (a,), backward, "gather_rows")


# Table lookup is a row gather whose backward scatters into the table.
embedding_lookup = gather_rows


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    if a.data.ndim != 2 or not (0 <= start <= stop <= a.shape[0]):
        raise IndexOutOfRange(f"slice_rows [{start}:{stop}] on shape {a.shape}")
    out_data = a.data[start:stop].copy()

    def backward(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[start:stop] += g

    return _result(out_data, (a,), backward, "slice_rows")


def sum_all(a: Tensor) -> Tensor:
    def backward(g):
        if a.requires_grad:
            a.accumulate(np.broadcast_to(g, a.shape).copy())

    return _result(np.asarray(a.data.sum()), (a,), backward, "sum_all")


def mean_all(a: Tensor) -> Tensor:
    size = a.data.size

    def backward(g):
        if a.requires_grad:
            a.accumulate(np.broadcast_to(g / size, a.shape).copy())

    return _result(np.asarray(a.data.mean()), (a,), backward, "mean_all")


# --- tape traversal ---

def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate grads of every reachable tensor with requires_grad."""
    if loss.data.size != 1:
        raise NotScalar(f"backward on tensor of shape {loss.shape}")
    order = _topo_order(loss)
    loss.grad = np.ones_like(loss.data)
    leaves = []
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)
        elif node.requires_grad:
            leaves.append(node)
    for leaf in leaves:
        if leaf.grad is not None and not np.isfinite(leaf.grad).all():
            raise NonFiniteGradient("non-finite gradient reached a leaf tensor")


def grad_check(f, params: list[Tensor], eps: float = 1e-5) -> float:
    """Max relative error of tape gradients vs central finite differences.

    ``f`` must rebuild its graph on every call, return a scalar tensor, and
    be deterministic (fix any dropout masks or run in eval mode).
    """
    for p in params:
        p.zero_grad()
    loss = f()
    backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    for p in params:
        p.zero_grad()

    worst = 0.0
    for p, an in zip(params, analytic):
        flat = p.data.reshape(-1)
        an_flat = an.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f().item()
            flat[i] = orig - eps
            down = f().item()
            flat[i] = orig
            fd = (up - down) / (2.0 * eps)
            rel = abs(fd - an_flat[i]) / max(abs(fd), abs(an_flat[i]), 1e-6)
            worst = max(worst, float(rel))
    return worst


# --- parameter init & checkpoints ---

def xavier_uniform(shape, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    fan_in = shape[0] if len(shape) > 1 else shape[0]
    fan_out = shape[1] if len(shape) > 1 else shape[0]
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


CKPT_MAGIC = b"HETCKPT1"


def save_checkpoint(params: dict[str, Parameter], path) -> None:
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<I", len(params)))
        for name in sorted(params):
            p = params[name]
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", p.data.ndim))
            for dim in p.data.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:8] != CKPT_MAGIC:
        raise ValueError(f"{path}: not a HETCKPT1 checkpoint")
    (count,) = struct.unpack_from("<I", data, 8)
    off = 12
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off:off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<B", data, off)
        off += 1
        dims = struct.unpack_from(f"<{rank}I", data, off) if rank else ()
        off += 4 * rank
        n = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=off).reshape(dims).copy()
        off += 4 * n
        out[name] = arr
    return out
