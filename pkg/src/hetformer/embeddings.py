"""Per-node attribute embedding tables and the HETEMB1 binary format.

Each table holds fixed-length float32 vectors for one (node type, attribute)
pair, e.g. the text vectors of all post nodes. Tables are opaque to the rest
of the pipeline: how the vectors were produced does not matter here.

HETEMB1 layout (little-endian):
    magic  8 bytes  b"HETEMB1\\0"
    count  u32
    dim    u32
    count records of [node_id u64][dim x f32], sorted ascending by node_id
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadMagic, DimMismatch, NonFiniteValue, TruncatedFile
from .graph import NodeType

MAGIC = b"HETEMB1\0"
_HEADER = struct.Struct("<8sII")
_REC_ID = struct.Struct("<Q")


@dataclass(frozen=True)
class AttributeKey:
    node_type: NodeType
    attr_name: str
    dim: int

    def __post_init__(self):
        if self.dim <= 0:
            raise DimMismatch(f"dim must be positive, got {self.dim}")

    @property
    def param_name(self) -> str:
        return f"{self.node_type.value}.{self.attr_name}"


class Missing:
    """Sentinel for absent embeddings (a value, not an error)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Missing"


MISSING = Missing()


@dataclass
class EmbeddingTable:
    key: AttributeKey
    rows: dict[int, np.ndarray] = field(default_factory=dict)

    def put(self, node_id: int, vec) -> None:
        arr = np.asarray(vec, dtype=np.float32)
        if arr.shape != (self.key.dim,):
            raise DimMismatch(
                f"vector for node {node_id} has shape {arr.shape}, expected ({self.key.dim},)"
            )
        if not np.isfinite(arr).all():
            raise NonFiniteValue(f"non-finite embedding for node {node_id}")
        self.rows[node_id] = arr

    def lookup(self, node_id: int):
        return self.rows.get(node_id, MISSING)

    def __len__(self) -> int:
        return len(self.rows)


def lookup(table: EmbeddingTable, node_id: int):
    return table.lookup(node_id)


def write_embeddings(table: EmbeddingTable, path) -> None:
    """Serialize a table; byte-deterministic (rows written ascending by id)."""
    ids = sorted(table.rows)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, len(ids), table.key.dim))
        for node_id in ids:
            fh.write(_REC_ID.pack(node_id))
            fh.write(table.rows[node_id].tobytes())


def load_embeddings(path, key: AttributeKey | None = None) -> EmbeddingTable:
    """Load a HETEMB1 file.

    When ``key`` is omitted, it is derived from the filename stem, expected
    as ``<nodetype>_<attr>`` (e.g. ``news_text.emb``), with the dim taken
    from the header.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedFile(f"{path}: shorter than header")
    magic, count, dim = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if dim <= 0 and count > 0:
        raise DimMismatch(f"{path}: header dim {dim}")
    if key is None:
        key = key_from_filename(path, dim)
    elif key.dim != dim:
        raise DimMismatch(f"{path}: header dim {dim} != expected {key.dim}")

    rec_size = 8 + 4 * dim
    expected = _HEADER.size + count * rec_size
    if len(data) != expected:
        raise TruncatedFile(f"{path}: {len(data)} bytes, expected {expected}")

    table = EmbeddingTable(key=key)
    off = _HEADER.size
    for row in range(count):
        (node_id,) = _REC_ID.unpack_from(data, off)
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=off + 8).copy()
        if not np.isfinite(vec).all():
            raise NonFiniteValue(f"{path}: non-finite value in row {row} (node {node_id})")
        table.rows[node_id] = vec
        off += rec_size
    return table


def key_from_filename(path, dim: int) -> AttributeKey:
    stem = Path(path).stem
    ntype_str, _, attr = stem.partition("_")
    try:
        ntype = NodeType(ntype_str)
    except ValueError:
        raise BadMagic(
            f"{path}: cannot derive attribute key from filename "
            f"(expected '<nodetype>_<attr>' stem)"
        ) from None
    if not attr:
        attr = "default"
    return AttributeKey(node_type=ntype, attr_name=attr, dim=dim)


def load_embedding_dir(emb_dir) -> dict[AttributeKey, EmbeddingTable]:
    """Load every ``*.emb`` file in a directory, keyed by attribute."""
    tables: dict[AttributeKey, EmbeddingTable] = {}
    for path in sorted(Path(emb_dir).glob("*.emb")):
        table = load_embeddings(path)
        tables[table.key] = table
    return tables
