"""Typed heterogeneous graph over news, post, and user nodes.

Graphs are loaded from a pair of TSV files (``nodes.tsv``, ``edges.tsv``),
validated against a dataset schema, and frozen afterwards: all queries are
read-only, so a loaded graph can be shared freely across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import (
    DanglingEdge,
    DuplicateEdge,
    DuplicateNode,
    MalformedLine,
    SelfLoopEdge,
    TypeMismatch,
    UnknownNode,
    UnknownNodeType,
)

LABEL_FAKE = 0
LABEL_REAL = 1


class NodeType(Enum):
    NEWS = "news"
    POST = "post"
    USER = "user"

    @property
    def code(self) -> int:
        return _TYPE_CODES[self]

    @classmethod
    def parse(cls, text: str) -> "NodeType":
        try:
            return cls(text)
        except ValueError:
            raise UnknownNodeType(f"unknown node type {text!r}") from None


_TYPE_CODES = {NodeType.NEWS: 0, NodeType.POST: 1, NodeType.USER: 2}
NODE_TYPE_BY_CODE = {t.code: t for t in NodeType}


class EdgeType(Enum):
    NEWS_POST = "np"
    NEWS_USER = "nu"
    POST_USER = "pu"
    POST_POST = "pp"
    USER_USER = "uu"

    @property
    def endpoint_types(self) -> tuple[NodeType, NodeType]:
        return _EDGE_ENDPOINTS[self]


_EDGE_ENDPOINTS = {
    EdgeType.NEWS_POST: (NodeType.NEWS, NodeType.POST),
    EdgeType.NEWS_USER: (NodeType.NEWS, NodeType.USER),
    EdgeType.POST_USER: (NodeType.POST, NodeType.USER),
    EdgeType.POST_POST: (NodeType.POST, NodeType.POST),
    EdgeType.USER_USER: (NodeType.USER, NodeType.USER),
}

# Which relation kinds a dataset family may contain. PHEME has no
# user-user "follow" relation, so its schema rejects `uu` edges outright.
SCHEMAS: dict[str, frozenset[EdgeType]] = {
    "fakenewsnet": frozenset(EdgeType),
    "pheme": frozenset(
        {EdgeType.NEWS_POST, EdgeType.POST_POST, EdgeType.NEWS_USER, EdgeType.POST_USER}
    ),
}


@dataclass
class GraphStats:
    node_counts: dict[str, int]
    edge_counts: dict[str, int]
    n_fake: int
    n_real: int
    n_news: int

    def as_dict(self) -> dict:
        return {
            "nodes": dict(self.node_counts),
            "edges": dict(self.edge_counts),
            "fake_news": self.n_fake,
            "real_news": self.n_real,
            "total_news": self.n_news,
        }


@dataclass
class HetGraph:
    """Immutable-after-load heterogeneous graph.

    ``adjacency`` stores each undirected edge in both directions; every
    per-node list is sorted by neighbor id so traversal order is
    deterministic regardless of input file order.
    """

    nodes: dict[int, NodeType]
    labels: dict[int, int]
    adjacency: dict[int, list[tuple[int, EdgeType]]]
    schema: str = "fakenewsnet"
    string_ids: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        # id-only neighbor lists, kept alongside the typed adjacency to keep
        # the random-walk hot loop free of tuple unpacking
        self._plain_adj: dict[int, list[int]] = {
            v: [u for u, _ in nbrs] for v, nbrs in self.adjacency.items()
        }

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.nodes

    def node_type(self, v: int) -> NodeType:
        try:
            return self.nodes[v]
        except KeyError:
            raise UnknownNode(v) from None

    def neighbors(self, v: int) -> list[tuple[int, EdgeType]]:
        if v not in self.nodes:
            raise UnknownNode(v)
        return self.adjacency.get(v, [])

    def neighbor_ids(self, v: int) -> list[int]:
        if v not in self.nodes:
            raise UnknownNode(v)
        return self._plain_adj.get(v, [])

    def news_ids(self) -> list[int]:
        return sorted(v for v, t in self.nodes.items() if t is NodeType.NEWS)

    def labeled_news_ids(self) -> list[int]:
        return sorted(self.labels)

    def edge_set(self) -> set[tuple[int, int, EdgeType]]:
        """Canonical undirected edge triples (each edge exactly once)."""
        out = set()
        for v, nbrs in self.adjacency.items():
            for u, et in nbrs:
                out.add(_canonical_edge(v, u, et, self.nodes))
        return out

    def stats(self) -> GraphStats:
        node_counts = {t.value: 0 for t in NodeType}
        for t in self.nodes.values():
            node_counts[t.value] += 1
        edge_counts = {e.value: 0 for e in EdgeType}
        for _, _, et in self.edge_set():
            edge_counts[et.value] += 1
        n_fake = sum(1 for y in self.labels.values() if y == LABEL_FAKE)
        n_real = sum(1 for y in self.labels.values() if y == LABEL_REAL)
        return GraphStats(
            node_counts=node_counts,
            edge_counts=edge_counts,
            n_fake=n_fake,
            n_real=n_real,
            n_news=node_counts[NodeType.NEWS.value],
        )

    def same_graph(self, other: "HetGraph") -> bool:
        return (
            self.nodes == other.nodes
            and self.labels == other.labels
            and self.edge_set() == other.edge_set()
        )


def _canonical_edge(a: int, b: int, et: EdgeType, nodes) -> tuple[int, int, EdgeType]:
    ta, tb = et.endpoint_types
    if ta is tb:
        return (min(a, b), max(a, b), et)
    return (a, b, et) if nodes[a] is ta else (b, a, et)


def _iter_tsv(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def load_graph(nodes_path, edges_path, schema: str = "fakenewsnet") -> HetGraph:
    """Load and validate a graph from ``nodes.tsv`` + ``edges.tsv``.

    Raises a :class:`~hetformer.errors.GraphFormatError` subclass on the
    first violation: malformed lines, unknown types, duplicate nodes/edges,
    dangling endpoints, self loops, or edges whose endpoint types do not
    match the declared relation (including relations the schema forbids).
    """
    if schema not in SCHEMAS:
        raise UnknownNodeType(f"unknown schema {schema!r}")
    allowed = SCHEMAS[schema]

    nodes: dict[int, NodeType] = {}
    labels: dict[int, int] = {}
    for lineno, line in _iter_tsv(nodes_path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise MalformedLine(nodes_path, lineno, f"expected 3 fields, got {len(parts)}")
        raw_id, raw_type, raw_label = parts
        try:
            node_id = int(raw_id)
        except ValueError:
            raise MalformedLine(nodes_path, lineno, f"bad node id {raw_id!r}") from None
        if node_id < 0:
            raise MalformedLine(nodes_path, lineno, f"negative node id {node_id}")
        ntype = NodeType.parse(raw_type)
        if node_id in nodes:
            raise DuplicateNode(node_id)
        nodes[node_id] = ntype
        if raw_label == "-":
            continue
        if ntype is not NodeType.NEWS:
            raise MalformedLine(nodes_path, lineno, f"label on non-news node {node_id}")
        if raw_label not in ("0", "1"):
            raise MalformedLine(nodes_path, lineno, f"bad label {raw_label!r}")
        labels[node_id] = int(raw_label)

    adjacency: dict[int, list[tuple[int, EdgeType]]] = {v: [] for v in nodes}
    seen: set[tuple[int, int, EdgeType]] = set()
    for lineno, line in _iter_tsv(edges_path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise MalformedLine(edges_path, lineno, f"expected 3 fields, got {len(parts)}")
        raw_src, raw_dst, raw_et = parts
        try:
            src, dst = int(raw_src), int(raw_dst)
        except ValueError:
            raise MalformedLine(edges_path, lineno, "bad endpoint id") from None
        try:
            et = EdgeType(raw_et)
        except ValueError:
            raise MalformedLine(edges_path, lineno, f"unknown edge type {raw_et!r}") from None
        if et not in allowed:
            raise TypeMismatch(f"edge type {et.value!r} not allowed by schema {schema!r}")
        for endpoint in (src, dst):
            if endpoint not in nodes:
                raise DanglingEdge(endpoint)
        if src == dst:
            raise SelfLoopEdge(f"self loop on node {src}")
        got = (nodes[src], nodes[dst])
        ta, tb = et.endpoint_types
        if {got[0], got[1]} != {ta, tb} or (ta is tb and (got[0] is not ta or got[1] is not tb)):
            raise TypeMismatch(
                f"{et.value} edge joins {got[0].value}-{got[1].value} "
                f"(expected {ta.value}-{tb.value})"
            )
        key = _canonical_edge(src, dst, et, nodes)
        if key in seen:
            raise DuplicateEdge(f"duplicate edge {src}-{dst} ({et.value})")
        seen.add(key)
        adjacency[src].append((dst, et))
        adjacency[dst].append((src, et))

    for v in adjacency:
        adjacency[v].sort(key=lambda pair: (pair[0], pair[1].value))
    return HetGraph(nodes=nodes, labels=labels, adjacency=adjacency, schema=schema)


def save_graph(g: HetGraph, nodes_path, edges_path) -> None:
    """Write a graph back to TSV in canonical (sorted) order."""
    with open(nodes_path, "w", encoding="utf-8") as fh:
        for v in sorted(g.nodes):
            label = str(g.labels[v]) if v in g.labels else "-"
            fh.write(f"{v}\t{g.nodes[v].value}\t{label}\n")
    with open(edges_path, "w", encoding="utf-8") as fh:
        for a, b, et in sorted(g.edge_set(), key=lambda e: (e[2].value, e[0], e[1])):
            fh.write(f"{a}\t{b}\t{et.value}\n")


def load_graph_dir(graph_dir, schema: str | None = None) -> HetGraph:
    """Load ``nodes.tsv``/``edges.tsv`` from a directory.

    The schema may come from an optional ``meta.json`` ({"schema": ...});
    an explicit argument wins. A ``ids.tsv`` sidecar (``<id>\\t<string>``)
    is kept for provenance only.
    """
    graph_dir = Path(graph_dir)
    if schema is None:
        meta = graph_dir / "meta.json"
        if meta.exists():
            schema = json.loads(meta.read_text()).get("schema", "fakenewsnet")
        else:
            schema = "fakenewsnet"
    g = load_graph(graph_dir / "nodes.tsv", graph_dir / "edges.tsv", schema=schema)
    sidecar = graph_dir / "ids.tsv"
    if sidecar.exists():
        for _, line in _iter_tsv(sidecar):
            parts = line.split("\t")
            if len(parts) == 2:
                g.string_ids[int(parts[0])] = parts[1]
    return g


def save_graph_dir(g: HetGraph, graph_dir) -> None:
    graph_dir = Path(graph_dir)
    graph_dir.mkdir(parents=True, exist_ok=True)
    save_graph(g, graph_dir / "nodes.tsv", graph_dir / "edges.tsv")
    (graph_dir / "meta.json").write_text(json.dumps({"schema": g.schema}) + "\n")
    if g.string_ids:
        with open(graph_dir / "ids.tsv", "w", encoding="utf-8") as fh:
            for v in sorted(g.string_ids):
                fh.write(f"{v}\t{g.string_ids[v]}\n")
