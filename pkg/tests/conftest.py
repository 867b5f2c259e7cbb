import numpy as np
import pytest

from hetformer.graph import EdgeType, HetGraph, NodeType, load_graph

# edge type implied by an unordered node-type pair
_ETYPE_OF_PAIR = {
    frozenset({NodeType.NEWS, NodeType.POST}): EdgeType.NEWS_POST,
    frozenset({NodeType.NEWS, NodeType.USER}): EdgeType.NEWS_USER,
    frozenset({NodeType.POST, NodeType.USER}): EdgeType.POST_USER,
    frozenset({NodeType.POST}): EdgeType.POST_POST,
    frozenset({NodeType.USER}): EdgeType.USER_USER,
}


def etype_for(ta: NodeType, tb: NodeType) -> EdgeType | None:
    return _ETYPE_OF_PAIR.get(frozenset({ta, tb}))


def build_graph(node_types: dict[int, str], edges, labels=None) -> HetGraph:
    """Assemble a HetGraph directly; edge types inferred from endpoints."""
    nodes = {i: NodeType(t) for i, t in node_types.items()}
    adjacency = {v: [] for v in nodes}
    for a, b in edges:
        et = etype_for(nodes[a], nodes[b])
        assert et is not None, f"no relation joins {nodes[a]} and {nodes[b]}"
        adjacency[a].append((b, et))
        adjacency[b].append((a, et))
    for v in adjacency:
        adjacency[v].sort(key=lambda p: (p[0], p[1].value))
    return HetGraph(nodes=nodes, labels=dict(labels or {}), adjacency=adjacency)


def random_typed_graph(n_nodes: int, seed: int, extra_edges: int = 0) -> HetGraph:
    """Random connected typed graph (spanning tree + extras), schema-legal."""
    rng = np.random.default_rng(seed)
    types = {}
    types[0] = NodeType.NEWS
    choices = [NodeType.NEWS, NodeType.POST, NodeType.USER]
    for i in range(1, n_nodes):
        types[i] = choices[int(rng.integers(3))]
    edges = set()

    def can_join(a, b):
        return a != b and etype_for(types[a], types[b]) is not None

    # spanning construction: attach each node to some earlier compatible node
    for i in range(1, n_nodes):
        candidates = [j for j in range(i) if can_join(i, j)]
        if not candidates:
            # flip type to post, which joins everything except news-news
            types[i] = NodeType.POST
            candidates = [j for j in range(i) if can_join(i, j)]
        j = candidates[int(rng.integers(len(candidates)))]
        edges.add((min(i, j), max(i, j)))
    for _ in range(extra_edges):
        a, b = int(rng.integers(n_nodes)), int(rng.integers(n_nodes))
        if can_join(a, b):
            edges.add((min(a, b), max(a, b)))

    labels = {i: int(rng.integers(2)) for i, t in types.items() if t is NodeType.NEWS}
    return build_graph({i: t.value for i, t in types.items()}, sorted(edges), labels)


@pytest.fixture
def path_graph():
    """A(news 0) - B(post 1) - C(user 2)."""
    return build_graph({0: "news", 1: "post", 2: "user"}, [(0, 1), (1, 2)], labels={0: 0})


def write_graph_files(tmp_path, nodes_text: str, edges_text: str):
    nodes = tmp_path / "nodes.tsv"
    edges = tmp_path / "edges.tsv"
    nodes.write_text(nodes_text)
    edges.write_text(edges_text)
    return nodes, edges


def load_from_text(tmp_path, nodes_text, edges_text, schema="fakenewsnet"):
    nodes, edges = write_graph_files(tmp_path, nodes_text, edges_text)
    return load_graph(nodes, edges, schema=schema)
