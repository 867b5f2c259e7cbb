"""Random walk with restart (RWR) neighbor sampling.

For every news root the walk runs a fixed number of iterations; each
iteration first jumps back to the root with the restart probability, then
steps to a uniformly random neighbor of the current node and records it.
The root itself may be recorded (it is somebody's neighbor) but is dropped
from the final ranked list: the top-gamma remaining nodes, ordered by visit
frequency, form the sample. Ties break on first-visit iteration, then id,
so identical (graph, root, seed) always yields an identical sample.

``rwr_oracle`` is the independent check: it power-iterates the recorded
chain's transition matrix to its stationary distribution, against which the
empirical frequencies must converge.

Cache format HETRWR1 (little-endian):
    magic  8 bytes  b"HETRWR1\\0"
    count  u32      number of news roots
    per root: [root u64][l u16] then l x [node u64][type u8][freq u32]
"""

from __future__ import annotations

import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NoNeighbors, NotANewsNode
from .graph import NODE_TYPE_BY_CODE, HetGraph, NodeType

MAGIC = b"HETRWR1\0"
_M64 = (1 << 64) - 1


@dataclass(frozen=True)
class WalkConfig:
    restart_p: float = 0.5
    iterations: int = 10_000
    top_gamma: int = 15
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.restart_p <= 1.0:
            raise ValueError(f"restart_p must be in [0,1], got {self.restart_p}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.top_gamma < 1:
            raise ValueError("top_gamma must be >= 1")


@dataclass
class NeighborSample:
    """Top-gamma ranked neighbors of one news root, partitioned by type."""

    root: int
    ranked: list[tuple[int, NodeType, int]]  # (node id, type, visit count)
    partitions: dict[NodeType, list[int]] = field(init=False)

    def __post_init__(self):
        parts: dict[NodeType, list[int]] = {t: [] for t in NodeType}
        for node_id, ntype, _ in self.ranked:
            parts[ntype].append(node_id)
        self.partitions = parts

    @property
    def l(self) -> int:
        return len(self.ranked)

    @property
    def m_n(self) -> int:
        return len(self.partitions[NodeType.NEWS])

    @property
    def m_p(self) -> int:
        return len(self.partitions[NodeType.POST])

    @property
    def m_u(self) -> int:
        return len(self.partitions[NodeType.USER])

    def ids_of_type(self, ntype: NodeType) -> list[int]:
        return self.partitions[ntype]

    @classmethod
    def empty(cls, root: int) -> "NeighborSample":
        return cls(root=root, ranked=[])


def mix_seed(seed: int, root: int) -> int:
    """Stable 64-bit mix of (global seed, root id); splitmix64 finalizer."""
    x = (seed ^ (root * 0x9E3779B97F4A7C15)) & _M64
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return (x ^ (x >> 31)) & _M64


def sort_most_frequent(
    counts: dict[int, int], gamma: int, first_visit: dict[int, int] | None = None
) -> list[int]:
    """Top-gamma node ids by (count desc, first-visit asc, id asc)."""
    if first_visit is None:
        first_visit = {}
    order = sorted(counts, key=lambda v: (-counts[v], first_visit.get(v, 0), v))
    return order[: min(gamma, len(order))]


def sample_neighbors(g: HetGraph, root: int, cfg: WalkConfig) -> NeighborSample:
    if g.node_type(root) is not NodeType.NEWS:
        raise NotANewsNode(root)
    adj = g._plain_adj
    if not adj.get(root):
        return NeighborSample.empty(root)

    rng = np.random.Generator(np.random.PCG64(mix_seed(cfg.seed, root)))
    T = cfg.iterations
    restarts = rng.random(T).tolist()
    picks = rng.random(T).tolist()
    p = cfg.restart_p

    counts: dict[int, int] = {}
    first: dict[int, int] = {}
    v = root
    for t in range(T):
        if restarts[t] < p:
            v = root
        nbrs = adj[v]
        w = nbrs[int(picks[t] * len(nbrs))]
        c = counts.get(w, 0)
        if c == 0:
            first[w] = t
        counts[w] = c + 1
        v = w

    counts.pop(root, None)  # the root is not its own neighbor
    kept = sort_most_frequent(counts, cfg.top_gamma, first)
    ranked = [(w, g.nodes[w], counts[w]) for w in kept]
    return NeighborSample(root=root, ranked=ranked)


def rwr_oracle(g: HetGraph, root: int, restart_p: float) -> dict[int, float]:
    """Stationary distribution of the recorded-node chain, root excluded.

    Dense power iteration on the half-lazy chain (same stationary vector,
    guaranteed aperiodic) until the L1 residual drops below 1e-12. The
    returned probabilities cover every non-root node in the root's
    component and sum to 1.
    """
    adj = g._plain_adj
    if not adj.get(root):
        raise NoNeighbors(root)

    # nodes reachable from root
    component = [root]
    seen = {root}
    stack = [root]
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if u not in seen:
                seen.add(u)
                component.append(u)
                stack.append(u)
    component.sort()
    index = {v: i for i, v in enumerate(component)}
    n = len(component)

    P = np.zeros((n, n), dtype=np.float64)
    root_step = np.zeros(n, dtype=np.float64)
    for u in adj[root]:
        root_step[index[u]] = 1.0 / len(adj[root])
    for v in component:
        i = index[v]
        own = np.zeros(n, dtype=np.float64)
        for u in adj[v]:
            own[index[u]] = 1.0 / len(adj[v])
        P[i] = restart_p * root_step + (1.0 - restart_p) * own

    Q = 0.5 * np.eye(n) + 0.5 * P
    pi = np.full(n, 1.0 / n)
    for _ in range(1_000_000):
        nxt = pi @ Q
        if np.abs(nxt - pi).sum() < 1e-12:
            pi = nxt
            break
        pi = nxt
    pi = pi / pi.sum()

    out = {v: float(pi[index[v]]) for v in component if v != root}
    total = sum(out.values())
    return {v: p / total for v, p in out.items()}


# --- parallel sampling over all news roots ---

_POOL_GRAPH: HetGraph | None = None
_POOL_CFG: WalkConfig | None = None


def _pool_init(graph: HetGraph, cfg: WalkConfig) -> None:
    global _POOL_GRAPH, _POOL_CFG
    _POOL_GRAPH = graph
    _POOL_CFG = cfg


def _pool_task(roots: list[int]) -> list[tuple[int, NeighborSample]]:
    return [(r, sample_neighbors(_POOL_GRAPH, r, _POOL_CFG)) for r in roots]


def sample_all(
    g: HetGraph, cfg: WalkConfig, workers: int = 1, cache_path=None
) -> dict[int, NeighborSample]:
    """Sample every news root; independent of ``workers`` by construction.

    Each root derives its own RNG stream from (cfg.seed, root id), so the
    partition of roots across processes cannot change any result.
    """
    roots = g.news_ids()
    if workers <= 1 or len(roots) < 2:
        samples = {r: sample_neighbors(g, r, cfg) for r in roots}
    else:
        chunks = [roots[i::workers] for i in range(workers)]
        samples = {}
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_pool_init, initargs=(g, cfg)
        ) as pool:
            for part in pool.map(_pool_task, chunks):
                samples.update(part)
    if cache_path is not None:
        write_sample_cache(samples, cache_path)
    return samples


def write_sample_cache(samples: dict[int, NeighborSample], path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(samples)))
        for root in sorted(samples):
            s = samples[root]
            fh.write(struct.pack("<QH", root, s.l))
            for node_id, ntype, freq in s.ranked:
                fh.write(struct.pack("<QBI", node_id, ntype.code, freq))


def load_sample_cache(path) -> dict[int, NeighborSample]:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:8] != MAGIC:
        raise ValueError(f"{path}: not a HETRWR1 cache")
    (count,) = struct.unpack_from("<I", data, 8)
    off = 12
    samples: dict[int, NeighborSample] = {}
    for _ in range(count):
        root, l = struct.unpack_from("<QH", data, off)
        off += 10
        ranked = []
        for _ in range(l):
            node_id, code, freq = struct.unpack_from("<QBI", data, off)
            off += 13
            ranked.append((node_id, NODE_TYPE_BY_CODE[code], freq))
        samples[root] = NeighborSample(root=root, ranked=ranked)
    if off != len(data):
        raise ValueError(f"{path}: trailing bytes in cache")
    return samples
