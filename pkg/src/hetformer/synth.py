"""Synthetic heterogeneous graphs with a planted, tunable label signal.

Two user communities anchor the structure: fake news is preferentially
wired (strength ``community_strength``) into community A through its posts
and engaging users, real news into community B, so news sharing a
neighborhood tends to share a label. Content carries an independent signal:
every attribute vector is a class- (or community-) conditioned Gaussian
mean, scaled by the signal strength, plus unit noise.

``content_free_variant`` zeroes the news-content signal so that only the
wiring (via community-flavored post/user attributes) can separate the
classes; ambient users form an uninformative crowd that pads the far tail
of sampled neighborhoods.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import AttributeKey, EmbeddingTable, write_embeddings
from .graph import EdgeType, HetGraph, NodeType, save_graph_dir

COMM_A = 0
COMM_B = 1
COMM_NONE = 2  # ambient pool, no community flavor


@dataclass(frozen=True)
class SynthConfig:
    news_count: int = 200
    fake_fraction: float = 0.4
    posts_per_news: float = 3.0      # Poisson mean, at least one post per news
    users_per_post: int = 2
    ambient_users_per_post: int = 0
    users_per_community: int = 100
    ambient_user_pool: int = 0
    community_strength: float = 1.0  # 0 = uniform wiring, 1 = strict home community
    news_signal: float = 1.0
    neighbor_signal: float | None = None  # user attrs; defaults to news_signal
    post_signal: float | None = None      # post attrs; defaults to neighbor_signal
    news_dim: int = 32
    post_dim: int = 32
    user_dim: int = 32
    repost_prob: float = 0.3
    follow_edges_per_user: float = 0.0
    signal_scale: float = 3.0
    schema: str = "fakenewsnet"
    seed: int = 0

    def resolved_neighbor_signal(self) -> float:
        return self.news_signal if self.neighbor_signal is None else self.neighbor_signal

    def resolved_post_signal(self) -> float:
        return self.resolved_neighbor_signal() if self.post_signal is None else self.post_signal


def content_free_variant(cfg: SynthConfig) -> SynthConfig:
    """Same wiring; news content is pure noise, neighbors stay informative."""
    return dataclasses.replace(
        cfg,
        news_signal=0.0,
        neighbor_signal=cfg.resolved_neighbor_signal() or 1.0,
        post_signal=cfg.resolved_post_signal(),
    )


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def generate(cfg: SynthConfig, out_dir) -> dict:
    """Write a full dataset (graph TSVs + embedding files + meta.json).

    Deterministic: the same config yields byte-identical files.
    """
    rng = np.random.default_rng(cfg.seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    n_news = cfg.news_count
    n_fake = int(round(cfg.fake_fraction * n_news))
    labels = {i: (0 if i < n_fake else 1) for i in range(n_news)}

    pool = cfg.users_per_community
    users_a = list(range(n_news, n_news + pool))
    users_b = list(range(n_news + pool, n_news + 2 * pool))
    ambient = list(range(n_news + 2 * pool, n_news + 2 * pool + cfg.ambient_user_pool))
    next_id = n_news + 2 * pool + cfg.ambient_user_pool

    user_comm = {u: COMM_A for u in users_a}
    user_comm.update({u: COMM_B for u in users_b})
    user_comm.update({u: COMM_NONE for u in ambient})

    def biased_community(label: int) -> int:
        home = COMM_A if label == 0 else COMM_B
        if rng.random() < 0.5 + 0.5 * cfg.community_strength:
            return home
        return COMM_B if home == COMM_A else COMM_A

    def draw_user(comm: int) -> int:
        members = users_a if comm == COMM_A else users_b
        return members[int(rng.integers(len(members)))]

    nodes: dict[int, NodeType] = {i: NodeType.NEWS for i in range(n_news)}
    for u in users_a + users_b + ambient:
        nodes[u] = NodeType.USER
    edges: set[tuple[int, int, EdgeType]] = set()
    adjacency: dict[int, list[tuple[int, EdgeType]]] = {v: [] for v in nodes}

    def add_edge(a: int, b: int, et: EdgeType) -> None:
        ta, tb = et.endpoint_types
        key = (min(a, b), max(a, b), et) if ta is tb else (
            (a, b, et) if nodes[a] is ta else (b, a, et)
        )
        if key in edges:
            return
        edges.add(key)
        adjacency.setdefault(a, []).append((b, et))
        adjacency.setdefault(b, []).append((a, et))

    post_comm: dict[int, int] = {}
    for news in range(n_news):
        label = labels[news]
        author = draw_user(biased_community(label))
        add_edge(news, author, EdgeType.NEWS_USER)
        n_posts = max(1, int(rng.poisson(cfg.posts_per_news)))
        own_posts: list[int] = []
        for _ in range(n_posts):
            post = next_id
            next_id += 1
            nodes[post] = NodeType.POST
            adjacency[post] = []
            add_edge(news, post, EdgeType.NEWS_POST)
            if own_posts and rng.random() < cfg.repost_prob:
                earlier = own_posts[int(rng.integers(len(own_posts)))]
                add_edge(post, earlier, EdgeType.POST_POST)
            own_posts.append(post)
            comm_of_post = None
            for _ in range(cfg.users_per_post):
                comm = biased_community(label)
                if comm_of_post is None:
                    comm_of_post = comm
                add_edge(post, draw_user(comm), EdgeType.POST_USER)
            post_comm[post] = comm_of_post if comm_of_post is not None else user_comm[author]
            if ambient:
                for _ in range(cfg.ambient_users_per_post):
                    crowd = ambient[int(rng.integers(len(ambient)))]
                    add_edge(post, crowd, EdgeType.POST_USER)

    if cfg.schema == "fakenewsnet" and cfg.follow_edges_per_user > 0:
        for members in (users_a, users_b):
            n_follow = int(cfg.follow_edges_per_user * len(members))
            for _ in range(n_follow):
                a = members[int(rng.integers(len(members)))]
                b = members[int(rng.integers(len(members)))]
                if a != b:
                    add_edge(a, b, EdgeType.USER_USER)

    for v in adjacency:
        adjacency[v].sort(key=lambda pair: (pair[0], pair[1].value))
    graph = HetGraph(nodes=nodes, labels=labels, adjacency=adjacency, schema=cfg.schema)
    save_graph_dir(graph, out_dir)

    # content: fake news lean +1 along a fixed direction, real lean -1;
    # community A users/posts lean +1, community B lean -1, ambient 0
    u_news = _unit(rng, cfg.news_dim)
    u_post = _unit(rng, cfg.post_dim)
    u_user = _unit(rng, cfg.user_dim)
    comm_sign = {COMM_A: 1.0, COMM_B: -1.0, COMM_NONE: 0.0}

    news_table = EmbeddingTable(AttributeKey(NodeType.NEWS, "text", cfg.news_dim))
    for news in range(n_news):
        sign = 1.0 if labels[news] == 0 else -1.0
        mean = sign * cfg.news_signal * cfg.signal_scale * u_news
        news_table.put(news, mean + rng.normal(size=cfg.news_dim))

    post_table = EmbeddingTable(AttributeKey(NodeType.POST, "text", cfg.post_dim))
    strength_post = cfg.resolved_post_signal()
    for post in sorted(post_comm):
        mean = comm_sign[post_comm[post]] * strength_post * cfg.signal_scale * u_post
        post_table.put(post, mean + rng.normal(size=cfg.post_dim))

    user_table = EmbeddingTable(AttributeKey(NodeType.USER, "profile", cfg.user_dim))
    strength_user = cfg.resolved_neighbor_signal()
    for user in users_a + users_b + ambient:
        mean = comm_sign[user_comm[user]] * strength_user * cfg.signal_scale * u_user
        user_table.put(user, mean + rng.normal(size=cfg.user_dim))

    write_embeddings(news_table, out_dir / "news_text.emb")
    write_embeddings(post_table, out_dir / "post_text.emb")
    write_embeddings(user_table, out_dir / "user_profile.emb")

    meta = {
        "schema": cfg.schema,
        "generator": dataclasses.asdict(cfg),
        "counts": graph.stats().as_dict(),
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return meta
