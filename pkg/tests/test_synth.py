import json

import numpy as np

from hetformer.dataset import load_dataset
from hetformer.embeddings import AttributeKey
from hetformer.graph import NodeType, load_graph_dir
from hetformer.synth import SynthConfig, content_free_variant, generate


def test_generated_outputs_load_cleanly(tmp_path):
    for seed in range(3):
        out = tmp_path / f"d{seed}"
        cfg = SynthConfig(news_count=40, users_per_community=20, seed=seed,
                          ambient_user_pool=10, ambient_users_per_post=1,
                          follow_edges_per_user=0.5)
        meta = generate(cfg, out)
        ds = load_dataset(out)
        stats = ds.graph.stats()
        assert stats.n_news == 40
        assert stats.n_fake + stats.n_real == 40
        assert meta["counts"] == stats.as_dict()
        assert len(ds.tables) == 3
        # every node has its attribute vector
        for key, table in ds.tables.items():
            typed = [v for v, t in ds.graph.nodes.items() if t is key.node_type]
            assert set(table.rows) == set(typed)


def test_ground_truth_counts(tmp_path):
    generate(SynthConfig(news_count=100, fake_fraction=0.4, seed=1), tmp_path / "g")
    g = load_graph_dir(tmp_path / "g")
    s = g.stats()
    assert (s.n_fake, s.n_real, s.n_news) == (40, 60, 100)


def test_same_seed_byte_identical(tmp_path):
    cfg = SynthConfig(news_count=30, users_per_community=15, seed=9)
    generate(cfg, tmp_path / "a")
    generate(cfg, tmp_path / "b")
    for name in ("nodes.tsv", "edges.tsv", "news_text.emb", "post_text.emb",
                 "user_profile.emb", "meta.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    generate(SynthConfig(news_count=30, users_per_community=15, seed=10), tmp_path / "c")
    assert (tmp_path / "a" / "edges.tsv").read_bytes() != (tmp_path / "c" / "edges.tsv").read_bytes()


def test_content_free_variant_kills_news_signal(tmp_path):
    base = SynthConfig(news_count=60, users_per_community=30, news_signal=1.0, seed=3)
    cfg = content_free_variant(base)
    assert cfg.news_signal == 0.0
    assert cfg.resolved_neighbor_signal() == 1.0
    generate(cfg, tmp_path / "cf")
    ds = load_dataset(tmp_path / "cf")
    news_key = AttributeKey(NodeType.NEWS, "text", 32)
    user_key = AttributeKey(NodeType.USER, "profile", 32)
    labels = ds.graph.labels

    # class-mean separation: absent for news content, present for users
    fake = np.array([ds.tables[news_key].rows[i] for i in labels if labels[i] == 0])
    real = np.array([ds.tables[news_key].rows[i] for i in labels if labels[i] == 1])
    news_gap = np.linalg.norm(fake.mean(0) - real.mean(0))
    # pure noise: expected gap ~ sqrt(d*(1/n_f+1/n_r)) ~ 1.5, signal would add 6
    assert news_gap < 3.0

    users = sorted(ds.tables[user_key].rows)
    half = len(users) // 2
    comm_a = np.array([ds.tables[user_key].rows[u] for u in users[:half]])
    comm_b = np.array([ds.tables[user_key].rows[u] for u in users[half:]])
    user_gap = np.linalg.norm(comm_a.mean(0) - comm_b.mean(0))
    assert user_gap > 4.0  # two communities, +/- 3 along a unit direction


def test_planted_signal_separation(tmp_path):
    generate(SynthConfig(news_count=60, users_per_community=30, news_signal=1.0, seed=4),
             tmp_path / "s1")
    ds = load_dataset(tmp_path / "s1")
    news_key = AttributeKey(NodeType.NEWS, "text", 32)
    labels = ds.graph.labels
    fake = np.array([ds.tables[news_key].rows[i] for i in labels if labels[i] == 0])
    real = np.array([ds.tables[news_key].rows[i] for i in labels if labels[i] == 1])
    assert np.linalg.norm(fake.mean(0) - real.mean(0)) > 4.0


def test_every_news_has_a_post(tmp_path):
    generate(SynthConfig(news_count=25, posts_per_news=1.0, seed=6), tmp_path / "p")
    g = load_graph_dir(tmp_path / "p")
    for news in g.news_ids():
        kinds = {et.value for _, et in g.neighbors(news)}
        assert "np" in kinds


def test_signal_monotonicity(tmp_path):
    # accuracy should be non-decreasing in the signal strength; one
    # inversion across the seed ensemble is tolerated (noise at low s)
    from hetformer.dataset import load_dataset
    from hetformer.estimator import HetTransformerClassifier, run_experiment
    from hetformer.rwr import WalkConfig, sample_all

    strengths = (0.0, 0.5, 1.0)
    inversions = 0
    for seed in (0, 1, 2):
        accs = []
        for s in strengths:
            out = tmp_path / f"s{seed}_{s}"
            generate(SynthConfig(news_count=120, fake_fraction=0.5, news_signal=s,
                                 community_strength=s, users_per_community=40,
                                 seed=100 + seed), out)
            ds = load_dataset(out)
            ds.samples = sample_all(ds.graph, WalkConfig(0.5, 5000, 10, 42), workers=4)
            run = run_experiment(ds, HetTransformerClassifier(
                lr=0.03, max_epochs=25, patience=5, seed=seed))
            accs.append(run.test_report.accuracy)
        inversions += sum(1 for a, b in zip(accs, accs[1:]) if b < a)
    assert inversions <= 1


def test_pheme_schema_no_follow_edges(tmp_path):
    cfg = SynthConfig(news_count=20, schema="pheme", follow_edges_per_user=2.0, seed=7)
    generate(cfg, tmp_path / "ph")
    g = load_graph_dir(tmp_path / "ph")  # schema read back from meta.json
    assert g.schema == "pheme"
    assert g.stats().edge_counts["uu"] == 0
    meta = json.loads((tmp_path / "ph" / "meta.json").read_text())
    assert meta["schema"] == "pheme"
