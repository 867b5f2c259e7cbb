"""Command-line entry point: ``hetformer <subcommand> --config FILE [overrides]``.

Experiments are driven by a JSON config (paths plus walk / model / train /
ablation sections); CLI flags override file values, and the fully resolved
config is echoed into every output JSON together with content hashes of the
input files, so a report is traceable to exactly what produced it. The
``HETFORMER_SEED`` environment variable overrides all seeds at once.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from .dataset import load_dataset
from .errors import HetformerError
from .estimator import HetTransformerClassifier, run_experiment, split_news
from .graph import load_graph_dir
from .gradcheck import full_model_grad_check
from .rwr import WalkConfig, sample_all
from .synth import SynthConfig, generate

DEFAULT_CONFIG = {
    "graph_dir": None,
    "emb_dir": None,
    "cache": None,
    "checkpoint": None,
    "report": None,
    "log": None,
    "schema": None,
    "walk": {"restart_p": 0.5, "iterations": 10000, "top_gamma": 15, "seed": 42, "workers": 1},
    "model": {
        "unified_dim": 32,
        "content_heads": 4,
        "content_layers": 1,
        "per_attribute_blocks": False,
        "xf_layers": 1,
        "xf_heads": 4,
        "ff_dim": None,
        "dropout": 0.1,
        "max_seq_len": None,
        "head_hidden": None,
    },
    "train": {
        "lr": 1e-3,
        "momentum": 0.0,
        "max_epochs": 40,
        "patience": 5,
        "batch_size": 32,
        "seed": 0,
        "dtype": "float32",
        "class_weight": None,
    },
    "ablate": {"decoder": False, "positional": False, "literal_eq8": False, "target_only": False},
}


def _deep_update(base: dict, extra: dict) -> dict:
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def resolve_config(path: str | None, overrides: dict) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        _deep_update(cfg, json.loads(Path(path).read_text()))
    _deep_update(cfg, overrides)
    env_seed = os.environ.get("HETFORMER_SEED")
    if env_seed is not None:
        cfg["walk"]["seed"] = int(env_seed)
        cfg["train"]["seed"] = int(env_seed)
    return cfg


def content_hash(path) -> str:
    """Git-style blob hash of a file's bytes."""
    data = Path(path).read_bytes()
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def hash_inputs(cfg: dict) -> dict:
    hashes = {}
    graph_dir = cfg.get("graph_dir")
    if graph_dir:
        for name in ("nodes.tsv", "edges.tsv"):
            p = Path(graph_dir) / name
            if p.exists():
                hashes[str(p)] = content_hash(p)
        emb_dir = Path(cfg.get("emb_dir") or graph_dir)
        for p in sorted(emb_dir.glob("*.emb")):
            hashes[str(p)] = content_hash(p)
    cache = cfg.get("cache")
    if cache and Path(cache).exists():
        hashes[str(cache)] = content_hash(cache)
    return hashes


def classifier_from_config(cfg: dict) -> HetTransformerClassifier:
    m, t, a = cfg["model"], cfg["train"], cfg["ablate"]
    class_weight = t.get("class_weight")
    if class_weight is not None:
        class_weight = {int(k): float(v) for k, v in class_weight.items()}
    return HetTransformerClassifier(
        unified_dim=m["unified_dim"],
        content_heads=m["content_heads"],
        content_layers=m["content_layers"],
        per_attribute_blocks=m["per_attribute_blocks"],
        xf_layers=m["xf_layers"],
        xf_heads=m["xf_heads"],
        ff_dim=m["ff_dim"],
        dropout=m["dropout"],
        max_seq_len=m["max_seq_len"],
        head_hidden=m["head_hidden"],
        literal_eq8=a["literal_eq8"],
        ablate_decoder=a["decoder"],
        ablate_positional=a["positional"],
        target_only=a["target_only"],
        lr=t["lr"],
        momentum=t["momentum"],
        max_epochs=t["max_epochs"],
        patience=t["patience"],
        batch_size=t["batch_size"],
        class_weight=class_weight,
        seed=t["seed"],
        dtype=t["dtype"],
    )


def _write_json(path, payload: dict) -> None:
    text = json.dumps(payload, indent=2, default=str) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _write_runlog(path, history: list[dict]) -> None:
    if not path:
        return
    with open(path, "w", encoding="utf-8") as fh:
        for row in history:
            fh.write(json.dumps(row) + "\n")


# --- subcommands ---

def cmd_synth(args) -> int:
    if args.config:
        raw = json.loads(Path(args.config).read_text())
    else:
        raw = {}
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = SynthConfig(**raw)
    meta = generate(cfg, args.out)
    _write_json(None, {"out": str(args.out), **meta})
    return 0


def cmd_sample(args) -> int:
    graph = load_graph_dir(args.graph, schema=args.schema)
    walk = WalkConfig(
        restart_p=args.p, iterations=args.T, top_gamma=args.gamma, seed=args.seed
    )
    t0 = time.perf_counter()
    samples = sample_all(graph, walk, workers=args.workers, cache_path=args.out)
    elapsed = time.perf_counter() - t0
    summary = {
        "graph_dir": str(args.graph),
        "walk": dataclasses.asdict(walk),
        "workers": args.workers,
        "news_sampled": len(samples),
        "seconds": elapsed,
        "cache": str(args.out),
        "inputs": {
            str(Path(args.graph) / n): content_hash(Path(args.graph) / n)
            for n in ("nodes.tsv", "edges.tsv")
        },
    }
    _write_json(args.json, summary)
    return 0


def _load_experiment(cfg: dict):
    dataset = load_dataset(
        cfg["graph_dir"], emb_dir=cfg["emb_dir"], cache_path=cfg["cache"],
        schema=cfg["schema"],
    )
    missing = [i for i in dataset.graph.labeled_news_ids() if i not in dataset.samples]
    if missing:
        raise HetformerError(
            f"RWR cache does not cover {len(missing)} labeled news nodes "
            f"(first missing: {missing[0]}); run `hetformer sample` first"
        )
    return dataset


def cmd_train(args, overrides: dict) -> int:
    cfg = resolve_config(args.config, overrides)
    dataset = _load_experiment(cfg)
    clf = classifier_from_config(cfg)
    run = run_experiment(dataset, clf)
    if cfg.get("checkpoint"):
        clf.model_.save(cfg["checkpoint"])
    _write_runlog(cfg.get("log"), run.history)
    payload = {"resolved_config": cfg, "inputs": hash_inputs(cfg), **run.as_dict()}
    _write_json(args.out or cfg.get("report"), payload)
    return 0


def cmd_eval(args, overrides: dict) -> int:
    cfg = resolve_config(args.config, overrides)
    dataset = _load_experiment(cfg)
    clf = classifier_from_config(cfg)
    model = clf._build_model(dataset)
    model.load(args.checkpoint)
    clf.model_ = model
    clf.classes_ = [0, 1]
    split = split_news(dataset.graph.labeled_news_ids(), dataset.graph.labels,
                       seed=cfg["train"]["seed"])
    report = clf.evaluate(dataset, split.test)
    payload = {
        "resolved_config": cfg,
        "inputs": {**hash_inputs(cfg), str(args.checkpoint): content_hash(args.checkpoint)},
        "split_sizes": {k: len(v) for k, v in split.as_dict().items()},
        "test": report.as_dict(),
    }
    _write_json(args.out or cfg.get("report"), payload)
    return 0


def cmd_sweep(args, overrides: dict) -> int:
    cfg = resolve_config(args.config, overrides)
    gammas = [int(g) for g in args.gammas.split(",")]
    graph = load_graph_dir(cfg["graph_dir"], schema=cfg["schema"])
    dataset = load_dataset(cfg["graph_dir"], emb_dir=cfg["emb_dir"], schema=cfg["schema"])
    rows = []
    for gamma in gammas:
        walk = WalkConfig(
            restart_p=cfg["walk"]["restart_p"],
            iterations=cfg["walk"]["iterations"],
            top_gamma=gamma,
            seed=cfg["walk"]["seed"],
        )
        dataset.samples = sample_all(graph, walk, workers=cfg["walk"]["workers"])
        clf = classifier_from_config(cfg)
        run = run_experiment(dataset, clf)
        rows.append({
            "gamma": gamma,
            "accuracy": run.test_report.accuracy,
            "f1_fake": run.test_report.per_class["fake"].f1,
            "f1_real": run.test_report.per_class["real"].f1,
            "best_epoch": run.best_epoch,
        })
    payload = {"resolved_config": cfg, "inputs": hash_inputs(cfg), "sweep": rows}
    _write_json(args.out or cfg.get("report"), payload)
    return 0


def cmd_gradcheck(args) -> int:
    worst = full_model_grad_check(
        dim=args.dim, heads=args.heads, layers=args.layers, gamma=args.gamma,
        seed=args.seed, eps=args.eps,
    )
    ok = worst < args.tol
    _write_json(None, {"max_rel_error": worst, "tolerance": args.tol, "pass": ok})
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetformer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", help="SynthConfig JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("sample", help="RWR-sample every news node")
    p.add_argument("--graph", required=True)
    p.add_argument("--schema", default=None)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--T", type=int, default=10000)
    p.add_argument("--gamma", type=int, default=15)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--json", default=None)

    for name in ("train", "eval", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--lr", type=float)
        p.add_argument("--epochs", type=int)
        p.add_argument("--patience", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--batch", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--ablate-decoder", action="store_true", default=None)
        p.add_argument("--ablate-positional", action="store_true", default=None)
        p.add_argument("--literal-eq8", action="store_true", default=None)
        p.add_argument("--target-only", action="store_true", default=None)
        if name == "eval":
            p.add_argument("--checkpoint", required=True)
        if name == "sweep":
            p.add_argument("--gammas", required=True)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--gamma", type=int, default=4)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    return parser


def _collect_overrides(args) -> dict:
    overrides: dict = {"train": {}, "ablate": {}, "walk": {}}
    if getattr(args, "lr", None) is not None:
        overrides["train"]["lr"] = args.lr
    if getattr(args, "epochs", None) is not None:
        overrides["train"]["max_epochs"] = args.epochs
    if getattr(args, "patience", None) is not None:
        overrides["train"]["patience"] = args.patience
    if getattr(args, "seed", None) is not None:
        overrides["train"]["seed"] = args.seed
        overrides["walk"]["seed"] = args.seed
    if getattr(args, "batch", None) is not None:
        overrides["train"]["batch_size"] = args.batch
    if getattr(args, "workers", None) is not None:
        overrides["walk"]["workers"] = args.workers
    if getattr(args, "ablate_decoder", None):
        overrides["ablate"]["decoder"] = True
    if getattr(args, "ablate_positional", None):
        overrides["ablate"]["positional"] = True
    if getattr(args, "literal_eq8", None):
        overrides["ablate"]["literal_eq8"] = True
    if getattr(args, "target_only", None):
        overrides["ablate"]["target_only"] = True
    return overrides


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "sample":
            return cmd_sample(args)
        if args.command == "train":
            return cmd_train(args, _collect_overrides(args))
        if args.command == "eval":
            return cmd_eval(args, _collect_overrides(args))
        if args.command == "sweep":
            return cmd_sweep(args, _collect_overrides(args))
        if args.command == "gradcheck":
            return cmd_gradcheck(args)
    except HetformerError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error [FileNotFound]: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
