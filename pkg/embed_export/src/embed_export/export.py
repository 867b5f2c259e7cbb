"""Turn a raw dataset tree into graph TSVs plus HETEMB1 embedding files.

String ids are densified deterministically (news, then posts, then users,
each sorted); the mapping lands in an ``ids.tsv`` sidecar for provenance.
The HETEMB1 writer here is an independent implementation of the wire
format the downstream classifier reads.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoders import ScalarFeatures, TextEncoder, stub_image_vector
from .errors import BadRecipe, EncoderUnavailable
from .raw import RawDataset, read_raw

HETEMB1_MAGIC = b"HETEMB1\0"

TEXT_SOURCE_DEFAULT = {"news": "text", "post": "text", "user": "description"}


@dataclass
class AttributeSpec:
    node_type: str
    attr_name: str
    encoder: str
    dim: int
    normalization: str = "none"
    fields: list[str] = field(default_factory=list)
    source: str | None = None
    model_name: str | None = None


@dataclass
class ExportRecipe:
    dataset: str
    attributes: list[AttributeSpec]
    encoder_mode: str = "stub"

    @classmethod
    def load(cls, path) -> "ExportRecipe":
        payload = json.loads(Path(path).read_text())
        try:
            attrs = [AttributeSpec(**spec) for spec in payload["attributes"]]
            recipe = cls(
                dataset=payload["dataset"],
                attributes=attrs,
                encoder_mode=payload.get("encoder_mode", "stub"),
            )
        except (KeyError, TypeError) as exc:
            raise BadRecipe(f"{path}: {exc}") from exc
        for spec in attrs:
            if spec.node_type not in ("news", "post", "user"):
                raise BadRecipe(f"unknown node type {spec.node_type!r}")
            if spec.dim <= 0:
                raise BadRecipe(f"{spec.node_type}.{spec.attr_name}: dim must be positive")
            if spec.encoder == "scalar-features":
                if len(spec.fields) != spec.dim:
                    raise BadRecipe(
                        f"{spec.node_type}.{spec.attr_name}: {len(spec.fields)} fields "
                        f"but dim {spec.dim}"
                    )
            elif spec.encoder not in ("tweet-text-encoder", "news-text-encoder", "image-encoder"):
                raise BadRecipe(f"unknown encoder {spec.encoder!r}")
        return recipe


def write_hetemb1(path, dim: int, rows: dict[int, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<8sII", HETEMB1_MAGIC, len(rows), dim))
        for node_id in sorted(rows):
            fh.write(struct.pack("<Q", node_id))
            fh.write(np.asarray(rows[node_id], dtype="<f4").tobytes())


def assign_ids(ds: RawDataset) -> dict[str, int]:
    mapping: dict[str, int] = {}
    for group in (sorted(ds.news), sorted(ds.posts), sorted(ds.users)):
        for string_id in group:
            mapping[string_id] = len(mapping)
    return mapping


def _write_graph(ds: RawDataset, ids: dict[str, int], out: Path) -> None:
    with open(out / "nodes.tsv", "w", encoding="utf-8") as fh:
        for string_id, node_id in sorted(ids.items(), key=lambda kv: kv[1]):
            if string_id in ds.news:
                fh.write(f"{node_id}\tnews\t{ds.news[string_id].label}\n")
            elif string_id in ds.posts:
                fh.write(f"{node_id}\tpost\t-\n")
            else:
                fh.write(f"{node_id}\tuser\t-\n")
    canonical = set()
    for etype, src, dst in ds.edges:
        a, b = ids[src], ids[dst]
        if etype in ("pp", "uu"):
            a, b = min(a, b), max(a, b)
        canonical.add((etype, a, b))
    with open(out / "edges.tsv", "w", encoding="utf-8") as fh:
        for etype, a, b in sorted(canonical, key=lambda e: (e[0], e[1], e[2])):
            fh.write(f"{a}\t{b}\t{etype}\n")
    with open(out / "ids.tsv", "w", encoding="utf-8") as fh:
        for string_id, node_id in sorted(ids.items(), key=lambda kv: kv[1]):
            fh.write(f"{node_id}\t{string_id}\n")
    (out / "meta.json").write_text(json.dumps({"schema": ds.schema}) + "\n")


def _records_for(ds: RawDataset, node_type: str):
    return {"news": ds.news, "post": ds.posts, "user": ds.users}[node_type]


def _encode_attribute(ds: RawDataset, ids, spec: AttributeSpec, mode: str):
    records = _records_for(ds, spec.node_type)
    rows: dict[int, np.ndarray] = {}
    if spec.encoder == "scalar-features":
        scal = ScalarFeatures(spec.fields, spec.normalization)
        ordered = sorted(records)
        matrix = np.stack([scal.raw_vector(records[k].stats) for k in ordered]) \
            if ordered else np.zeros((0, spec.dim))
        matrix = scal.normalize(matrix)
        for k, row in zip(ordered, matrix):
            rows[ids[k]] = row
        return rows
    if spec.encoder == "image-encoder":
        if spec.node_type != "news":
            raise BadRecipe("image-encoder only applies to news nodes")
        if mode != "stub":
            raise EncoderUnavailable("image-encoder", "only stub mode is bundled")
        for k, rec in records.items():
            if rec.image is None:
                continue  # absent image: omit the row, never fabricate
            rows[ids[k]] = stub_image_vector(rec.image, spec.dim)
        return rows
    # text encoders
    source = spec.source or TEXT_SOURCE_DEFAULT[spec.node_type]
    enc = TextEncoder(role=spec.encoder, dim=spec.dim, mode=mode, model_name=spec.model_name)
    for k, rec in records.items():
        rows[ids[k]] = enc.encode(getattr(rec, source, "") or "")
    return rows


def export(raw_dir, recipe: ExportRecipe, out_dir) -> dict:
    """Run the full conversion; returns a summary of what was written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = read_raw(raw_dir, recipe.dataset)
    ids = assign_ids(ds)
    _write_graph(ds, ids, out)
    emitted = {}
    for spec in recipe.attributes:
        rows = _encode_attribute(ds, ids, spec, recipe.encoder_mode)
        filename = f"{spec.node_type}_{spec.attr_name}.emb"
        write_hetemb1(out / filename, spec.dim, rows)
        emitted[filename] = len(rows)
    return {
        "out": str(out),
        "schema": ds.schema,
        "nodes": {"news": len(ds.news), "post": len(ds.posts), "user": len(ds.users)},
        "edges": len(ds.edges),
        "embeddings": emitted,
    }
