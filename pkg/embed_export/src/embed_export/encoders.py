"""Content encoders: deterministic hash-based stubs plus optional
HuggingFace-backed text encoding.

Stub mode needs no model weights and is byte-reproducible, which is what the
interop fixtures run on: each token (or the image byte stream) seeds a
pseudo-random unit vector and the vectors are averaged. Real encoders are
loaded lazily and report EncoderUnavailable when the runtime lacks them.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import EncoderUnavailable


def _hash_vector(payload: bytes, dim: int) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def stub_text_vector(text: str, dim: int, salt: str = "") -> np.ndarray:
    tokens = text.lower().split()
    if not tokens:
        return np.zeros(dim, dtype=np.float32)
    acc = np.zeros(dim)
    for tok in tokens:
        acc += _hash_vector(f"{salt}|{tok}".encode("utf-8"), dim)
    acc /= len(tokens)
    return acc.astype(np.float32)


def stub_image_vector(payload: bytes, dim: int) -> np.ndarray:
    return _hash_vector(b"image|" + payload, dim).astype(np.float32)


class HuggingFaceTextEncoder:
    """Mean-pooled hidden states of a locally available HF model."""

    def __init__(self, model_name: str, dim: int):
        self.dim = dim
        try:
            from transformers import AutoModel, AutoTokenizer  # noqa: PLC0415

            self.tokenizer = AutoTokenizer.from_pretrained(model_name, local_files_only=True)
            self.model = AutoModel.from_pretrained(model_name, local_files_only=True)
            self.model.eval()
        except Exception as exc:  # model missing, torch missing, etc.
            raise EncoderUnavailable(model_name, str(exc)) from exc

    def encode(self, text: str) -> np.ndarray:
        import torch  # noqa: PLC0415

        with torch.no_grad():
            inputs = self.tokenizer(text, return_tensors="pt", truncation=True, max_length=256)
            hidden = self.model(**inputs).last_hidden_state.mean(dim=1).squeeze(0).numpy()
        if hidden.shape[0] < self.dim:
            raise EncoderUnavailable("huggingface", f"model dim {hidden.shape[0]} < {self.dim}")
        return hidden[: self.dim].astype(np.float32)


class TextEncoder:
    """Dispatch between stub and HuggingFace modes with a per-role salt,
    so e.g. tweet-text and news-text stubs differ even on identical text."""

    def __init__(self, role: str, dim: int, mode: str = "stub", model_name: str | None = None):
        self.role = role
        self.dim = dim
        self.mode = mode
        self._hf = None
        if mode == "huggingface":
            if not model_name:
                raise EncoderUnavailable(role, "no model_name configured")
            self._hf = HuggingFaceTextEncoder(model_name, dim)
        elif mode != "stub":
            raise EncoderUnavailable(role, f"unknown mode {mode!r}")

    def encode(self, text: str) -> np.ndarray:
        if self._hf is not None:
            return self._hf.encode(text)
        return stub_text_vector(text, self.dim, salt=self.role)


class ScalarFeatures:
    """Named numeric fields stacked into a vector; optionally z-scored
    column-wise over the whole dataset (constant columns stay zero)."""

    def __init__(self, fields: list[str], normalization: str = "z-score"):
        self.fields = fields
        self.normalization = normalization

    def raw_vector(self, record: dict) -> np.ndarray:
        vals = []
        for field in self.fields:
            value = record.get(field, 0)
            if isinstance(value, bool):
                value = int(value)
            if value is None:
                value = 0
            if isinstance(value, str):
                value = 1 if value.strip() else 0
            vals.append(float(value))
        return np.array(vals, dtype=np.float64)

    def normalize(self, matrix: np.ndarray) -> np.ndarray:
        if self.normalization == "none" or matrix.size == 0:
            return matrix.astype(np.float32)
        mean = matrix.mean(axis=0)
        std = matrix.std(axis=0)
        std[std == 0] = 1.0
        return ((matrix - mean) / std).astype(np.float32)
