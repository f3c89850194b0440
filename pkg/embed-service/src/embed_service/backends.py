"""Embedding backends.

Two families: "hash:<dim>" is a dependency-free deterministic embedder so
the service runs anywhere (CI, offline), and "st:<model-id>" loads a
sentence-transformers model (e.g. a SPECTER checkpoint) when its weights
are available locally or downloadable.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, Sequence

import numpy as np


class Backend(Protocol):
    name: str
    dim: int

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """(len(texts), dim) float array, one row per text, input order."""
        ...


class HashBackend:
    """Seedless trigram hashing; deterministic across processes."""

    def __init__(self, dim: int = 384):
        if dim < 8:
            raise ValueError("hash backend dim must be >= 8")
        self.dim = dim
        self.name = f"hash-trigram-{dim}"

    def _one(self, text: str) -> np.ndarray:
        padded = f" {' '.join(text.split()).lower()} "
        vec = np.zeros(self.dim, dtype=np.float64)
        if len(padded) < 3:
            vec[0] = 1.0
            return vec
        for i in range(len(padded) - 2):
            digest = hashlib.sha256(padded[i : i + 3].encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:8], "big") % self.dim
            sign = 1.0 if digest[8] & 1 else -1.0
            vec[bucket] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec[0] = 1.0
            return vec
        return vec / norm

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self._one(t) for t in texts])


class SentenceTransformerBackend:
    """Transformer sentence encoder via sentence-transformers."""

    def __init__(self, model_id: str):
        from sentence_transformers import SentenceTransformer

        self._model = SentenceTransformer(model_id)
        self.dim = int(self._model.get_sentence_embedding_dimension())
        self.name = model_id

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.asarray(
            self._model.encode(list(texts), convert_to_numpy=True, show_progress_bar=False),
            dtype=np.float64,
        )


def load_backend(spec: str) -> Backend:
    """"hash:<dim>" or "st:<model-id>"."""
    kind, _, arg = spec.partition(":")
    if kind == "hash":
        return HashBackend(dim=int(arg) if arg else 384)
    if kind == "st":
        if not arg:
            raise ValueError("st backend needs a model id: st:<model-id>")
        return SentenceTransformerBackend(arg)
    raise ValueError(f"unknown backend spec {spec!r}")
