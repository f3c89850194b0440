"""Text embedding providers and cosine similarity.

Three providers share one interface: a deterministic seedless hash
embedder for tests and reproducible runs, a file-backed cache that can
wrap any provider (or serve alone from a frozen file), and a client for
the remote embed HTTP protocol:

    POST /embed   {"texts": [str]} -> {"dim": int, "vectors": [[float]]}
    GET  /health  -> {"dim": int, "model": str}

Vectors are 1-D numpy float arrays. The cache file format is binary:
8-byte magic "SILKEMB1", then records of (key_len: u32 LE, key bytes,
dim: u32 LE, dim little-endian float32 values), append-only.
"""

from __future__ import annotations

import hashlib
import struct
import threading
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np
import requests

CACHE_MAGIC = b"SILKEMB1"


class EmbeddingError(Exception):
    pass


class ProtocolError(EmbeddingError):
    """Fatal: the remote endpoint violated the embed protocol."""


class EmbeddingTransportError(EmbeddingError):
    """Retriable: HTTP failure or timeout while talking to the endpoint."""


class CacheError(EmbeddingError):
    pass


def normalize_text(text: str) -> str:
    """Whitespace/case normalization used for cache keys and hashing."""
    return " ".join(text.split()).lower()


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """cos(a, b) in [-1, 1]; errors on dimension mismatch or zero vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if np.array_equal(a, b):
        if not a.any():
            raise ValueError("zero vector")
        return 1.0
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("zero vector")
    value = float(np.dot(a, b) / (na * nb))
    return max(-1.0, min(1.0, value))


class EmbeddingProvider(Protocol):
    identity: str

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]: ...

    def dim(self) -> int: ...


# ---------------------------------------------------------------------------
# deterministic hash embedder
# ---------------------------------------------------------------------------


def _hash_int(data: bytes, person: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(data, digest_size=8, person=person).digest(), "little")


def hash_embed(text: str, dim: int) -> np.ndarray:
    """Feature-hash character trigrams into a unit-norm float64 vector.

    Fully deterministic and seedless: bucket and sign come from two keyed
    blake2b hashes of each trigram of the normalized text. Texts with no
    trigram content map to a fixed basis vector.
    """
    if dim < 8:
        raise ValueError("hash embedding dim must be >= 8")
    normalized = normalize_text(text)
    vec = np.zeros(dim, dtype=np.float64)
    if len(normalized) == 0:
        vec[0] = 1.0
        return vec
    grams = (
        [normalized[i : i + 3] for i in range(len(normalized) - 2)]
        if len(normalized) >= 3
        else [normalized]
    )
    for gram in grams:
        data = gram.encode("utf-8")
        bucket = _hash_int(data, b"bucket") % dim
        sign = 1.0 if _hash_int(data, b"sign") & 1 else -1.0
        vec[bucket] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        # sign cancellations zeroed everything; fall back to the basis vector
        vec[0] = 1.0
        return vec
    return vec / norm


class HashEmbedder:
    """Deterministic test/reproducibility provider over hash_embed."""

    def __init__(self, dim: int = 256):
        if dim < 8:
            raise ValueError("hash embedding dim must be >= 8")
        self._dim = dim
        self.identity = f"hash:{dim}"

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [hash_embed(t, self._dim) for t in texts]

    def dim(self) -> int:
        return self._dim


# ---------------------------------------------------------------------------
# file-backed cache
# ---------------------------------------------------------------------------


class CacheStore:
    """Append-only binary vector cache keyed by (provider identity, text).

    Entries are quantized to float32 on write, as stored on disk; a write
    is a single append so readers never observe a torn record (a truncated
    trailing record marks the file corrupt).
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[str, np.ndarray] = {}
        self._dim: int | None = None
        self._lock = threading.Lock()
        if self.path.exists() and self.path.stat().st_size > 0:
            self._load()
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_bytes(CACHE_MAGIC)

    def _load(self) -> None:
        blob = self.path.read_bytes()
        if blob[:8] != CACHE_MAGIC:
            raise CacheError(f"{self.path}: bad magic header")
        offset = 8
        total = len(blob)
        while offset < total:
            try:
                (key_len,) = struct.unpack_from("<I", blob, offset)
                offset += 4
                if total < offset + key_len:
                    raise struct.error("truncated key")
                key = blob[offset : offset + key_len].decode("utf-8")
                offset += key_len
                (dim,) = struct.unpack_from("<I", blob, offset)
                offset += 4
                if total < offset + 4 * dim:
                    raise struct.error("truncated values")
                values = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset)
                offset += 4 * dim
            except (struct.error, UnicodeDecodeError, ValueError) as exc:
                raise CacheError(f"{self.path}: corrupt cache record at byte {offset}: {exc}") from exc
            self._entries[key] = values.copy()
            self._check_dim(dim)

    def _check_dim(self, dim: int) -> None:
        if self._dim is None:
            self._dim = dim
        elif self._dim != dim:
            raise CacheError(f"{self.path}: mixed dimensions {self._dim} vs {dim}")

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def dim(self) -> int | None:
        return self._dim

    def get(self, key: str) -> np.ndarray | None:
        return self._entries.get(key)

    def put(self, key: str, vector: np.ndarray) -> np.ndarray:
        """Persist and return the float32-quantized vector."""
        values = np.asarray(vector, dtype="<f4")
        self._check_dim(values.size)
        record = struct.pack("<I", len(key.encode("utf-8"))) + key.encode("utf-8")
        record += struct.pack("<I", values.size) + values.tobytes()
        with self._lock:
            with open(self.path, "ab") as fp:
                fp.write(record)
            self._entries[key] = values
        return values


def cache_key(identity: str, text: str) -> str:
    return f"{identity}\x00{normalize_text(text)}"


def cached_embed(
    provider: EmbeddingProvider | None,
    cache: CacheStore,
    texts: Sequence[str],
    batch_size: int = 64,
) -> list[np.ndarray]:
    """Serve hits from the cache, fetch misses in batches and persist them.

    Returned vectors are the float32-quantized values the cache stores, so
    cold-cache and warm-cache runs produce identical numbers. Without a
    provider, a miss is an error (frozen-cache mode).
    """
    identity = provider.identity if provider is not None else "file"
    if provider is not None and cache.dim is not None and cache.dim != provider.dim():
        raise CacheError(f"cache dim {cache.dim} != provider dim {provider.dim()}")
    keys = [cache_key(identity, t) for t in texts]
    miss_keys: list[str] = []
    miss_texts: list[str] = []
    seen = set()
    for key, text in zip(keys, texts):
        if cache.get(key) is None and key not in seen:
            seen.add(key)
            miss_keys.append(key)
            miss_texts.append(text)
    if miss_keys:
        if provider is None:
            raise EmbeddingError(f"cache miss for {len(miss_keys)} texts and no provider configured")
        for lo in range(0, len(miss_texts), batch_size):
            chunk = miss_texts[lo : lo + batch_size]
            try:
                vectors = provider.embed_batch(chunk)
            except EmbeddingError:
                raise
            except Exception as exc:
                raise EmbeddingError(
                    f"provider failed on batch {lo // batch_size} ({len(chunk)} texts): {exc}"
                ) from exc
            if len(vectors) != len(chunk):
                raise ProtocolError(f"provider returned {len(vectors)} vectors for {len(chunk)} texts")
            for key, vec in zip(miss_keys[lo : lo + batch_size], vectors):
                cache.put(key, vec)
    out = []
    for key in keys:
        values = cache.get(key)
        if values is None:
            raise CacheError(f"cache lost entry for key {key!r}")
        out.append(values.astype(np.float64))
    return out


class CachedEmbedder:
    """Provider wrapper over cached_embed; provider=None serves a frozen file."""

    def __init__(self, cache: CacheStore, provider: EmbeddingProvider | None = None,
                 batch_size: int = 64):
        self.cache = cache
        self.provider = provider
        self.batch_size = batch_size
        self.identity = provider.identity if provider is not None else "file"

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return cached_embed(self.provider, self.cache, texts, batch_size=self.batch_size)

    def dim(self) -> int:
        if self.provider is not None:
            return self.provider.dim()
        if self.cache.dim is None:
            raise CacheError("empty cache file has no dimension")
        return self.cache.dim


# ---------------------------------------------------------------------------
# remote HTTP client
# ---------------------------------------------------------------------------


def _parse_vectors(payload: dict, expected: int) -> list[np.ndarray]:
    try:
        dim = int(payload["dim"])
        rows = payload["vectors"]
        vectors = [np.asarray(row, dtype=np.float64) for row in rows]
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed embed payload: {exc}") from exc
    if len(vectors) != expected:
        raise ProtocolError(f"server returned {len(vectors)} vectors for {expected} texts")
    for vec in vectors:
        if vec.ndim != 1 or vec.size != dim or not np.isfinite(vec).all():
            raise ProtocolError("embed payload vector has wrong shape or non-finite values")
    return vectors


def remote_embed(
    endpoint: str,
    texts: Sequence[str],
    batch_size: int = 32,
    timeout: float = 30.0,
    session=None,
    retries: int = 2,
) -> list[np.ndarray]:
    """POST texts to the embed endpoint in batches, preserving order.

    Vectors whose norm deviates from 1 by more than 1e-6 are re-normalized
    client-side. Transport failures are retried, protocol violations are
    fatal.
    """
    if not texts:
        return []
    session = session or requests.Session()
    url = endpoint.rstrip("/") + "/embed"
    out: list[np.ndarray] = []
    for lo in range(0, len(texts), batch_size):
        chunk = list(texts[lo : lo + batch_size])
        payload = None
        for attempt in range(retries + 1):
            try:
                resp = session.post(url, json={"texts": chunk}, timeout=timeout)
                resp.raise_for_status()
                payload = resp.json()
                break
            except requests.RequestException as exc:
                if attempt == retries:
                    raise EmbeddingTransportError(f"embed request failed: {exc}") from exc
        vectors = _parse_vectors(payload, len(chunk))
        for vec in vectors:
            norm = float(np.linalg.norm(vec))
            if norm == 0.0:
                raise ProtocolError("embed payload contains a zero vector")
            if abs(norm - 1.0) > 1e-6:
                vec = vec / norm
            out.append(vec)
    return out


class RemoteEmbedder:
    """EmbeddingProvider speaking the embed HTTP protocol.

    Calls are serialized internally; requests.Session is not safe under
    concurrent use.
    """

    def __init__(self, endpoint: str, batch_size: int = 32, timeout: float = 30.0, session=None):
        self.endpoint = endpoint.rstrip("/")
        self.batch_size = batch_size
        self.timeout = timeout
        self.session = session or requests.Session()
        self._dim: int | None = None
        self._model: str | None = None
        self._lock = threading.Lock()

    def _health(self) -> None:
        try:
            resp = self.session.get(self.endpoint + "/health", timeout=self.timeout)
            resp.raise_for_status()
            data = resp.json()
            self._dim = int(data["dim"])
            self._model = str(data.get("model", "unknown"))
        except requests.RequestException as exc:
            raise EmbeddingTransportError(f"health check failed: {exc}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed health payload: {exc}") from exc

    @property
    def identity(self) -> str:
        if self._model is None:
            self._health()
        return f"remote:{self._model}:{self._dim}"

    def dim(self) -> int:
        if self._dim is None:
            self._health()
        return self._dim

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        with self._lock:
            vectors = remote_embed(
                self.endpoint, texts, batch_size=self.batch_size,
                timeout=self.timeout, session=self.session,
            )
        if vectors and self._dim is not None and vectors[0].size != self._dim:
            raise ProtocolError(f"embed dim {vectors[0].size} != health dim {self._dim}")
        return vectors


def clamped_relevance(phrase_vec: np.ndarray, title_vec: np.ndarray) -> float:
    """Relevance used downstream: cosine clamped to [0, 1]."""
    return max(0.0, cosine_sim(phrase_vec, title_vec))


def build_provider(spec: str, cache_path: str | Path | None = None) -> EmbeddingProvider:
    """Construct a provider from a config string.

    Accepted forms: "hash:<dim>", "remote:<url>", "file:<path>" (frozen
    cache). A cache_path wraps hash/remote providers in the file cache.
    """
    kind, _, arg = spec.partition(":")
    provider: EmbeddingProvider
    if kind == "hash":
        provider = HashEmbedder(dim=int(arg) if arg else 256)
    elif kind == "remote":
        if not arg:
            raise ValueError("remote embedder needs a URL: remote:<url>")
        provider = RemoteEmbedder(arg)
    elif kind == "file":
        if not arg:
            raise ValueError("file embedder needs a path: file:<path>")
        return CachedEmbedder(CacheStore(arg), provider=None)
    else:
        raise ValueError(f"unknown embedder spec {spec!r}")
    if cache_path is not None:
        return CachedEmbedder(CacheStore(cache_path), provider=provider)
    return provider


def embed_unique(provider: EmbeddingProvider, texts: Iterable[str]) -> dict[str, np.ndarray]:
    """Embed distinct texts once; mapping keyed by the raw text."""
    distinct: list[str] = []
    seen = set()
    for t in texts:
        if t not in seen:
            seen.add(t)
            distinct.append(t)
    vectors = provider.embed_batch(distinct)
    if len(vectors) != len(distinct):
        raise ProtocolError(f"provider returned {len(vectors)} vectors for {len(distinct)} texts")
    return dict(zip(distinct, vectors))
