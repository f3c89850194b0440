"""FastAPI application for the embed HTTP protocol."""

from __future__ import annotations

import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .backends import Backend, load_backend

MAX_TEXT_CHARS = 8192


@dataclass
class ServiceConfig:
    model: str = "hash:384"
    port: int = 8099
    max_batch: int = 64
    normalize: bool = True

    def __post_init__(self):
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")


class EmbedRequest(BaseModel):
    texts: list[str]


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.backend = load_backend(config.model)
        yield
        app.state.backend = None

    app = FastAPI(title="embed-service", lifespan=lifespan)
    app.state.backend = None
    app.state.config = config
    inference_lock = threading.Lock()

    def backend_or_503() -> Backend:
        backend = app.state.backend
        if backend is None:
            raise HTTPException(status_code=503, detail="model is loading")
        return backend

    @app.get("/health")
    def health():
        backend = backend_or_503()
        return {"dim": backend.dim, "model": backend.name}

    @app.post("/embed")
    def embed(request: EmbedRequest):
        backend = backend_or_503()
        texts = request.texts
        if len(texts) == 0:
            raise HTTPException(status_code=400, detail="texts must be non-empty")
        if len(texts) > config.max_batch:
            raise HTTPException(
                status_code=413, detail=f"batch of {len(texts)} exceeds max {config.max_batch}"
            )
        for i, text in enumerate(texts):
            if len(text) > MAX_TEXT_CHARS:
                raise HTTPException(
                    status_code=400, detail=f"text {i} exceeds {MAX_TEXT_CHARS} characters"
                )
        try:
            with inference_lock:
                vectors = backend.embed(texts)
        except Exception as exc:  # model failure
            raise HTTPException(status_code=500, detail=f"embedding failed: {exc}") from exc
        vectors = np.asarray(vectors, dtype=np.float64)
        if config.normalize:
            norms = np.linalg.norm(vectors, axis=1, keepdims=True)
            norms[norms == 0.0] = 1.0
            vectors = vectors / norms
        return {"dim": backend.dim, "vectors": vectors.tolist()}

    return app
