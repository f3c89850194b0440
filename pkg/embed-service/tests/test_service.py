from __future__ import annotations

import math

import pytest
from fastapi.testclient import TestClient

from embed_service.app import ServiceConfig, create_app
from embed_service.backends import HashBackend, load_backend


@pytest.fixture()
def client():
    app = create_app(ServiceConfig(model="hash:64", max_batch=8))
    with TestClient(app) as client:  # context manager runs the lifespan
        yield client


def norm(vector):
    return math.sqrt(sum(x * x for x in vector))


def test_health_reports_dim_and_model(client):
    response = client.get("/health")
    assert response.status_code == 200
    payload = response.json()
    assert payload["dim"] == 64
    assert payload["model"] == "hash-trigram-64"


def test_health_503_before_startup():
    app = create_app(ServiceConfig(model="hash:64"))
    with TestClient(app) as client:
        app.state.backend = None  # simulate a model still loading
        assert client.get("/health").status_code == 503
        assert client.post("/embed", json={"texts": ["x"]}).status_code == 503


def test_embed_unit_norm_and_order(client):
    texts = ["first phrase", "second phrase", "third phrase"]
    payload = client.post("/embed", json={"texts": texts}).json()
    assert payload["dim"] == 64
    assert len(payload["vectors"]) == 3
    for vector in payload["vectors"]:
        assert abs(norm(vector) - 1.0) <= 1e-6
    # order preserved: each row equals the single-text embedding
    for text, vector in zip(texts, payload["vectors"]):
        single = client.post("/embed", json={"texts": [text]}).json()["vectors"][0]
        assert vector == single


def test_same_text_twice_identical(client):
    payload = client.post("/embed", json={"texts": ["repeat me", "repeat me"]}).json()
    assert payload["vectors"][0] == payload["vectors"][1]


def test_embed_dim_consistent_with_health(client):
    health_dim = client.get("/health").json()["dim"]
    embed = client.post("/embed", json={"texts": ["abc"]}).json()
    assert embed["dim"] == health_dim
    assert all(len(v) == health_dim for v in embed["vectors"])


def test_empty_batch_is_400(client):
    assert client.post("/embed", json={"texts": []}).status_code == 400


def test_oversize_batch_is_413(client):
    texts = [f"t{i}" for i in range(9)]  # max_batch = 8
    assert client.post("/embed", json={"texts": texts}).status_code == 413


def test_overlong_text_is_400(client):
    assert client.post("/embed", json={"texts": ["x" * 8193]}).status_code == 400


def test_cosine_of_title_with_itself_across_requests(client):
    title = "Robust dependency parsing with stack pointer networks"
    a = client.post("/embed", json={"texts": [title]}).json()["vectors"][0]
    b = client.post("/embed", json={"texts": [title]}).json()["vectors"][0]
    dot = sum(x * y for x, y in zip(a, b))
    assert abs(dot / (norm(a) * norm(b)) - 1.0) <= 1e-6


def test_model_failure_is_500():
    app = create_app(ServiceConfig(model="hash:64"))

    class Exploding:
        name = "boom"
        dim = 64

        def embed(self, texts):
            raise RuntimeError("kaput")

    with TestClient(app, raise_server_exceptions=False) as client:
        app.state.backend = Exploding()
        assert client.post("/embed", json={"texts": ["x"]}).status_code == 500


def test_backend_specs():
    assert load_backend("hash:32").dim == 32
    with pytest.raises(ValueError):
        load_backend("st:")
    with pytest.raises(ValueError):
        load_backend("nonsense")
    with pytest.raises(ValueError):
        HashBackend(dim=2)


def test_config_validates_max_batch():
    with pytest.raises(ValueError):
        ServiceConfig(max_batch=0)
