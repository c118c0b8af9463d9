"""End-to-end wire check: a live uvicorn server answering the measurement
pipeline's own HTTP client. Skipped when the framelens package is not
installed alongside."""

import socket
import subprocess
import sys
import time

import pytest

framelens_scorer = pytest.importorskip("framelens.scorer")

from mlm_service.training import train_suite


@pytest.fixture(scope="module")
def live_server(tmp_path_factory):
    root = tmp_path_factory.mktemp("wire")
    from conftest import synthetic_two_source_corpus
    corpus = synthetic_two_source_corpus(n_instances=40, seed=2)
    train_suite(corpus, root / "models", family="tiny", epochs=2, seed=42)
    port = 8917
    proc = subprocess.Popen(
        [sys.executable, "-m", "mlm_service.serve",
         "--registry", str(root / "models" / "registry.json"),
         "--port", str(port)],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    try:
        for _ in range(120):
            try:
                with socket.create_connection(("127.0.0.1", port),
                                              timeout=0.5):
                    break
            except OSError:
                time.sleep(0.25)
        else:
            raise RuntimeError("server did not start")
        yield f"http://127.0.0.1:{port}"
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def test_pipeline_client_against_live_server(live_server):
    from framelens.scorer import (HttpBackend, ModelId, ScorerClient,
                                  ScorerRequest)
    client = ScorerClient(HttpBackend(live_server))

    source_model = ModelId(kind="source", topic="issues", family="tiny",
                           source="src0")
    dist = client.score(ScorerRequest(source_model, "the ___MASK___ act",
                                      top_k=3))
    assert len(dist.entries) == 3
    probs = [e.probability for e in dist.entries]
    assert probs == sorted(probs, reverse=True)

    dist = client.score(ScorerRequest(
        source_model, "the ___MASK___ act",
        candidates=("alpha1", "beta2", "alpha1 beta2")))
    assert [e.token for e in dist.entries] == \
        ["alpha1", "beta2", "alpha1 beta2"]
    assert dist.entries[2].approximate

    vector = client.embed(ModelId(kind="domain", topic="issues",
                                  family="tiny"), "alpha0 the act")
    assert len(vector) == 64

    result = client.token_importance(
        ModelId(kind="classifier", topic="issues", family="tiny"),
        "alpha0 alpha2 the act", "src0")
    assert 0.0 <= result.confidence <= 1.0
    assert len(result.word_alignment) == 4

    assert len(client.models()) == 5
