import os

os.environ.setdefault("HF_HUB_OFFLINE", "1")

import numpy as np
import pytest

from mlm_service.app import create_app
from mlm_service.registry import ModelRegistry, ModelRegistryEntry
from mlm_service.training import create_base_checkpoint


def synthetic_two_source_corpus(n_instances=200, seed=4):
    """Separable toy corpus: each source writes from its own vocabulary."""
    rng = np.random.default_rng(seed)
    vocabularies = ([f"alpha{i}" for i in range(8)],
                    [f"beta{i}" for i in range(8)])
    shared = ["the", "act", "today"]
    instances = []
    per_source = n_instances // 2
    for g, vocab in enumerate(vocabularies):
        for i in range(per_source):
            words = rng.choice(vocab + shared, size=12)
            instances.append({"id": f"g{g}-{i}", "text": " ".join(words),
                              "source": f"src{g}", "topic": "issues"})
    return instances


@pytest.fixture(scope="session")
def corpus():
    return synthetic_two_source_corpus()


@pytest.fixture(scope="session")
def base_checkpoint(tmp_path_factory, corpus):
    root = tmp_path_factory.mktemp("base-ckpt")
    return create_base_checkpoint([r["text"] for r in corpus],
                                  root / "base", seed=42)


@pytest.fixture(scope="session")
def base_client(base_checkpoint):
    from fastapi.testclient import TestClient
    registry = ModelRegistry([], base_checkpoint.parent)
    registry.add(ModelRegistryEntry(kind="base", topic="issues",
                                    family="tiny", artifact_path="base"))
    return TestClient(create_app(registry))
