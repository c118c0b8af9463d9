"""Acceptance tests for the service: the wire contract against a small
checkpoint and the toy fine-tuning smoke test. One pass/fail line each; run
with ``pytest tests/test_acceptance.py -v -s``."""

import hashlib
import time
from contextlib import contextmanager
from pathlib import Path

import pytest

from mlm_service.training import (create_base_checkpoint,
                                  finetune_classifier, finetune_mlm,
                                  masked_loss)


@contextmanager
def criterion(number, description):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[criterion {number:2d}] FAIL  {description}")
        raise
    elapsed = time.perf_counter() - start
    print(f"[criterion {number:2d}] PASS  {description} ({elapsed:.1f}s)")


def test_criterion_11_service_contract(base_client):
    with criterion(11, "wire contract against a small checkpoint"):
        start = time.perf_counter()
        model_ref = {"kind": "base", "topic": "issues", "family": "tiny"}

        response = base_client.post("/score", json={
            "model": model_ref, "text": "the ___MASK___ act today",
            "mode": {"top_k": 8}})
        assert response.status_code == 200
        entries = response.json()["entries"]
        assert len(entries) == 8
        probs = [e["probability"] for e in entries]
        assert probs == sorted(probs, reverse=True)
        assert all(0.0 <= p <= 1.0 for p in probs)

        candidates = ["beta3", "alpha1", "the", "alpha0"]
        response = base_client.post("/score", json={
            "model": model_ref, "text": "the ___MASK___ act today",
            "mode": {"candidates": candidates}})
        assert response.status_code == 200
        assert [e["token"]
                for e in response.json()["entries"]] == candidates

        for body in (
            {"model": model_ref, "text": "the ___MASK___ act today",
             "mode": {"top_k": 8}},
            {"model": model_ref, "text": "the ___MASK___ act today",
             "mode": {"candidates": candidates}},
            {"model": model_ref, "text": "alpha0 the act"},
        ):
            path = "/embed" if "mode" not in body else "/score"
            first = base_client.post(path, json=body)
            second = base_client.post(path, json=body)
            assert first.content == second.content   # byte-identical

        response = base_client.get("/models")
        assert response.json()["models"][0]["key"] == "base:-:issues:tiny"

        missing = base_client.post("/score", json={
            "model": {"kind": "source", "source": "nope", "topic": "issues",
                      "family": "tiny"},
            "text": "a ___MASK___ b", "mode": {"top_k": 1}})
        assert missing.status_code == 404
        assert "model not registered" in missing.json()["error"]

        malformed = base_client.post("/score", json={"text": "x"})
        assert malformed.status_code == 422

        both_modes = base_client.post("/score", json={
            "model": model_ref, "text": "a ___MASK___ b",
            "mode": {"top_k": 1, "candidates": ["x", "y"]}})
        assert both_modes.status_code == 400

        assert time.perf_counter() - start < 120.0


def test_criterion_12_toy_finetune_smoke(tmp_path, corpus):
    with criterion(12, "toy fine-tune reduces loss; classifier separates"):
        start = time.perf_counter()
        train = [r for i, r in enumerate(corpus) if i % 5 != 0]
        dev = [r for i, r in enumerate(corpus) if i % 5 == 0]
        base = create_base_checkpoint([r["text"] for r in train],
                                      tmp_path / "base", seed=42)

        tuned = finetune_mlm([r["text"] for r in train], base,
                             tmp_path / "tuned", epochs=10, batch_size=16,
                             seed=42)
        held_out = [r["text"] for r in dev]
        base_loss = masked_loss(base, held_out)
        tuned_loss = masked_loss(tuned, held_out)
        print(f"    held-out masked loss {base_loss:.3f} -> {tuned_loss:.3f}")
        assert tuned_loss < base_loss

        clf_dir, accuracies = finetune_classifier(
            train, dev, base, tmp_path / "clf", epochs=10, batch_size=16,
            seed=42)
        print(f"    best dev accuracy {max(accuracies):.3f}")
        assert max(accuracies) > 0.9
        assert (Path(clf_dir) / "model.safetensors").is_file()

        assert time.perf_counter() - start < 900.0


def test_finetune_is_deterministic(tmp_path, corpus):
    texts = [r["text"] for r in corpus[:60]]
    base = create_base_checkpoint(texts, tmp_path / "base", seed=1)
    digests = []
    for run in ("a", "b"):
        out = finetune_mlm(texts, base, tmp_path / f"run-{run}", epochs=3,
                           batch_size=16, seed=42)
        digests.append(hashlib.sha256(
            (out / "model.safetensors").read_bytes()).hexdigest())
    assert digests[0] == digests[1]
