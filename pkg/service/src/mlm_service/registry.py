"""Model registry: maps (kind, source?, topic, family) keys to artifacts on
disk and lazily loads them. Artifact paths are relative to the registry
file's directory."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch
from transformers import (BertForMaskedLM, BertForSequenceClassification,
                          BertTokenizer)

KINDS = ("base", "domain", "source", "classifier")


class RegistryError(ValueError):
    pass


def model_key(kind: str, source: str | None, topic: str, family: str) -> str:
    return f"{kind}:{source or '-'}:{topic}:{family}"


@dataclass(frozen=True)
class ModelRegistryEntry:
    kind: str
    topic: str
    family: str
    artifact_path: str
    source: str | None = None
    mask_token: str = "[MASK]"
    tokenizer_id: str | None = None   # defaults to the artifact path

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RegistryError(f"unknown model kind {self.kind!r}")
        if self.kind == "source" and not self.source:
            raise RegistryError("kind 'source' requires a source")
        if self.kind != "source" and self.source is not None:
            raise RegistryError(f"kind {self.kind!r} must not carry a source")

    def key(self) -> str:
        return model_key(self.kind, self.source, self.topic, self.family)


class ModelRegistry:
    """Entries plus a lazy cache of loaded (model, tokenizer) pairs. Loaded
    artifacts are read-only; scoring never mutates them."""

    def __init__(self, entries: list[ModelRegistryEntry], root: Path):
        self.root = Path(root)
        self.entries: dict[str, ModelRegistryEntry] = {}
        for entry in entries:
            if entry.key() in self.entries:
                raise RegistryError(f"duplicate model key {entry.key()}")
            self.entries[entry.key()] = entry
        self._cache: dict[str, tuple] = {}

    @classmethod
    def from_file(cls, path: str | Path) -> "ModelRegistry":
        path = Path(path)
        with path.open("r", encoding="utf-8") as fh:
            doc = json.load(fh)
        entries = [ModelRegistryEntry(**item) for item in doc["models"]]
        return cls(entries, path.parent)

    def save(self, path: str | Path) -> None:
        doc = {"models": [
            {"kind": e.kind, "source": e.source, "topic": e.topic,
             "family": e.family, "artifact_path": e.artifact_path,
             "mask_token": e.mask_token, "tokenizer_id": e.tokenizer_id}
            for e in sorted(self.entries.values(), key=lambda e: e.key())]}
        with Path(path).open("w", encoding="utf-8") as fh:
            json.dump(doc, fh, ensure_ascii=False, sort_keys=True, indent=1)
            fh.write("\n")

    def add(self, entry: ModelRegistryEntry) -> None:
        if entry.key() in self.entries:
            raise RegistryError(f"duplicate model key {entry.key()}")
        self.entries[entry.key()] = entry

    def listing(self) -> list[dict]:
        return [{"key": e.key(), "kind": e.kind, "source": e.source,
                 "topic": e.topic, "family": e.family,
                 "mask_token": e.mask_token}
                for e in sorted(self.entries.values(), key=lambda e: e.key())]

    def load(self, key: str):
        """Return (entry, model, tokenizer) for the key, loading on first
        use. Raises KeyError for unregistered keys."""
        if key not in self.entries:
            raise KeyError(key)
        if key not in self._cache:
            entry = self.entries[key]
            path = self.root / entry.artifact_path
            if not path.exists():
                raise RegistryError(f"artifact missing for {key}: {path}")
            loader = BertForSequenceClassification \
                if entry.kind == "classifier" else BertForMaskedLM
            model = loader.from_pretrained(path, attn_implementation="eager")
            model.eval()
            tokenizer = BertTokenizer.from_pretrained(
                self.root / (entry.tokenizer_id or entry.artifact_path))
            self._cache[key] = (entry, model, tokenizer)
        return self._cache[key]
