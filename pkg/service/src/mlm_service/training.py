"""Toy-scale training: a locally built base checkpoint, per-source MLM
fine-tuning, a pooled domain model, and a source classifier with best-epoch
selection.

This environment has no model-hub access, so the "pretrained base" is a
seeded randomly initialized small BERT with a word-level vocabulary built
from the corpus; every fine-tune starts from that saved checkpoint. All
training is single-threaded CPU with fixed seeds, so repeated runs on one
machine produce byte-identical artifacts.
"""

from __future__ import annotations

import json
import logging
import re
from pathlib import Path

import torch
from transformers import (BertConfig, BertForMaskedLM,
                          BertForSequenceClassification, BertTokenizer)

from .registry import ModelRegistry, ModelRegistryEntry

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

TINY_CONFIG = dict(hidden_size=64, num_hidden_layers=2,
                   num_attention_heads=2, intermediate_size=128,
                   max_position_embeddings=128)


class TrainingError(ValueError):
    pass


def load_instances(path: str | Path) -> list[dict]:
    """Read the pipeline's instances file: line-delimited JSON records with
    id, text, source, topic."""
    instances = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            for field in ("id", "text", "source", "topic"):
                if field not in record:
                    raise TrainingError(
                        f"{path}: line {lineno}: missing field {field!r}")
            instances.append(record)
    return instances


def build_vocab(texts: list[str]) -> list[str]:
    tokens = set()
    for text in texts:
        tokens.update(_TOKEN_RE.findall(text.lower()))
    return ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + sorted(tokens)


def _seed_everything(seed: int) -> None:
    torch.manual_seed(seed)
    torch.set_num_threads(1)


def create_base_checkpoint(texts: list[str], out_dir: str | Path,
                           seed: int = 42) -> Path:
    """Build the family's base checkpoint: corpus-derived word-level
    tokenizer plus a seeded randomly initialized small masked LM."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vocab = build_vocab(texts)
    vocab_path = out_dir / "vocab.txt"
    vocab_path.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(vocab=str(vocab_path), do_lower_case=True)
    _seed_everything(seed)
    model = BertForMaskedLM(BertConfig(vocab_size=len(vocab),
                                       attn_implementation="eager",
                                       **TINY_CONFIG))
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    log.info("base checkpoint at %s (vocab %d)", out_dir, len(vocab))
    return out_dir


def _encode_batch(tokenizer, texts: list[str], max_positions: int):
    encoded = tokenizer(texts, padding=True, truncation=True,
                        max_length=max_positions, return_tensors="pt")
    return encoded["input_ids"], encoded["attention_mask"]


def _mlm_mask(input_ids, attention_mask, tokenizer, generator,
              mask_rate: float = 0.15):
    """Standard MLM corruption: mask_rate of non-special positions become
    labels; of those, 80% -> [MASK], 10% -> random token, 10% unchanged."""
    labels = input_ids.clone()
    special = torch.zeros_like(input_ids, dtype=torch.bool)
    for sid in tokenizer.all_special_ids:
        special |= input_ids == sid
    eligible = attention_mask.bool() & ~special
    scores = torch.rand(input_ids.shape, generator=generator)
    chosen = eligible & (scores < mask_rate)
    if not chosen.any():
        # tiny batches can draw nothing: force one position per row
        for row in range(input_ids.shape[0]):
            positions = torch.nonzero(eligible[row]).flatten()
            if len(positions):
                chosen[row, positions[0]] = True
    labels[~chosen] = -100
    corrupted = input_ids.clone()
    action = torch.rand(input_ids.shape, generator=generator)
    corrupted[chosen & (action < 0.8)] = tokenizer.mask_token_id
    random_ids = torch.randint(len(tokenizer), input_ids.shape,
                               generator=generator)
    swap = chosen & (action >= 0.8) & (action < 0.9)
    corrupted[swap] = random_ids[swap]
    return corrupted, labels


def finetune_mlm(texts: list[str], base_dir: str | Path, out_dir: str | Path,
                 *, epochs: int = 10, batch_size: int = 16, seed: int = 42,
                 learning_rate: float = 5e-4) -> Path:
    """Adapt the base masked LM to the given texts; saves the final-epoch
    model (only the classifier does best-epoch selection)."""
    if not texts:
        raise TrainingError("no training texts")
    base_dir, out_dir = Path(base_dir), Path(out_dir)
    _seed_everything(seed)
    tokenizer = BertTokenizer.from_pretrained(base_dir)
    model = BertForMaskedLM.from_pretrained(base_dir,
                                            attn_implementation="eager")
    if len(texts) < batch_size:
        log.warning("corpus smaller than one batch (%d < %d); proceeding",
                    len(texts), batch_size)
    generator = torch.Generator().manual_seed(seed)
    optimizer = torch.optim.AdamW(model.parameters(), lr=learning_rate)
    max_positions = model.config.max_position_embeddings
    model.train()
    for _ in range(epochs):
        order = torch.randperm(len(texts), generator=generator).tolist()
        for start in range(0, len(order), batch_size):
            batch = [texts[i] for i in order[start:start + batch_size]]
            input_ids, attention_mask = _encode_batch(tokenizer, batch,
                                                      max_positions)
            corrupted, labels = _mlm_mask(input_ids, attention_mask,
                                          tokenizer, generator)
            loss = model(input_ids=corrupted,
                         attention_mask=attention_mask,
                         labels=labels).loss
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
    model.eval()
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    return out_dir


def masked_loss(model_dir: str | Path, texts: list[str], *,
                seed: int = 7, batch_size: int = 16) -> float:
    """Mean MLM loss over the texts with a fixed masking pattern; used to
    compare a fine-tuned model against its base on held-out data."""
    tokenizer = BertTokenizer.from_pretrained(model_dir)
    model = BertForMaskedLM.from_pretrained(model_dir,
                                            attn_implementation="eager")
    model.eval()
    generator = torch.Generator().manual_seed(seed)
    losses = []
    max_positions = model.config.max_position_embeddings
    for start in range(0, len(texts), batch_size):
        batch = texts[start:start + batch_size]
        input_ids, attention_mask = _encode_batch(tokenizer, batch,
                                                  max_positions)
        corrupted, labels = _mlm_mask(input_ids, attention_mask, tokenizer,
                                      generator)
        with torch.no_grad():
            loss = model(input_ids=corrupted, attention_mask=attention_mask,
                         labels=labels).loss
        losses.append(float(loss))
    return sum(losses) / len(losses)


def best_epoch_index(accuracies: list[float]) -> int:
    """Index of the checkpoint to keep: highest dev accuracy, earliest
    epoch on ties."""
    return accuracies.index(max(accuracies))


def finetune_classifier(train: list[dict], dev: list[dict],
                        base_dir: str | Path, out_dir: str | Path, *,
                        epochs: int = 10, batch_size: int = 16,
                        seed: int = 42,
                        learning_rate: float = 5e-4) -> tuple[Path, list[float]]:
    """Train a source classifier with per-epoch dev evaluation, keeping the
    best checkpoint (earliest epoch on ties). Returns the artifact path and
    the per-epoch dev accuracies."""
    sources = sorted({r["source"] for r in train})
    if len(sources) < 2:
        raise TrainingError("classifier needs at least 2 sources")
    base_dir, out_dir = Path(base_dir), Path(out_dir)
    _seed_everything(seed)
    tokenizer = BertTokenizer.from_pretrained(base_dir)
    base_config = BertConfig.from_pretrained(base_dir)
    config = BertConfig(vocab_size=base_config.vocab_size,
                        num_labels=len(sources),
                        id2label={i: s for i, s in enumerate(sources)},
                        label2id={s: i for i, s in enumerate(sources)},
                        attn_implementation="eager", **TINY_CONFIG)
    model = BertForSequenceClassification(config)
    label_of = {s: i for i, s in enumerate(sources)}
    generator = torch.Generator().manual_seed(seed)
    optimizer = torch.optim.AdamW(model.parameters(), lr=learning_rate)
    max_positions = config.max_position_embeddings

    def evaluate() -> float:
        model.eval()
        correct = 0
        for start in range(0, len(dev), batch_size):
            batch = dev[start:start + batch_size]
            input_ids, attention_mask = _encode_batch(
                tokenizer, [r["text"] for r in batch], max_positions)
            with torch.no_grad():
                logits = model(input_ids=input_ids,
                               attention_mask=attention_mask).logits
            predictions = torch.argmax(logits, dim=-1)
            correct += sum(int(predictions[i]) == label_of[r["source"]]
                           for i, r in enumerate(batch))
        return correct / len(dev)

    accuracies = []
    best_state = None
    for epoch in range(epochs):
        model.train()
        order = torch.randperm(len(train), generator=generator).tolist()
        for start in range(0, len(order), batch_size):
            batch = [train[i] for i in order[start:start + batch_size]]
            input_ids, attention_mask = _encode_batch(
                tokenizer, [r["text"] for r in batch], max_positions)
            labels = torch.tensor([label_of[r["source"]] for r in batch])
            loss = model(input_ids=input_ids, attention_mask=attention_mask,
                         labels=labels).loss
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        accuracies.append(evaluate())
        if best_epoch_index(accuracies) == epoch:
            best_state = {k: v.clone() for k, v in model.state_dict().items()}
        log.info("classifier epoch %d: dev accuracy %.3f", epoch + 1,
                 accuracies[-1])

    log.info("keeping epoch %d of %d", best_epoch_index(accuracies) + 1,
             epochs)
    model.load_state_dict(best_state)
    model.eval()
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    return out_dir, accuracies


def train_suite(instances: list[dict], output_dir: str | Path, *,
                family: str = "tiny", epochs: int = 10, batch_size: int = 16,
                seed: int = 42, dev_instances: list[dict] | None = None,
                ) -> ModelRegistry:
    """Produce the full model suite for a corpus: one base checkpoint per
    topic family, per-(source, topic) MLM models, a pooled domain model per
    topic, and a per-topic source classifier. Writes registry.json."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    registry = ModelRegistry([], output_dir)
    dev_instances = dev_instances or []

    topics = sorted({r["topic"] for r in instances})
    base_dir = create_base_checkpoint([r["text"] for r in instances],
                                      output_dir / "base", seed=seed)
    for topic in topics:
        topic_train = [r for r in instances if r["topic"] == topic]
        topic_dev = [r for r in dev_instances if r["topic"] == topic] \
            or topic_train
        registry.add(ModelRegistryEntry(
            kind="base", topic=topic, family=family,
            artifact_path=str(base_dir.relative_to(output_dir))))

        domain_dir = finetune_mlm(
            [r["text"] for r in topic_train], base_dir,
            output_dir / f"domain-{topic}", epochs=epochs,
            batch_size=batch_size, seed=seed)
        registry.add(ModelRegistryEntry(
            kind="domain", topic=topic, family=family,
            artifact_path=str(domain_dir.relative_to(output_dir))))

        for source in sorted({r["source"] for r in topic_train}):
            texts = [r["text"] for r in topic_train
                     if r["source"] == source]
            source_dir = finetune_mlm(
                texts, base_dir, output_dir / f"source-{source}-{topic}",
                epochs=epochs, batch_size=batch_size, seed=seed)
            registry.add(ModelRegistryEntry(
                kind="source", source=source, topic=topic, family=family,
                artifact_path=str(source_dir.relative_to(output_dir))))

        classifier_dir, _ = finetune_classifier(
            topic_train, topic_dev, base_dir,
            output_dir / f"classifier-{topic}", epochs=epochs,
            batch_size=batch_size, seed=seed)
        registry.add(ModelRegistryEntry(
            kind="classifier", topic=topic, family=family,
            artifact_path=str(classifier_dir.relative_to(output_dir))))

    registry.save(output_dir / "registry.json")
    return registry
