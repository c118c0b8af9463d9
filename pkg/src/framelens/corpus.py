"""Corpus handling: paragraph splitting, train/dev partitioning, instance files.

Instances are the atoms of every later stage: bounded-length text units
labeled with a source and a topic. "Words" throughout this module are
whitespace-delimited tokens; punctuation stays attached to its word.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger(__name__)

_TERMINALS = ".!?"


class CorpusError(ValueError):
    pass


def word_count(text: str) -> int:
    return len(text.split())


@dataclass(frozen=True)
class Instance:
    """One bounded-length text unit labeled with its source and topic."""

    id: str
    text: str
    source: str
    topic: str
    word_count: int

    def __post_init__(self):
        if not self.text:
            raise CorpusError(f"instance {self.id!r}: text is empty")
        if self.word_count != word_count(self.text):
            raise CorpusError(
                f"instance {self.id!r}: word_count {self.word_count} != "
                f"{word_count(self.text)} whitespace words"
            )

    @classmethod
    def make(cls, id: str, text: str, source: str, topic: str) -> "Instance":
        return cls(id=id, text=text, source=source, topic=topic,
                   word_count=word_count(text))


@dataclass(frozen=True)
class CorpusConfig:
    max_words: int = 256
    dev_fraction: float = 0.10
    split_seed: int = 42

    def __post_init__(self):
        if self.max_words <= 0:
            raise CorpusError("max_words must be positive")
        if not 0.0 < self.dev_fraction < 1.0:
            raise CorpusError("dev_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class ParagraphChunk:
    """A piece of a paragraph produced by the greedy sentence-level splitter.

    ``over_length`` marks a chunk consisting of a single sentence longer than
    the word limit; such sentences are kept whole rather than hard-split.
    """

    text: str
    word_count: int
    over_length: bool = False


def split_sentences(text: str) -> list[str]:
    """Split text into sentences on a simple deterministic rule.

    A boundary is a run of terminal punctuation (. ! ?) followed by
    whitespace and an uppercase letter, or by the end of the text.
    Abbreviations are not treated specially.
    """
    sentences = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] not in _TERMINALS:
            i += 1
            continue
        j = i + 1
        while j < n and text[j] in _TERMINALS:
            j += 1
        k = j
        while k < n and text[k].isspace():
            k += 1
        if k > j and (k == n or text[k].isupper()):
            piece = text[start:j].strip()
            if piece:
                sentences.append(piece)
            start = k
            i = k
        else:
            i = j
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def split_paragraph(paragraph: str, config: CorpusConfig) -> list[ParagraphChunk]:
    """Greedily pack whole sentences into chunks of at most ``max_words`` words.

    A paragraph already within the limit is returned unchanged as a single
    chunk. A single sentence longer than the limit is kept whole and flagged.
    Word counts of the chunks always sum to the paragraph's word count.
    """
    if not paragraph or not paragraph.strip():
        raise CorpusError("empty paragraph")
    total = word_count(paragraph)
    if total <= config.max_words:
        return [ParagraphChunk(paragraph, total)]

    chunks: list[ParagraphChunk] = []
    current: list[str] = []
    current_wc = 0

    def flush():
        nonlocal current, current_wc
        chunks.append(ParagraphChunk(
            " ".join(current), current_wc,
            over_length=current_wc > config.max_words,
        ))
        current, current_wc = [], 0

    for sentence in split_sentences(paragraph):
        wc = word_count(sentence)
        if current and current_wc + wc > config.max_words:
            flush()
        current.append(sentence)
        current_wc += wc
    if current:
        flush()
    return chunks


def partition(instances: list[Instance],
              config: CorpusConfig) -> tuple[list[Instance], list[Instance]]:
    """Split instances into train/dev, stratified per (source, topic).

    Each stratum contributes round(dev_fraction * stratum size) instances to
    dev, chosen by a shuffle seeded from ``split_seed`` and the stratum key,
    so the result is deterministic and independent of input grouping. Strata
    with fewer than 2 instances go entirely to train (with a warning).
    """
    if not instances:
        raise CorpusError("no instances to partition")
    strata: dict[tuple[str, str], list[int]] = {}
    for i, inst in enumerate(instances):
        strata.setdefault((inst.source, inst.topic), []).append(i)

    dev_indices: set[int] = set()
    for key in sorted(strata):
        indices = strata[key]
        if len(indices) < 2:
            log.warning("stratum %s has %d instance(s); all assigned to train",
                        key, len(indices))
            continue
        n_dev = round(config.dev_fraction * len(indices))
        rng = random.Random(f"{config.split_seed}|{key[0]}|{key[1]}")
        shuffled = list(indices)
        rng.shuffle(shuffled)
        dev_indices.update(shuffled[:n_dev])

    train = [inst for i, inst in enumerate(instances) if i not in dev_indices]
    dev = [inst for i, inst in enumerate(instances) if i in dev_indices]
    return train, dev


_REQUIRED_FIELDS = ("id", "text", "source", "topic")


def save_instances(instances: list[Instance], path: str | Path) -> None:
    """Write instances as UTF-8 line-delimited JSON records."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for inst in instances:
            record = {"id": inst.id, "text": inst.text,
                      "source": inst.source, "topic": inst.topic}
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def load_instances(path: str | Path) -> list[Instance]:
    """Read instances from a line-delimited JSON file. Inverse of save."""
    path = Path(path)
    instances = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: line {lineno}: invalid JSON ({exc})")
            for field in _REQUIRED_FIELDS:
                if field not in record or not isinstance(record[field], str):
                    raise CorpusError(
                        f"{path}: line {lineno}: missing or non-string "
                        f"field {field!r}")
            instances.append(Instance.make(
                record["id"], record["text"], record["source"], record["topic"]))
    return instances


def ingest_tree(root: str | Path, config: CorpusConfig) -> list[Instance]:
    """Ingest a directory tree laid out as ``<topic>/<source>/*.txt``.

    Each file is one article; blank lines separate paragraphs. Paragraphs are
    split into chunks via :func:`split_paragraph`, each chunk becoming one
    instance with id ``<topic>/<source>/<file stem>:p<i>.c<j>``.
    """
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"not a directory: {root}")
    instances = []
    over_length = 0
    for topic_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for source_dir in sorted(p for p in topic_dir.iterdir() if p.is_dir()):
            for article in sorted(source_dir.glob("*.txt")):
                text = article.read_text(encoding="utf-8")
                paragraphs = [p.strip() for p in re.split(r"\n\s*\n", text)]
                for pi, paragraph in enumerate(p for p in paragraphs if p):
                    for ci, chunk in enumerate(split_paragraph(paragraph, config)):
                        if chunk.over_length:
                            over_length += 1
                        instances.append(Instance.make(
                            f"{topic_dir.name}/{source_dir.name}/"
                            f"{article.stem}:p{pi}.c{ci}",
                            chunk.text, source_dir.name, topic_dir.name))
    if over_length:
        log.warning("%d chunk(s) exceed max_words (single over-length sentences)",
                    over_length)
    return instances
