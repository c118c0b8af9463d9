"""Masked-prompt generation.

Five automatic strategies (random sampling, classifier-attention, bigram
inner, trigram inner, bigram outer) mine prompts from dev-set instances;
manual templates expand topic terms and antonym pairs into fixed-pattern
prompts with constrained candidate tokens. Every emitted prompt contains
exactly one ``___MASK___`` sentinel.

N-gram tokenization here is lowercase, split on whitespace and punctuation,
with no stop-word removal. The automatic strategies mask surface words: the
sentinel replaces the word's core (its first through last word character),
leaving attached punctuation in place, and ``gold_token`` records the core.
"""

from __future__ import annotations

import json
import logging
import math
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .corpus import Instance
from .scorer import MASK_SENTINEL, ImportanceResult

log = logging.getLogger(__name__)

ORIGINS = ("random", "attention", "bigram_inner", "trigram_inner",
           "bigram_outer", "manual")
STRUCTURES = ("declarative", "interrogative", "association_post",
              "association_pre")
QA_CANDIDATES = ("Yes", "True", "Maybe", "No", "False")

# Default antonym inventory for manual templates. This is this package's own
# documented default, not an inventory taken from any external source.
DEFAULT_ADJECTIVE_PAIRS = (
    ("good", "bad"),
    ("helpful", "harmful"),
    ("fair", "unfair"),
    ("safe", "dangerous"),
    ("honest", "dishonest"),
)

_TOKEN_RE = re.compile(r"\w+")


class PromptError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercased tokens split on whitespace and punctuation."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class MaskedPrompt:
    id: str
    text_with_mask: str
    topic: str
    origin: str
    anchor: str
    candidates: tuple[str, ...] | None = None
    gold_token: str | None = None

    def __post_init__(self):
        n = self.text_with_mask.count(MASK_SENTINEL)
        if n != 1:
            raise PromptError(
                f"prompt {self.id!r}: expected exactly one mask sentinel, "
                f"found {n}")
        if self.origin not in ORIGINS:
            raise PromptError(f"prompt {self.id!r}: unknown origin "
                              f"{self.origin!r}")
        if self.candidates is not None:
            if len(self.candidates) < 2:
                raise PromptError(
                    f"prompt {self.id!r}: candidates need length >= 2")
            if len(set(self.candidates)) != len(self.candidates):
                raise PromptError(
                    f"prompt {self.id!r}: duplicate candidates")


@dataclass(frozen=True)
class PromptGenConfig:
    rs_instance_fraction: float = 0.5
    rs_word_fraction: float = 0.1
    attention_confidence_threshold: float = 0.7
    attention_layer: int = 12
    bi_min_sources: int = 5
    bo_min_sources: int | str = "all"
    seed: int = 42

    def __post_init__(self):
        for name in ("rs_instance_fraction", "rs_word_fraction",
                     "attention_confidence_threshold"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise PromptError(f"{name} must lie in (0, 1]")


@dataclass(frozen=True)
class ManualTemplate:
    """One manual pattern instantiation.

    ``slot_word`` is an adjective, or a noun with its indefinite article; in
    qa mode it fills the pattern slot, in single mode it names the antonym
    pair whose members become the candidates.
    """

    structure: str
    answer_mode: str
    topic: str
    topic_term: str
    slot_word: str
    single_candidates: tuple[str, str] | None = None

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise PromptError(f"unknown structure {self.structure!r}")
        if self.answer_mode not in ("qa", "single"):
            raise PromptError(f"unknown answer mode {self.answer_mode!r}")


# ---------------------------------------------------------------------------
# shared n-gram mining
# ---------------------------------------------------------------------------

def extract_shared_ngrams(dev_sets: dict[str, list[Instance]], n: int,
                          min_sources: int | str) -> list[tuple[str, ...]]:
    """N-grams occurring in the dev set of at least ``min_sources`` distinct
    sources (``"all"`` means every source), sorted lexicographically."""
    if n not in (2, 3):
        raise PromptError(f"n must be 2 or 3, got {n}")
    n_sources = len(dev_sets)
    threshold = n_sources if min_sources == "all" else int(min_sources)
    if threshold < 1 or n_sources < threshold:
        raise PromptError(
            f"need at least {min_sources} sources, have {n_sources}")
    counts: dict[tuple[str, ...], int] = {}
    for source in dev_sets:
        grams: set[tuple[str, ...]] = set()
        for inst in dev_sets[source]:
            tokens = tokenize(inst.text)
            grams.update(tuple(tokens[i:i + n])
                         for i in range(len(tokens) - n + 1))
        for gram in grams:
            counts[gram] = counts.get(gram, 0) + 1
    return sorted(g for g, c in counts.items() if c >= threshold)


# ---------------------------------------------------------------------------
# surface-word masking
# ---------------------------------------------------------------------------

def _core_span(word: str) -> tuple[int, int] | None:
    first = _TOKEN_RE.search(word)
    if first is None:
        return None
    last = max(i for i, ch in enumerate(word) if _TOKEN_RE.match(ch))
    return first.start(), last + 1


def _mask_word(words: list[str], index: int) -> tuple[str, str]:
    span = _core_span(words[index])
    if span is None:
        raise PromptError(f"word {words[index]!r} has no maskable core")
    start, end = span
    masked = words[index][:start] + MASK_SENTINEL + words[index][end:]
    gold = words[index][start:end]
    return " ".join(words[:index] + [masked] + words[index + 1:]), gold


def _single_token_view(words: list[str]) -> list[str | None]:
    # surface words that normalize to exactly one token participate in
    # n-gram occurrence matching
    view = []
    for word in words:
        tokens = tokenize(word)
        view.append(tokens[0] if len(tokens) == 1 else None)
    return view


def _occurrences(view: list[str | None],
                 gram: tuple[str, ...]) -> Iterable[int]:
    n = len(gram)
    for i in range(len(view) - n + 1):
        if all(view[i + k] == gram[k] for k in range(n)):
            yield i


# ---------------------------------------------------------------------------
# automatic strategies
# ---------------------------------------------------------------------------

def generate_bigram_outer(instance: Instance,
                          shared_bigrams: list[tuple[str, str]],
                          ) -> list[MaskedPrompt]:
    """Per occurrence of each shared bigram: mask the word immediately before
    it and the word immediately after it (up to two prompts). Occurrences at
    the text start emit only the after-side prompt, at the end only the
    before-side one."""
    words = instance.text.split()
    view = _single_token_view(words)
    prompts = []
    for gram in shared_bigrams:
        anchor = " ".join(gram)
        for occ, i in enumerate(_occurrences(view, tuple(gram))):
            for side, j in (("before", i - 1), ("after", i + 2)):
                if not 0 <= j < len(words) or _core_span(words[j]) is None:
                    continue
                text, gold = _mask_word(words, j)
                prompts.append(MaskedPrompt(
                    id=f"{instance.id}:bo:{'_'.join(gram)}:{occ}:{side}",
                    text_with_mask=text, topic=instance.topic,
                    origin="bigram_outer", anchor=anchor, gold_token=gold))
    return prompts


def _generate_ngram_inner(instance: Instance, shared_ngrams, n: int,
                          origin: str, tag: str) -> list[MaskedPrompt]:
    words = instance.text.split()
    view = _single_token_view(words)
    prompts = []
    for gram in shared_ngrams:
        if len(gram) != n:
            raise PromptError(f"expected {n}-gram, got {gram}")
        anchor = " ".join(gram)
        for occ, i in enumerate(_occurrences(view, tuple(gram))):
            for pos in range(n):
                text, gold = _mask_word(words, i + pos)
                prompts.append(MaskedPrompt(
                    id=f"{instance.id}:{tag}:{'_'.join(gram)}:{occ}:{pos}",
                    text_with_mask=text, topic=instance.topic,
                    origin=origin, anchor=anchor, gold_token=gold))
    return prompts


def generate_bigram_inner(instance: Instance,
                          shared_bigrams) -> list[MaskedPrompt]:
    """One prompt per bigram token position per occurrence, masking inside."""
    return _generate_ngram_inner(instance, shared_bigrams, 2,
                                 "bigram_inner", "bi")


def generate_trigram_inner(instance: Instance,
                           shared_trigrams) -> list[MaskedPrompt]:
    return _generate_ngram_inner(instance, shared_trigrams, 3,
                                 "trigram_inner", "ti")


def generate_random(instances: list[Instance],
                    config: PromptGenConfig) -> list[MaskedPrompt]:
    """Mask uniformly chosen word positions in a uniformly chosen subset of
    instances; one prompt per masked position, deterministic under the seed."""
    rng = random.Random(config.seed)
    n_selected = math.ceil(config.rs_instance_fraction * len(instances))
    selected = sorted(rng.sample(range(len(instances)), n_selected))
    prompts = []
    for idx in selected:
        inst = instances[idx]
        words = inst.text.split()
        maskable = [i for i, w in enumerate(words)
                    if _core_span(w) is not None]
        if not maskable:
            log.debug("instance %s has no maskable words; skipped", inst.id)
            continue
        n_masks = min(math.ceil(config.rs_word_fraction * inst.word_count),
                      len(maskable))
        for pos in sorted(rng.sample(maskable, n_masks)):
            text, gold = _mask_word(words, pos)
            prompts.append(MaskedPrompt(
                id=f"{inst.id}:rs:{pos}", text_with_mask=text,
                topic=inst.topic, origin="random", anchor=f"pos{pos}",
                gold_token=gold))
    return prompts


def generate_attention(instances: list[Instance],
                       importance_fn: Callable[[Instance], ImportanceResult],
                       config: PromptGenConfig) -> list[MaskedPrompt]:
    """Mask the most important word of instances whose source the classifier
    predicts correctly with confidence above the threshold.

    ``importance_fn`` wraps the scorer client's token-importance call; word
    importance is the max over the word's aligned token scores, ties broken
    by earliest position. Transport errors from the backend propagate.
    """
    prompts = []
    for inst in instances:
        result = importance_fn(inst)
        if result.predicted_source != inst.source:
            continue
        if result.confidence <= config.attention_confidence_threshold:
            continue
        words = inst.text.split()
        best = None
        best_score = None
        for wi, token_idxs in enumerate(result.word_alignment):
            if _core_span(words[wi]) is None:
                continue
            score = max(result.scores[t] for t in token_idxs)
            if best_score is None or score > best_score:
                best, best_score = wi, score
        if best is None:
            continue
        text, gold = _mask_word(words, best)
        prompts.append(MaskedPrompt(
            id=f"{inst.id}:att:{best}", text_with_mask=text,
            topic=inst.topic, origin="attention", anchor=f"pos{best}",
            gold_token=gold))
    return prompts


# ---------------------------------------------------------------------------
# manual templates
# ---------------------------------------------------------------------------

def _sentence_case(word: str) -> str:
    return word[:1].upper() + word[1:]


def _surface(structure: str, topic_term: str, slot: str) -> str:
    if structure == "declarative":
        return f"{topic_term} is {slot}."
    if structure == "interrogative":
        return f"Is {topic_term} {slot}?"
    if structure == "association_post":
        return f"{topic_term} {slot}."
    return f"{_sentence_case(slot)} {topic_term}."


def expand_manual_templates(templates: list[ManualTemplate],
                            ) -> list[MaskedPrompt]:
    """Expand templates into prompts.

    qa mode keeps the filled sentence and appends a masked answer slot with
    the five fixed candidates; single mode masks the slot itself with the
    template's antonym pair as candidates.
    """
    prompts = []
    for tpl in templates:
        slug = tpl.slot_word.replace(" ", "_")
        if tpl.answer_mode == "qa":
            text = _surface(tpl.structure, tpl.topic_term, tpl.slot_word)
            text += f" {MASK_SENTINEL}"
            candidates = QA_CANDIDATES
            anchor = f"{tpl.structure}/qa/{tpl.slot_word}"
        else:
            if tpl.single_candidates is None:
                raise PromptError(
                    f"template {tpl.structure}/{tpl.topic}/{tpl.slot_word}: "
                    "single mode requires an antonym pair")
            text = _surface(tpl.structure, tpl.topic_term, MASK_SENTINEL)
            candidates = tuple(tpl.single_candidates)
            anchor = (f"{tpl.structure}/single/"
                      f"{'-'.join(tpl.single_candidates)}")
            slug = "-".join(c.replace(" ", "_") for c in tpl.single_candidates)
        prompts.append(MaskedPrompt(
            id=f"manual:{tpl.topic}:{tpl.structure}:{tpl.answer_mode}:{slug}",
            text_with_mask=text, topic=tpl.topic, origin="manual",
            anchor=anchor, candidates=candidates))
    return prompts


def load_manual_templates(path: str | Path) -> list[ManualTemplate]:
    """Read the manual-template config file.

    JSON schema::

        {"topics": [{"topic": "...", "term": "...",
                     "pairs": [["good", "bad"], ...]}],
         "structures": [...],      # optional, default: all four
         "answer_modes": [...]}    # optional, default: ["qa", "single"]

    qa mode yields one template per pair member; single mode one per pair.
    """
    with Path(path).open("r", encoding="utf-8") as fh:
        doc = json.load(fh)
    structures = doc.get("structures", list(STRUCTURES))
    modes = doc.get("answer_modes", ["qa", "single"])
    templates = []
    for entry in doc["topics"]:
        pairs = [tuple(p) for p in entry.get("pairs",
                                             DEFAULT_ADJECTIVE_PAIRS)]
        for structure in structures:
            for mode in modes:
                for pair in pairs:
                    if len(pair) != 2:
                        raise PromptError(f"antonym pair must have two "
                                          f"members, got {pair}")
                    if mode == "qa":
                        for member in pair:
                            templates.append(ManualTemplate(
                                structure=structure, answer_mode="qa",
                                topic=entry["topic"], topic_term=entry["term"],
                                slot_word=member))
                    else:
                        templates.append(ManualTemplate(
                            structure=structure, answer_mode="single",
                            topic=entry["topic"], topic_term=entry["term"],
                            slot_word=pair[0], single_candidates=pair))
    return templates


# ---------------------------------------------------------------------------
# prompt files
# ---------------------------------------------------------------------------

def save_prompts(prompts: list[MaskedPrompt], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for p in prompts:
            record = {"id": p.id, "text_with_mask": p.text_with_mask,
                      "topic": p.topic, "origin": p.origin,
                      "anchor": p.anchor,
                      "candidates": list(p.candidates) if p.candidates else None,
                      "gold_token": p.gold_token}
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def load_prompts(path: str | Path) -> list[MaskedPrompt]:
    prompts = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PromptError(f"{path}: line {lineno}: invalid JSON ({exc})")
            try:
                prompts.append(MaskedPrompt(
                    id=record["id"],
                    text_with_mask=record["text_with_mask"],
                    topic=record["topic"], origin=record["origin"],
                    anchor=record["anchor"],
                    candidates=tuple(record["candidates"])
                    if record.get("candidates") else None,
                    gold_token=record.get("gold_token")))
            except KeyError as exc:
                raise PromptError(f"{path}: line {lineno}: missing field {exc}")
    return prompts
