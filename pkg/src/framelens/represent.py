"""Aligned, normalized framing vectors.

For one prompt, each source's masked-token distribution becomes a vector over
a shared vocabulary: the union of all sources' top-K tokens (zero-filled
where a token is missing from a source), or the fixed candidate list for
constrained manual prompts. Values are optionally normalized by a reference
model's probability for the same token: the plain pretrained base model
("general") or the pooled-domain model ("domain"). Normalized values are
ratios, not probabilities, and are deliberately not re-normalized to sum
to 1; downstream cosine distance is per-vector scale-tolerant.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .prompts import MaskedPrompt
from .scorer import (PROBABILITY_FLOOR, ModelId, ScoredToken, ScorerClient,
                     ScorerError, ScorerRequest, TokenDistribution,
                     TransportError)

log = logging.getLogger(__name__)

NORMALIZATION_MODES = ("none", "general", "domain")


class RepresentationError(ValueError):
    pass


@dataclass
class FramingMatrix:
    """Per-source framing vectors for one prompt over a shared vocabulary."""

    prompt_id: str
    vocabulary: list[str]
    rows: dict[str, list[float]]

    def __post_init__(self):
        for source, row in self.rows.items():
            if len(row) != len(self.vocabulary):
                raise RepresentationError(
                    f"prompt {self.prompt_id!r}: row for {source!r} has "
                    f"{len(row)} entries, vocabulary has "
                    f"{len(self.vocabulary)}")
            if any(v < 0 for v in row):
                raise RepresentationError(
                    f"prompt {self.prompt_id!r}: negative entry for "
                    f"{source!r}")

    def sources(self) -> list[str]:
        return sorted(self.rows)


@dataclass
class TopicRepresentation:
    topic: str
    matrices: list[FramingMatrix]
    skipped: list[tuple[str, str]] = field(default_factory=list)

    @property
    def prompt_count(self) -> int:
        return len(self.matrices)

    def sources(self) -> list[str]:
        if not self.matrices:
            return []
        return self.matrices[0].sources()


def normalize(finetuned: TokenDistribution,
              reference: TokenDistribution | None,
              mode: str) -> TokenDistribution:
    """Divide each fine-tuned probability by the reference probability of the
    same token (floored at 1e-12; floored entries are flagged). Mode "none"
    returns the input unchanged. The reference must cover every token."""
    if mode not in NORMALIZATION_MODES:
        raise RepresentationError(f"unknown normalization mode {mode!r}")
    if mode == "none":
        return finetuned
    if reference is None:
        raise RepresentationError(f"mode {mode!r} requires a reference")
    ref_map = reference.as_map()
    missing = [t for t in finetuned.tokens() if t not in ref_map]
    if missing:
        raise RepresentationError(
            f"reference is missing tokens: {', '.join(sorted(missing))}")
    entries = []
    for e in finetuned.entries:
        ref_p = ref_map[e.token]
        floored = ref_p < PROBABILITY_FLOOR
        entries.append(ScoredToken(
            e.token, e.probability / max(ref_p, PROBABILITY_FLOOR),
            approximate=e.approximate, floored=floored))
    return TokenDistribution(
        prompt_id=finetuned.prompt_id, model=finetuned.model,
        entries=entries, candidate_order=finetuned.candidate_order)


def align(distributions: dict[str, TokenDistribution],
          prompt_id: str) -> FramingMatrix:
    """Union-align distributions: vocabulary is the sorted union of tokens
    across sources; a source's value for a token it did not predict is 0."""
    if not distributions:
        raise RepresentationError("no distributions to align")
    vocabulary = sorted({t for d in distributions.values()
                         for t in d.tokens()})
    rows = {}
    for source, dist in distributions.items():
        values = dist.as_map()
        rows[source] = [values.get(token, 0.0) for token in vocabulary]
    return FramingMatrix(prompt_id, vocabulary, rows)


def _candidate_matrix(prompt: MaskedPrompt,
                      distributions: dict[str, TokenDistribution],
                      ) -> FramingMatrix:
    # constrained prompts keep the candidate order; no union needed
    vocabulary = list(prompt.candidates)
    rows = {}
    for source, dist in distributions.items():
        values = dist.as_map()
        rows[source] = [values[c] for c in vocabulary]
    return FramingMatrix(prompt.id, vocabulary, rows)


def _reference_model(mode: str, topic: str, family: str) -> ModelId:
    if mode == "general":
        return ModelId(kind="base", topic=topic, family=family)
    return ModelId(kind="domain", topic=topic, family=family)


def build_topic_representation(prompts: list[MaskedPrompt],
                               sources: list[str],
                               client: ScorerClient,
                               mode: str = "none",
                               k: int = 10,
                               family: str = "default",
                               ) -> TopicRepresentation:
    """One framing matrix per prompt for one topic.

    Prompts with candidate constraints are scored in candidates mode
    (vocabulary = candidate list); automatic prompts are scored top-K per
    source and union-aligned. Reference probabilities for normalization are
    fetched in candidates mode restricted to the final vocabulary, one call
    per prompt. Prompts whose scoring fails are skipped with a diagnostic;
    more than 10% skipped aborts the run.
    """
    if mode not in NORMALIZATION_MODES:
        raise RepresentationError(f"unknown normalization mode {mode!r}")
    if not prompts:
        raise RepresentationError("no prompts")
    topics = {p.topic for p in prompts}
    if len(topics) != 1:
        raise RepresentationError(f"prompts span several topics: "
                                  f"{sorted(topics)}")
    topic = prompts[0].topic

    matrices = []
    skipped: list[tuple[str, str]] = []
    for prompt in prompts:
        try:
            matrices.append(
                _build_matrix(prompt, sources, client, mode, k, family))
        except (ScorerError, TransportError) as exc:
            log.warning("prompt %s skipped: %s", prompt.id, exc)
            skipped.append((prompt.id, str(exc)))
    if len(skipped) > 0.10 * len(prompts):
        raise RepresentationError(
            f"{len(skipped)} of {len(prompts)} prompts failed scoring "
            f"(> 10%); first failure: {skipped[0][1]}")
    matrices.sort(key=lambda m: m.prompt_id)
    return TopicRepresentation(topic=topic, matrices=matrices,
                               skipped=skipped)


def _build_matrix(prompt: MaskedPrompt, sources: list[str],
                  client: ScorerClient, mode: str, k: int,
                  family: str) -> FramingMatrix:
    models = [ModelId(kind="source", topic=prompt.topic, family=family,
                      source=s) for s in sources]
    if prompt.candidates is not None:
        requests_ = [ScorerRequest(m, prompt.text_with_mask,
                                   candidates=prompt.candidates,
                                   prompt_id=prompt.id) for m in models]
        vocabulary = list(prompt.candidates)
    else:
        requests_ = [ScorerRequest(m, prompt.text_with_mask, top_k=k,
                                   prompt_id=prompt.id) for m in models]
        vocabulary = None
    per_source = dict(zip(sources, client.score_many(requests_)))

    if vocabulary is None:
        vocabulary = sorted({t for d in per_source.values()
                             for t in d.tokens()})

    if mode != "none":
        ref = client.score(ScorerRequest(
            _reference_model(mode, prompt.topic, family),
            prompt.text_with_mask, candidates=tuple(vocabulary),
            prompt_id=prompt.id))
        per_source = {s: normalize(d, ref, mode)
                      for s, d in per_source.items()}
        floored = sum(1 for d in per_source.values()
                      for e in d.entries if e.floored)
        if floored:
            log.warning("prompt %s: %d entr(ies) hit the probability floor",
                        prompt.id, floored)

    if prompt.candidates is not None:
        return _candidate_matrix(prompt, per_source)
    return align(per_source, prompt.id)


# ---------------------------------------------------------------------------
# representation files
# ---------------------------------------------------------------------------

def save_representation(rep: TopicRepresentation, path: str | Path, *,
                        mode: str, k: int, family: str) -> None:
    """Write one topic's representation with its run manifest."""
    doc = {
        "topic": rep.topic,
        "mode": mode,
        "k": k,
        "family": family,
        "skipped": [{"prompt_id": pid, "reason": reason}
                    for pid, reason in rep.skipped],
        "matrices": [{"prompt_id": m.prompt_id,
                      "vocabulary": m.vocabulary,
                      "rows": {s: m.rows[s] for s in sorted(m.rows)}}
                     for m in rep.matrices],
    }
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, sort_keys=True, indent=1)
        fh.write("\n")


def load_representation(path: str | Path) -> tuple[TopicRepresentation, dict]:
    """Read a representation file; returns the representation and its
    manifest (mode, k, family, skipped)."""
    with Path(path).open("r", encoding="utf-8") as fh:
        doc = json.load(fh)
    matrices = [FramingMatrix(m["prompt_id"], list(m["vocabulary"]),
                              {s: [float(x) for x in row]
                               for s, row in m["rows"].items()})
                for m in doc["matrices"]]
    skipped = [(s["prompt_id"], s["reason"]) for s in doc.get("skipped", [])]
    manifest = {"mode": doc["mode"], "k": doc["k"], "family": doc["family"],
                "skipped": len(skipped)}
    return TopicRepresentation(doc["topic"], matrices, skipped), manifest
