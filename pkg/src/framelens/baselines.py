"""Competing source-embedding baselines.

TF-IDF (unigrams through trigrams) and LDA (collapsed Gibbs) are fit on all
instances across outlets; language-model embeddings come from the scorer
service (classifier model for lm_c, each source's fine-tuned model for
lm_m). Every method reduces to one mean embedding per outlet, and outlet
rankings reuse the measurement module's distance and ranking code unchanged.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Instance
from .measure import (DistanceMatrix, SimilarityRanking, cosine_distance,
                      similarity_rankings, UndefinedDistanceError)
from .prompts import tokenize
from .scorer import ModelId, ScorerClient, ScorerError, TransportError

log = logging.getLogger(__name__)

BASELINE_METHODS = ("tfidf", "lda", "lm_c", "lm_m")


class BaselineError(ValueError):
    pass


@dataclass
class OutletEmbedding:
    source: str
    vector: np.ndarray
    method: str

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=float)


# ---------------------------------------------------------------------------
# TF-IDF
# ---------------------------------------------------------------------------

@dataclass
class TfidfModel:
    """Bag of 1-3-grams with smoothed idf.

    Weight of gram g in document d: tf(g, d) * (ln((1+N)/(1+df(g))) + 1),
    rows L2-normalized.
    """

    vocabulary: dict[str, int]
    document_frequencies: np.ndarray
    document_count: int

    def __post_init__(self):
        self.document_frequencies = np.asarray(self.document_frequencies,
                                               dtype=float)
        if len(self.document_frequencies) != len(self.vocabulary):
            raise BaselineError("df length does not match vocabulary")
        if self.document_count > 0 and (
                np.any(self.document_frequencies < 1)
                or np.any(self.document_frequencies > self.document_count)):
            raise BaselineError("df values must lie in [1, document_count]")

    def idf(self) -> np.ndarray:
        return np.log((1.0 + self.document_count)
                      / (1.0 + self.document_frequencies)) + 1.0


def _ngrams(tokens: list[str], max_n: int = 3) -> list[str]:
    grams = []
    for n in range(1, max_n + 1):
        grams.extend(" ".join(tokens[i:i + n])
                     for i in range(len(tokens) - n + 1))
    return grams


def tfidf_fit(instances: list[Instance], max_n: int = 3) -> TfidfModel:
    if not instances:
        raise BaselineError("empty corpus")
    doc_grams = [set(_ngrams(tokenize(inst.text), max_n))
                 for inst in instances]
    vocabulary = {g: i for i, g in
                  enumerate(sorted(set().union(*doc_grams)))}
    df = np.zeros(len(vocabulary))
    for grams in doc_grams:
        for g in grams:
            df[vocabulary[g]] += 1
    return TfidfModel(vocabulary, df, len(instances))


def tfidf_embed(model: TfidfModel, instance: Instance,
                max_n: int = 3) -> np.ndarray:
    vector = np.zeros(len(model.vocabulary))
    for gram in _ngrams(tokenize(instance.text), max_n):
        idx = model.vocabulary.get(gram)
        if idx is not None:
            vector[idx] += 1.0
    if not vector.any():
        log.warning("instance %s has no in-vocabulary terms; zero vector",
                    instance.id)
        return vector
    vector *= model.idf()
    return vector / np.linalg.norm(vector)


# ---------------------------------------------------------------------------
# LDA
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LdaConfig:
    num_topics: int = 10
    max_vocab: int = 2_000_000
    alpha: float | None = None      # default 50 / num_topics
    beta: float = 0.01
    passes: int = 2
    inference_iterations: int = 20
    seed: int = 42

    def resolved_alpha(self) -> float:
        return self.alpha if self.alpha is not None else 50.0 / self.num_topics


@dataclass
class LdaModel:
    config: LdaConfig
    vocabulary: dict[str, int]
    topic_word_counts: np.ndarray   # (K, V)
    topic_totals: np.ndarray        # (K,)

    def __post_init__(self):
        self.topic_word_counts = np.asarray(self.topic_word_counts, float)
        self.topic_totals = np.asarray(self.topic_totals, float)
        if np.any(self.topic_word_counts < 0):
            raise BaselineError("topic-word counts must be nonnegative")


def _doc_token_ids(text: str, vocabulary: dict[str, int]) -> list[int]:
    return [vocabulary[t] for t in tokenize(text) if t in vocabulary]


def lda_fit(instances: list[Instance], config: LdaConfig) -> LdaModel:
    """Collapsed Gibbs sampling: ``passes`` full sweeps over every token,
    deterministic under the seed. Vocabulary keeps the ``max_vocab`` most
    frequent terms (ties broken lexicographically)."""
    if not instances:
        raise BaselineError("empty corpus")
    freq: dict[str, int] = {}
    for inst in instances:
        for token in tokenize(inst.text):
            freq[token] = freq.get(token, 0) + 1
    kept = sorted(freq, key=lambda t: (-freq[t], t))[:config.max_vocab]
    vocabulary = {t: i for i, t in enumerate(sorted(kept))}

    docs = [_doc_token_ids(inst.text, vocabulary) for inst in instances]
    k = config.num_topics
    v = len(vocabulary)
    alpha = config.resolved_alpha()
    beta = config.beta
    rng = np.random.default_rng(config.seed)

    n_kw = np.zeros((k, v))
    n_k = np.zeros(k)
    n_dk = np.zeros((len(docs), k))
    assignments = [rng.integers(0, k, size=len(doc)) for doc in docs]
    for d, doc in enumerate(docs):
        for pos, w in enumerate(doc):
            z = assignments[d][pos]
            n_kw[z, w] += 1
            n_k[z] += 1
            n_dk[d, z] += 1

    for _ in range(config.passes):
        for d, doc in enumerate(docs):
            for pos, w in enumerate(doc):
                z = assignments[d][pos]
                n_kw[z, w] -= 1
                n_k[z] -= 1
                n_dk[d, z] -= 1
                p = (n_kw[:, w] + beta) / (n_k + v * beta) * (n_dk[d] + alpha)
                cum = np.cumsum(p)
                z = int(np.searchsorted(cum, rng.random() * cum[-1],
                                        side="right"))
                assignments[d][pos] = z
                n_kw[z, w] += 1
                n_k[z] += 1
                n_dk[d, z] += 1

    return LdaModel(config, vocabulary, n_kw, n_k)


def lda_embed(model: LdaModel, instance: Instance) -> np.ndarray:
    """Smoothed per-document topic proportions (sums to 1) from seeded
    fold-in sweeps against the frozen topic-word counts. An instance with no
    in-vocabulary tokens gets the uniform vector."""
    config = model.config
    k = config.num_topics
    alpha = config.resolved_alpha()
    doc = _doc_token_ids(instance.text, model.vocabulary)
    if not doc:
        log.warning("instance %s has no in-vocabulary tokens; uniform topic "
                    "vector", instance.id)
        return np.full(k, 1.0 / k)

    digest = hashlib.sha256(instance.text.encode("utf-8")).digest()
    rng = np.random.default_rng(
        (config.seed, int.from_bytes(digest[:8], "big")))
    v = len(model.vocabulary)
    beta = config.beta
    word_factor = (model.topic_word_counts + beta) \
        / (model.topic_totals + v * beta)[:, None]

    n_dk = np.zeros(k)
    assignments = rng.integers(0, k, size=len(doc))
    for pos, w in enumerate(doc):
        n_dk[assignments[pos]] += 1
    for _ in range(config.inference_iterations):
        for pos, w in enumerate(doc):
            z = assignments[pos]
            n_dk[z] -= 1
            p = word_factor[:, w] * (n_dk + alpha)
            cum = np.cumsum(p)
            z = int(np.searchsorted(cum, rng.random() * cum[-1],
                                    side="right"))
            assignments[pos] = z
            n_dk[z] += 1
    return (n_dk + alpha) / (len(doc) + k * alpha)


# ---------------------------------------------------------------------------
# outlet embeddings
# ---------------------------------------------------------------------------

def mean_outlet_embeddings(instances: list[Instance], embed_fn,
                           method: str) -> list[OutletEmbedding]:
    """Arithmetic mean of instance embeddings per outlet."""
    by_source: dict[str, list[np.ndarray]] = {}
    for inst in instances:
        by_source.setdefault(inst.source, []).append(
            np.asarray(embed_fn(inst), dtype=float))
    return [OutletEmbedding(source, np.mean(by_source[source], axis=0),
                            method)
            for source in sorted(by_source)]


def lm_embed_outlets(instances: list[Instance], model_kind: str,
                     client: ScorerClient, *, topic: str,
                     family: str) -> list[OutletEmbedding]:
    """Outlet embeddings from the scorer's embed endpoint. lm_c embeds every
    instance with the source classifier; lm_m embeds each instance with its
    own source's fine-tuned model. More than 10% failed instances aborts."""
    if model_kind not in ("lm_c", "lm_m"):
        raise BaselineError(f"unknown LM baseline {model_kind!r}")
    vectors: dict[str, list[np.ndarray]] = {}
    failures = []
    for inst in instances:
        if model_kind == "lm_c":
            model = ModelId(kind="classifier", topic=topic, family=family)
        else:
            model = ModelId(kind="source", topic=topic, family=family,
                            source=inst.source)
        try:
            vec = client.embed(model, inst.text)
        except (ScorerError, TransportError) as exc:
            log.warning("embed failed for %s: %s", inst.id, exc)
            failures.append(inst.id)
            continue
        vectors.setdefault(inst.source, []).append(np.asarray(vec, float))
    if len(failures) > 0.10 * len(instances):
        raise BaselineError(
            f"{len(failures)} of {len(instances)} embeddings failed (> 10%)")
    return [OutletEmbedding(source, np.mean(vectors[source], axis=0),
                            model_kind)
            for source in sorted(vectors)]


def baseline_rankings(embeddings: list[OutletEmbedding],
                      ) -> list[SimilarityRanking]:
    """Pairwise cosine distances between outlet embeddings, ranked with the
    measurement module's shared code path."""
    if len(embeddings) < 3:
        raise BaselineError("need at least 3 outlets")
    embeddings = sorted(embeddings, key=lambda e: e.source)
    outlets = [e.source for e in embeddings]
    n = len(outlets)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            try:
                d = cosine_distance(embeddings[i].vector,
                                    embeddings[j].vector)
            except UndefinedDistanceError:
                raise UndefinedDistanceError(
                    f"zero embedding for {outlets[i]!r} or {outlets[j]!r}")
            values[i, j] = values[j, i] = d
    return similarity_rankings(DistanceMatrix(outlets, values))


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def save_outlet_embeddings(embeddings: list[OutletEmbedding],
                           path: str | Path) -> None:
    if len({e.method for e in embeddings}) > 1:
        raise BaselineError("embeddings mix methods")
    doc = {"version": 1,
           "method": embeddings[0].method if embeddings else None,
           "outlets": {e.source: [float(x) for x in e.vector]
                       for e in embeddings}}
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, sort_keys=True, indent=1)
        fh.write("\n")


def load_outlet_embeddings(path: str | Path) -> list[OutletEmbedding]:
    with Path(path).open("r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return [OutletEmbedding(source, np.array(vec), doc["method"])
            for source, vec in sorted(doc["outlets"].items())]


def save_tfidf_model(model: TfidfModel, path: str | Path) -> None:
    doc = {"version": 1,
           "vocabulary": model.vocabulary,
           "document_frequencies": [float(x)
                                    for x in model.document_frequencies],
           "document_count": model.document_count}
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, sort_keys=True)
        fh.write("\n")


def load_tfidf_model(path: str | Path) -> TfidfModel:
    with Path(path).open("r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return TfidfModel(doc["vocabulary"],
                      np.array(doc["document_frequencies"]),
                      doc["document_count"])


def save_lda_model(model: LdaModel, path: str | Path) -> None:
    config = model.config
    doc = {"version": 1,
           "config": {"num_topics": config.num_topics,
                      "max_vocab": config.max_vocab,
                      "alpha": config.alpha, "beta": config.beta,
                      "passes": config.passes,
                      "inference_iterations": config.inference_iterations,
                      "seed": config.seed},
           "vocabulary": model.vocabulary,
           "topic_word_counts": [[float(x) for x in row]
                                 for row in model.topic_word_counts],
           "topic_totals": [float(x) for x in model.topic_totals]}
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, sort_keys=True)
        fh.write("\n")


def load_lda_model(path: str | Path) -> LdaModel:
    with Path(path).open("r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return LdaModel(LdaConfig(**doc["config"]), doc["vocabulary"],
                    np.array(doc["topic_word_counts"]),
                    np.array(doc["topic_totals"]))
