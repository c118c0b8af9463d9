"""Uniform client for masked-token scoring, embedding, and token importance.

Two interchangeable backends sit behind :class:`ScorerClient`: a
deterministic file-backed stub (the whole primary pipeline runs without any
model runtime) and an HTTP backend speaking the JSON wire protocol of the
model service. Prompts use the neutral sentinel ``___MASK___``; backends
substitute their model-specific mask token.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import requests

log = logging.getLogger(__name__)

MASK_SENTINEL = "___MASK___"

# Floor applied to probabilities before any division (normalization); keeps
# ratios finite without materially changing rankings.
PROBABILITY_FLOOR = 1e-12

VALID_KINDS = ("base", "domain", "source", "classifier")


class ScorerError(Exception):
    """Semantic scorer failure; never retried."""


class ModelNotRegisteredError(ScorerError):
    pass


class TransportError(Exception):
    """Transient transport failure; retried with bounded backoff."""


@dataclass(frozen=True)
class ModelId:
    """Identifies one model role: per-source, pooled-domain, plain pretrained
    base, or the source classifier."""

    kind: str
    topic: str
    family: str
    source: str | None = None

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise ScorerError(f"unknown model kind {self.kind!r}")
        if self.kind == "source" and not self.source:
            raise ScorerError("kind 'source' requires a source identifier")
        if self.kind != "source" and self.source is not None:
            raise ScorerError(f"kind {self.kind!r} must not carry a source")

    def key(self) -> str:
        return f"{self.kind}:{self.source or '-'}:{self.topic}:{self.family}"

    def to_json(self) -> dict:
        return {"kind": self.kind, "source": self.source,
                "topic": self.topic, "family": self.family}


@dataclass(frozen=True)
class ScoredToken:
    token: str
    probability: float
    approximate: bool = False
    floored: bool = False


@dataclass
class TokenDistribution:
    """Token -> probability map for one (model, prompt) pair.

    Entries are probability-descending for top-k queries; candidates-mode
    responses instead keep the requested candidate order (``candidate_order``
    flags this). Values may exceed 1 after normalization downstream.
    """

    prompt_id: str | None
    model: ModelId
    entries: list[ScoredToken]
    candidate_order: bool = False

    def tokens(self) -> list[str]:
        return [e.token for e in self.entries]

    def as_map(self) -> dict[str, float]:
        return {e.token: e.probability for e in self.entries}


@dataclass(frozen=True)
class ScorerRequest:
    """Exactly one of ``top_k`` / ``candidates`` selects the query mode."""

    model: ModelId
    text_with_mask: str
    top_k: int | None = None
    candidates: tuple[str, ...] | None = None
    prompt_id: str | None = None

    def __post_init__(self):
        if (self.top_k is None) == (self.candidates is None):
            raise ScorerError("exactly one of top_k / candidates must be set")
        if self.top_k is not None and self.top_k < 1:
            raise ScorerError("top_k must be >= 1")
        if self.candidates is not None and not self.candidates:
            raise ScorerError("candidates must be non-empty")
        n = self.text_with_mask.count(MASK_SENTINEL)
        if n != 1:
            raise ScorerError(
                f"text must contain exactly one {MASK_SENTINEL}, found {n}")


@dataclass(frozen=True)
class ImportanceResult:
    confidence: float
    predicted_source: str
    scores: tuple[float, ...]
    word_alignment: tuple[tuple[int, ...], ...]


def text_key(text: str) -> str:
    """Stable lookup key for stub rows keyed by text rather than prompt id."""
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


class StubBackend:
    """File-backed deterministic scorer.

    Table layout (JSON)::

        {"score":      {model_key: {prompt_id_or_text_key: {token: prob}}},
         "embed":      {model_key: {key: [floats]}},
         "importance": {model_key: {key: {"confidence": c,
                                          "predicted_source": s,
                                          "scores": [...],
                                          "word_alignment": [[...], ...]}}}}

    Keys are prompt ids or ``sha256:<16 hex>`` of the exact request text.
    """

    def __init__(self, table: dict):
        self.table = table

    @classmethod
    def from_file(cls, path: str | Path) -> "StubBackend":
        with Path(path).open("r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    def _row(self, section: str, model: ModelId, text: str,
             prompt_id: str | None):
        by_model = self.table.get(section, {})
        if model.key() not in by_model:
            raise ModelNotRegisteredError(
                f"model not registered: {model.key()} (section {section!r})")
        rows = by_model[model.key()]
        for key in (prompt_id, text_key(text)):
            if key is not None and key in rows:
                return rows[key]
        raise ScorerError(
            f"no stub entry for model {model.key()} and prompt "
            f"{prompt_id or text_key(text)}")

    def score(self, model: ModelId, text: str, *, top_k=None, candidates=None,
              prompt_id=None) -> list[ScoredToken]:
        row = self._row("score", model, text, prompt_id)
        if top_k is not None:
            ranked = sorted(row.items(), key=lambda kv: (-kv[1], kv[0]))
            return [ScoredToken(t, float(p)) for t, p in ranked[:top_k]]
        return [ScoredToken(c, float(row.get(c, 0.0))) for c in candidates]

    def embed(self, model: ModelId, text: str) -> list[float]:
        vec = self._row("embed", model, text, None)
        return [float(x) for x in vec]

    def importance(self, model: ModelId, text: str) -> ImportanceResult:
        row = self._row("importance", model, text, None)
        return ImportanceResult(
            confidence=float(row["confidence"]),
            predicted_source=row["predicted_source"],
            scores=tuple(float(s) for s in row["scores"]),
            word_alignment=tuple(tuple(w) for w in row["word_alignment"]),
        )

    def models(self) -> list[str]:
        keys = set()
        for section in ("score", "embed", "importance"):
            keys.update(self.table.get(section, {}))
        return sorted(keys)


class HttpBackend:
    """JSON-over-HTTP backend. Transport failures (connection errors,
    timeouts, 5xx) are retried up to ``max_attempts`` with exponential
    backoff; 4xx responses are semantic errors and never retried."""

    def __init__(self, base_url: str, *, timeout: float = 30.0,
                 max_attempts: int = 3, retry_delay: float = 0.2):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.retry_delay = retry_delay
        self.session = requests.Session()

    def _request(self, method: str, path: str, payload=None) -> dict:
        url = self.base_url + path
        last_error: TransportError | None = None
        for attempt in range(self.max_attempts):
            if attempt and self.retry_delay:
                time.sleep(self.retry_delay * 2 ** (attempt - 1))
            try:
                if method == "GET":
                    resp = self.session.get(url, timeout=self.timeout)
                else:
                    resp = self.session.post(url, json=payload,
                                             timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = TransportError(f"{url}: {exc}")
                log.warning("transport failure (attempt %d/%d): %s",
                            attempt + 1, self.max_attempts, exc)
                continue
            if resp.status_code >= 500:
                last_error = TransportError(
                    f"{url}: server error {resp.status_code}")
                continue
            if resp.status_code >= 400:
                detail = _error_detail(resp)
                if resp.status_code == 404 and "model" in detail.lower():
                    raise ModelNotRegisteredError(detail)
                raise ScorerError(f"{url}: {resp.status_code}: {detail}")
            return resp.json()
        raise last_error

    def score(self, model: ModelId, text: str, *, top_k=None, candidates=None,
              prompt_id=None) -> list[ScoredToken]:
        mode = {"top_k": top_k} if top_k is not None \
            else {"candidates": list(candidates)}
        body = self._request("POST", "/score",
                             {"model": model.to_json(), "text": text,
                              "mode": mode})
        return [ScoredToken(e["token"], float(e["probability"]),
                            approximate=bool(e.get("approximate", False)))
                for e in body["entries"]]

    def embed(self, model: ModelId, text: str) -> list[float]:
        body = self._request("POST", "/embed",
                             {"model": model.to_json(), "text": text})
        return [float(x) for x in body["vector"]]

    def importance(self, model: ModelId, text: str) -> ImportanceResult:
        body = self._request("POST", "/importance",
                             {"model": model.to_json(), "text": text})
        return ImportanceResult(
            confidence=float(body["confidence"]),
            predicted_source=body["predicted_source"],
            scores=tuple(float(s) for s in body["scores"]),
            word_alignment=tuple(tuple(w) for w in body["word_alignment"]),
        )

    def models(self) -> list[str]:
        body = self._request("GET", "/models")
        return list(body["models"])


def _error_detail(resp) -> str:
    try:
        body = resp.json()
    except ValueError:
        return resp.text[:200]
    for key in ("error", "detail", "message"):
        if key in body:
            return str(body[key])
    return str(body)[:200]


class ScorerClient:
    """Validating front end over a backend, with bounded request concurrency.

    Batch helpers fan out up to ``max_in_flight`` requests at a time and
    always return results in request order, independent of completion order.
    """

    def __init__(self, backend, max_in_flight: int = 8):
        if max_in_flight < 1:
            raise ScorerError("max_in_flight must be >= 1")
        self.backend = backend
        self.max_in_flight = max_in_flight

    def score(self, request: ScorerRequest) -> TokenDistribution:
        entries = self.backend.score(
            request.model, request.text_with_mask,
            top_k=request.top_k, candidates=request.candidates,
            prompt_id=request.prompt_id)
        dist = TokenDistribution(
            prompt_id=request.prompt_id, model=request.model, entries=entries,
            candidate_order=request.candidates is not None)
        _validate_distribution(dist, request)
        return dist

    def score_many(self, requests_: list[ScorerRequest]) -> list[TokenDistribution]:
        return self._map(self.score, requests_)

    def embed(self, model: ModelId, text: str) -> list[float]:
        return self.backend.embed(model, text)

    def embed_many(self, model: ModelId, texts: list[str]) -> list[list[float]]:
        return self._map(lambda t: self.backend.embed(model, t), texts)

    def token_importance(self, model: ModelId, text: str,
                         true_source: str) -> ImportanceResult:
        if model.kind != "classifier":
            raise ScorerError("token importance requires a classifier model")
        result = self.backend.importance(model, text)
        _validate_importance(result, text)
        return result

    def models(self) -> list[str]:
        return self.backend.models()

    def _map(self, fn, items):
        if len(items) <= 1 or self.max_in_flight == 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(fn, items))


def _validate_distribution(dist: TokenDistribution,
                           request: ScorerRequest) -> None:
    seen = set()
    for entry in dist.entries:
        if not 0.0 <= entry.probability <= 1.0:
            raise ScorerError(
                f"probability out of [0,1] for token {entry.token!r}: "
                f"{entry.probability}")
        if entry.token in seen:
            raise ScorerError(f"duplicate token in response: {entry.token!r}")
        seen.add(entry.token)
    if request.top_k is not None:
        if len(dist.entries) > request.top_k:
            raise ScorerError(
                f"top_k response has {len(dist.entries)} entries > K")
        probs = [e.probability for e in dist.entries]
        if any(a < b for a, b in zip(probs, probs[1:])):
            raise ScorerError("top_k response not probability-descending")
    else:
        if dist.tokens() != list(request.candidates):
            raise ScorerError(
                "candidates response must keep the requested order")


def _validate_importance(result: ImportanceResult, text: str) -> None:
    if not 0.0 <= result.confidence <= 1.0:
        raise ScorerError(f"confidence out of [0,1]: {result.confidence}")
    n_words = len(text.split())
    if len(result.word_alignment) != n_words:
        raise ScorerError(
            f"word alignment covers {len(result.word_alignment)} words, "
            f"text has {n_words}")
    seen: set[int] = set()
    for word_idx, token_idxs in enumerate(result.word_alignment):
        if not token_idxs:
            raise ScorerError(f"word {word_idx} aligned to no tokens")
        for t in token_idxs:
            if not 0 <= t < len(result.scores):
                raise ScorerError(f"alignment index {t} out of range")
            if t in seen:
                raise ScorerError(f"token index {t} aligned to two words")
            seen.add(t)
