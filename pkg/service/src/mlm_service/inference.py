"""Scoring primitives over a loaded model + tokenizer.

Texts are split into whitespace words, each word into wordpiece tokens, with
a per-word alignment kept for the importance endpoint. The neutral prompt
sentinel ``___MASK___`` is replaced by the model's mask token at the piece
level, so punctuation attached to the masked word survives.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

MASK_SENTINEL = "___MASK___"


class InferenceError(ValueError):
    """Semantic request failure (bad text, unknown candidate handling)."""


@dataclass
class EncodedText:
    input_ids: torch.Tensor            # (1, seq)
    word_alignment: list[list[int]]    # word -> piece positions in sequence
    mask_position: int | None


def _word_pieces(tokenizer, word: str) -> list[str]:
    if MASK_SENTINEL in word:
        before, _, after = word.partition(MASK_SENTINEL)
        pieces = tokenizer.tokenize(before) if before else []
        pieces.append(tokenizer.mask_token)
        pieces.extend(tokenizer.tokenize(after) if after else [])
        return pieces
    pieces = tokenizer.tokenize(word)
    return pieces if pieces else [tokenizer.unk_token]


def encode_text(tokenizer, text: str, max_positions: int) -> EncodedText:
    words = text.split()
    if not words:
        raise InferenceError("empty text")
    tokens = [tokenizer.cls_token]
    alignment = []
    mask_position = None
    for word in words:
        pieces = _word_pieces(tokenizer, word)
        positions = list(range(len(tokens), len(tokens) + len(pieces)))
        alignment.append(positions)
        for piece in pieces:
            if piece == tokenizer.mask_token and MASK_SENTINEL in word:
                mask_position = len(tokens)
            tokens.append(piece)
    tokens.append(tokenizer.sep_token)
    if len(tokens) > max_positions:
        raise InferenceError(
            f"text too long for model: {len(tokens)} tokens > "
            f"{max_positions} positions")
    ids = tokenizer.convert_tokens_to_ids(tokens)
    return EncodedText(torch.tensor([ids]), alignment, mask_position)


def _mask_probabilities(model, tokenizer, text: str) -> torch.Tensor:
    if text.count(MASK_SENTINEL) != 1:
        raise InferenceError(
            f"text must contain exactly one {MASK_SENTINEL}, found "
            f"{text.count(MASK_SENTINEL)}")
    encoded = encode_text(tokenizer, text,
                          model.config.max_position_embeddings)
    with torch.no_grad():
        logits = model(encoded.input_ids).logits[0, encoded.mask_position]
    return torch.softmax(logits, dim=-1)


def score_top_k(model, tokenizer, text: str, k: int) -> list[dict]:
    """K most probable single tokens at the masked position, special tokens
    excluded, probability-descending (ties broken by token string)."""
    if k < 1:
        raise InferenceError("top_k must be >= 1")
    probs = _mask_probabilities(model, tokenizer, text)
    special = set(tokenizer.all_special_ids)
    scored = [(float(probs[i]), tokenizer.convert_ids_to_tokens(i))
              for i in range(len(probs)) if i not in special]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [{"token": token, "probability": prob, "approximate": False}
            for prob, token in scored[:k]]


def score_candidates(model, tokenizer, text: str,
                     candidates: list[str]) -> list[dict]:
    """Masked-position probability for each candidate, in request order.

    Candidates the tokenizer splits into several pieces are scored by their
    first piece and flagged approximate; so are candidates that map to the
    unknown token.
    """
    if not candidates:
        raise InferenceError("candidates must be non-empty")
    probs = _mask_probabilities(model, tokenizer, text)
    unk_id = tokenizer.unk_token_id
    entries = []
    for candidate in candidates:
        pieces = tokenizer.tokenize(candidate)
        if not pieces:
            entries.append({"token": candidate, "probability": 0.0,
                            "approximate": True})
            continue
        first_id = tokenizer.convert_tokens_to_ids(pieces[0])
        approximate = len(pieces) > 1 or first_id == unk_id
        entries.append({"token": candidate,
                        "probability": float(probs[first_id]),
                        "approximate": approximate})
    return entries


def embed(model, tokenizer, text: str) -> list[float]:
    """Mean pooling over final-layer token states."""
    encoded = encode_text(tokenizer, text,
                          model.config.max_position_embeddings)
    with torch.no_grad():
        hidden = model(encoded.input_ids,
                       output_hidden_states=True).hidden_states[-1][0]
    return [float(x) for x in hidden.mean(dim=0)]


def importance(model, tokenizer, text: str) -> dict:
    """Source prediction plus per-token importance.

    Importance of a token position is the final layer's attention weight
    from the classification position's query to that position, averaged over
    heads. The word alignment maps each whitespace word to its piece
    positions in the returned score list.
    """
    encoded = encode_text(tokenizer, text,
                          model.config.max_position_embeddings)
    with torch.no_grad():
        out = model(encoded.input_ids, output_attentions=True)
    probs = torch.softmax(out.logits[0], dim=-1)
    predicted = int(torch.argmax(probs))
    attention = out.attentions[-1][0]          # (heads, seq, seq)
    scores = attention[:, 0, :].mean(dim=0)    # CLS query -> every position
    return {
        "confidence": float(probs[predicted]),
        "predicted_source": model.config.id2label[predicted],
        "scores": [float(s) for s in scores],
        "word_alignment": encoded.word_alignment,
    }
