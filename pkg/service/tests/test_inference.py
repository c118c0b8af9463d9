import pytest
import torch
from transformers import BertConfig, BertForMaskedLM, BertTokenizer

from mlm_service.inference import (InferenceError, encode_text, embed,
                                   importance, score_candidates, score_top_k)
from mlm_service.registry import ModelRegistry, ModelRegistryEntry


@pytest.fixture(scope="module")
def loaded(base_checkpoint):
    registry = ModelRegistry([], base_checkpoint.parent)
    registry.add(ModelRegistryEntry(kind="base", topic="issues",
                                    family="tiny", artifact_path="base"))
    _, model, tokenizer = registry.load("base:-:issues:tiny")
    return model, tokenizer


class TestEncodeText:
    def test_alignment_covers_words_in_order(self, loaded):
        _, tokenizer = loaded
        encoded = encode_text(tokenizer, "alpha0 beta1, the", 128)
        assert len(encoded.word_alignment) == 3
        flat = [i for group in encoded.word_alignment for i in group]
        assert flat == sorted(flat)
        # "beta1," splits into word + comma: two pieces for one word
        assert len(encoded.word_alignment[1]) == 2

    def test_sentinel_becomes_mask_token(self, loaded):
        _, tokenizer = loaded
        encoded = encode_text(tokenizer, "the ___MASK___ act", 128)
        ids = encoded.input_ids[0].tolist()
        assert ids[encoded.mask_position] == tokenizer.mask_token_id

    def test_sentinel_with_attached_punctuation(self, loaded):
        _, tokenizer = loaded
        encoded = encode_text(tokenizer, "the ___MASK___, act", 128)
        ids = encoded.input_ids[0].tolist()
        assert ids[encoded.mask_position] == tokenizer.mask_token_id
        comma_id = tokenizer.convert_tokens_to_ids(",")
        assert ids[encoded.mask_position + 1] == comma_id

    def test_unknown_word_maps_to_unk(self, loaded):
        _, tokenizer = loaded
        encoded = encode_text(tokenizer, "zzzunknownzzz", 128)
        assert encoded.input_ids[0, 1] == tokenizer.unk_token_id

    def test_too_long_rejected(self, loaded):
        _, tokenizer = loaded
        with pytest.raises(InferenceError, match="too long"):
            encode_text(tokenizer, " ".join(["the"] * 300), 128)


class TestScore:
    def test_top_k_descending_and_bounded(self, loaded):
        model, tokenizer = loaded
        entries = score_top_k(model, tokenizer, "the ___MASK___ act", 5)
        probs = [e["probability"] for e in entries]
        assert len(entries) == 5
        assert probs == sorted(probs, reverse=True)
        assert all(0.0 <= p <= 1.0 for p in probs)

    def test_special_tokens_never_returned(self, loaded):
        model, tokenizer = loaded
        entries = score_top_k(model, tokenizer, "the ___MASK___ act", 1000)
        tokens = {e["token"] for e in entries}
        assert not tokens & set(tokenizer.all_special_tokens)

    def test_candidates_request_order(self, loaded):
        model, tokenizer = loaded
        entries = score_candidates(model, tokenizer, "the ___MASK___ act",
                                   ["beta1", "alpha0", "the"])
        assert [e["token"] for e in entries] == ["beta1", "alpha0", "the"]
        assert all(not e["approximate"] for e in entries)

    def test_multi_piece_candidate_flagged(self, loaded):
        model, tokenizer = loaded
        (entry,) = score_candidates(model, tokenizer, "the ___MASK___ act",
                                    ["alpha0 beta1"])
        assert entry["approximate"]

    def test_unknown_candidate_flagged(self, loaded):
        model, tokenizer = loaded
        (entry,) = score_candidates(model, tokenizer, "the ___MASK___ act",
                                    ["notinvocab"])
        assert entry["approximate"]

    def test_no_sentinel_rejected(self, loaded):
        model, tokenizer = loaded
        with pytest.raises(InferenceError, match="exactly one"):
            score_top_k(model, tokenizer, "no mask here", 3)

    def test_candidate_probability_matches_vocabulary_distribution(self,
                                                                   loaded):
        # candidates mode must return the masked-position probability of the
        # candidate's (first) piece, identical to the full distribution
        model, tokenizer = loaded
        text = "the ___MASK___ act"
        entries = score_top_k(model, tokenizer, text, 3)
        top = entries[0]
        (again,) = score_candidates(model, tokenizer, text, [top["token"]])
        assert again["probability"] == pytest.approx(top["probability"],
                                                     abs=1e-12)


class TestEmbedAndImportance:
    def test_embed_dimension_and_determinism(self, loaded):
        model, tokenizer = loaded
        v1 = embed(model, tokenizer, "the act today")
        v2 = embed(model, tokenizer, "the act today")
        assert len(v1) == model.config.hidden_size
        assert v1 == v2

    def test_importance_contract(self, base_checkpoint, corpus):
        from mlm_service.training import finetune_classifier
        clf_dir, _ = finetune_classifier(
            corpus[:40] + corpus[-40:], corpus[40:60] + corpus[-60:-40],
            base_checkpoint, base_checkpoint.parent / "clf-unit", epochs=2,
            seed=42)
        registry = ModelRegistry([], base_checkpoint.parent)
        registry.add(ModelRegistryEntry(kind="classifier", topic="issues",
                                        family="tiny",
                                        artifact_path="clf-unit"))
        _, model, tokenizer = registry.load("classifier:-:issues:tiny")
        text = "alpha0 alpha1 the act"
        result = importance(model, tokenizer, text)
        assert 0.0 <= result["confidence"] <= 1.0
        assert result["predicted_source"] in ("src0", "src1")
        assert len(result["word_alignment"]) == len(text.split())
        flat = [i for group in result["word_alignment"] for i in group]
        assert len(flat) == len(set(flat))
        assert all(0 <= i < len(result["scores"]) for i in flat)
