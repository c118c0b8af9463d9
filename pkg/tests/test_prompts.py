import json

import pytest

from framelens.corpus import Instance
from framelens.prompts import (DEFAULT_ADJECTIVE_PAIRS, ManualTemplate,
                               MaskedPrompt, PromptError, PromptGenConfig,
                               QA_CANDIDATES, expand_manual_templates,
                               extract_shared_ngrams, generate_attention,
                               generate_bigram_inner, generate_bigram_outer,
                               generate_random, generate_trigram_inner,
                               load_manual_templates, load_prompts,
                               save_prompts, tokenize)
from framelens.scorer import ImportanceResult


def inst(text, id="i0", source="s", topic="t"):
    return Instance.make(id, text, source, topic)


def dev_sets(texts_by_source, topic="t"):
    return {src: [inst(text, f"{src}-{i}", src, topic)
                  for i, text in enumerate(texts)]
            for src, texts in texts_by_source.items()}


class TestTokenize:
    def test_lowercase_and_punctuation(self):
        assert tokenize("The Care Act, passed!") == \
            ["the", "care", "act", "passed"]

    def test_hyphen_splits(self):
        assert tokenize("mother-in-law") == ["mother", "in", "law"]


class TestSharedNgrams:
    def test_bigram_in_all_sources_included(self):
        sets = dev_sets({"a": ["the care act is here"],
                         "b": ["that care act failed"],
                         "c": ["one more care act story"]})
        grams = extract_shared_ngrams(sets, 2, "all")
        assert ("care", "act") in grams

    def test_below_threshold_excluded(self):
        sets = dev_sets({"a": ["care act"], "b": ["care act"],
                         "c": ["care act"], "d": ["care act"],
                         "e": ["other words"]})
        grams = extract_shared_ngrams(sets, 2, 5)
        assert ("care", "act") not in grams
        assert ("care", "act") in extract_shared_ngrams(sets, 2, 4)

    def test_invalid_n(self):
        with pytest.raises(PromptError):
            extract_shared_ngrams(dev_sets({"a": ["x y"]}), 4, 1)

    def test_sorted_output(self):
        sets = dev_sets({"a": ["b c a b"], "b": ["b c a b"]})
        grams = extract_shared_ngrams(sets, 2, "all")
        assert grams == sorted(grams)

    def test_all_is_subset_of_lower_thresholds(self):
        sets = dev_sets({"a": ["the act is law"], "b": ["the act was law"],
                         "c": ["the act"], "d": ["law is law"]})
        strict = set(extract_shared_ngrams(sets, 2, "all"))
        for k in (1, 2, 3):
            assert strict <= set(extract_shared_ngrams(sets, 2, k))


class TestBigramOuter:
    def test_two_prompts_per_mid_occurrence(self):
        prompts = generate_bigram_outer(
            inst("the affordable care act is good"), [("care", "act")])
        assert len(prompts) == 2
        by_text = {p.text_with_mask: p for p in prompts}
        assert "the ___MASK___ care act is good" in by_text
        assert "the affordable care act ___MASK___ good" in by_text
        assert by_text["the ___MASK___ care act is good"].gold_token == \
            "affordable"
        assert by_text["the affordable care act ___MASK___ good"].gold_token \
            == "is"

    def test_occurrence_at_start_emits_after_only(self):
        prompts = generate_bigram_outer(inst("care act is good"),
                                        [("care", "act")])
        assert len(prompts) == 1
        assert prompts[0].text_with_mask == "care act ___MASK___ good"

    def test_occurrence_at_end_emits_before_only(self):
        prompts = generate_bigram_outer(inst("they passed the care act"),
                                        [("care", "act")])
        assert len(prompts) == 1
        assert prompts[0].text_with_mask == "they passed ___MASK___ care act"

    def test_no_occurrence_empty(self):
        assert generate_bigram_outer(inst("nothing here"),
                                     [("care", "act")]) == []

    def test_gold_never_inside_anchor(self):
        text = "one care act two care act three"
        for p in generate_bigram_outer(inst(text), [("care", "act")]):
            assert tokenize(p.gold_token)[0] not in ("care", "act")

    def test_punctuation_preserved_around_mask(self):
        prompts = generate_bigram_outer(inst("yes, the care act passed"),
                                        [("care", "act")])
        texts = {p.text_with_mask for p in prompts}
        assert "yes, ___MASK___ care act passed" in texts


class TestNgramInner:
    def test_bigram_positions(self):
        prompts = generate_bigram_inner(inst("the care act passed"),
                                        [("care", "act")])
        assert [p.text_with_mask for p in prompts] == [
            "the ___MASK___ act passed", "the care ___MASK___ passed"]
        assert [p.gold_token for p in prompts] == ["care", "act"]

    def test_trigram_three_prompts(self):
        prompts = generate_trigram_inner(
            inst("the affordable care act passed"),
            [("affordable", "care", "act")])
        assert len(prompts) == 3
        assert all(p.origin == "trigram_inner" for p in prompts)

    def test_gold_always_inside_anchor(self):
        prompts = generate_bigram_inner(inst("a care act b care act c"),
                                        [("care", "act")])
        for p in prompts:
            assert p.gold_token in ("care", "act")

    def test_no_shared_ngram_empty(self):
        assert generate_bigram_inner(inst("nothing relevant"),
                                     [("care", "act")]) == []


class TestRandom:
    def test_ten_word_instance_one_prompt(self):
        instances = [inst("w0 w1 w2 w3 w4 w5 w6 w7 w8 w9")]
        config = PromptGenConfig(rs_instance_fraction=1.0, seed=1)
        prompts = generate_random(instances, config)
        assert len(prompts) == 1  # ceil(0.1 * 10) = 1

    def test_half_of_instances_selected(self):
        instances = [inst("word " * 9 + "end", id=f"i{n}")
                     for n in range(100)]
        prompts = generate_random(instances, PromptGenConfig(seed=3))
        selected = {p.id.rsplit(":", 2)[0] for p in prompts}
        assert len(selected) == 50

    def test_same_seed_identical(self):
        instances = [inst(f"alpha beta gamma delta epsilon {n}", id=f"i{n}")
                     for n in range(20)]
        config = PromptGenConfig(seed=11)
        assert generate_random(instances, config) == \
            generate_random(instances, config)

    def test_each_prompt_single_sentinel(self):
        instances = [inst("w " * 29 + "end", id=f"i{n}") for n in range(10)]
        for p in generate_random(instances, PromptGenConfig(seed=2)):
            assert p.text_with_mask.count("___MASK___") == 1


class TestAttention:
    def importance(self, confidence, predicted, scores, alignment=None):
        if alignment is None:
            alignment = tuple((i,) for i in range(len(scores)))
        return lambda _inst: ImportanceResult(confidence, predicted,
                                              tuple(scores), alignment)

    def test_low_confidence_excluded(self):
        prompts = generate_attention(
            [inst("one two three")], self.importance(0.65, "s", [0.1, 0.9, 0.2]),
            PromptGenConfig())
        assert prompts == []

    def test_wrong_prediction_excluded(self):
        prompts = generate_attention(
            [inst("one two three")],
            self.importance(0.99, "other", [0.1, 0.9, 0.2]),
            PromptGenConfig())
        assert prompts == []

    def test_argmax_masked(self):
        prompts = generate_attention(
            [inst("one two three")], self.importance(0.9, "s", [0.1, 0.9, 0.3]),
            PromptGenConfig())
        assert [p.text_with_mask for p in prompts] == ["one ___MASK___ three"]
        assert prompts[0].gold_token == "two"

    def test_tie_breaks_earliest(self):
        scores = [0.1, 0.2, 0.9, 0.3, 0.4, 0.9]
        prompts = generate_attention(
            [inst("w0 w1 w2 w3 w4 w5")], self.importance(0.9, "s", scores),
            PromptGenConfig())
        assert prompts[0].gold_token == "w2"

    def test_word_importance_is_max_over_subword_scores(self):
        # word 0 spans tokens 0-1 (max 0.8); word 1 spans token 2 (0.5)
        fn = self.importance(0.9, "s", [0.2, 0.8, 0.5],
                             alignment=((0, 1), (2,)))
        prompts = generate_attention([inst("first second")], fn,
                                     PromptGenConfig())
        assert prompts[0].gold_token == "first"


class TestManualTemplates:
    def test_declarative_single(self):
        tpl = ManualTemplate("declarative", "single", "obamacare",
                             "Obamacare", "good",
                             single_candidates=("good", "bad"))
        (p,) = expand_manual_templates([tpl])
        assert p.text_with_mask == "Obamacare is ___MASK___."
        assert p.candidates == ("good", "bad")

    def test_interrogative_qa(self):
        tpl = ManualTemplate("interrogative", "qa", "obamacare",
                             "Obamacare", "good")
        (p,) = expand_manual_templates([tpl])
        assert p.text_with_mask == "Is Obamacare good? ___MASK___"
        assert p.candidates == QA_CANDIDATES

    def test_association_pre_qa_sentence_cased(self):
        tpl = ManualTemplate("association_pre", "qa", "obamacare",
                             "Obamacare", "good")
        (p,) = expand_manual_templates([tpl])
        assert p.text_with_mask == "Good Obamacare. ___MASK___"

    def test_association_post_single(self):
        tpl = ManualTemplate("association_post", "single", "obamacare",
                             "Obamacare", "good",
                             single_candidates=("good", "bad"))
        (p,) = expand_manual_templates([tpl])
        assert p.text_with_mask == "Obamacare ___MASK___."

    def test_single_without_pair_rejected(self):
        tpl = ManualTemplate("declarative", "single", "obamacare",
                             "Obamacare", "good")
        with pytest.raises(PromptError, match="antonym pair"):
            expand_manual_templates([tpl])

    def test_qa_always_five_candidates(self):
        templates = [ManualTemplate(s, "qa", "top", "Topic", "fine")
                     for s in ("declarative", "interrogative",
                               "association_post", "association_pre")]
        for p in expand_manual_templates(templates):
            assert len(p.candidates) == 5
            assert p.candidates == QA_CANDIDATES

    def test_config_file_expansion(self, tmp_path):
        path = tmp_path / "templates.json"
        path.write_text(json.dumps({
            "topics": [{"topic": "tax", "term": "The tax plan",
                        "pairs": [["good", "bad"]]}],
            "structures": ["declarative"],
        }))
        templates = load_manual_templates(path)
        # one qa template per pair member plus one single per pair
        assert len(templates) == 3
        prompts = expand_manual_templates(templates)
        qa = [p for p in prompts if p.candidates == QA_CANDIDATES]
        single = [p for p in prompts if p.candidates == ("good", "bad")]
        assert len(qa) == 2 and len(single) == 1

    def test_default_pairs_used_when_missing(self, tmp_path):
        path = tmp_path / "templates.json"
        path.write_text(json.dumps({
            "topics": [{"topic": "tax", "term": "The tax plan"}],
            "structures": ["declarative"], "answer_modes": ["single"]}))
        templates = load_manual_templates(path)
        assert len(templates) == len(DEFAULT_ADJECTIVE_PAIRS)


class TestPromptInvariants:
    def test_two_sentinels_rejected(self):
        with pytest.raises(PromptError, match="exactly one"):
            MaskedPrompt("x", "___MASK___ and ___MASK___", "t", "manual",
                         "a", candidates=("y", "n"))

    def test_duplicate_candidates_rejected(self):
        with pytest.raises(PromptError, match="duplicate"):
            MaskedPrompt("x", "a ___MASK___", "t", "manual", "a",
                         candidates=("y", "y"))

    def test_round_trip(self, tmp_path):
        prompts = (generate_bigram_outer(
            inst("the affordable care act is good"), [("care", "act")])
            + expand_manual_templates([ManualTemplate(
                "declarative", "qa", "t", "Topic", "fine")]))
        path = tmp_path / "prompts.jsonl"
        save_prompts(prompts, path)
        assert load_prompts(path) == prompts
