"""Mine shared bigrams across sources and turn them into masked prompts;
expand a few manual templates with constrained candidates."""

from framelens.corpus import Instance
from framelens.prompts import (ManualTemplate, expand_manual_templates,
                               extract_shared_ngrams, generate_bigram_inner,
                               generate_bigram_outer)

dev_sets = {
    "outlet_a": [Instance.make("a0", "the care act is working well",
                               "outlet_a", "healthcare")],
    "outlet_b": [Instance.make("b0", "many doubt the care act today",
                               "outlet_b", "healthcare")],
    "outlet_c": [Instance.make("c0", "the care act faces new suits",
                               "outlet_c", "healthcare")],
}

print("== bigrams shared by every source ==")
shared = extract_shared_ngrams(dev_sets, 2, "all")
print(" ", shared)

print("\n== bigram outer: mask the neighbors of the shared bigram ==")
for instances in dev_sets.values():
    for prompt in generate_bigram_outer(instances[0], [("care", "act")]):
        print(f"  {prompt.text_with_mask!r:55} gold={prompt.gold_token!r}")

print("\n== bigram inner: mask inside the bigram ==")
for prompt in generate_bigram_inner(dev_sets["outlet_a"][0],
                                    [("care", "act")]):
    print(f"  {prompt.text_with_mask!r:55} gold={prompt.gold_token!r}")

print("\n== manual templates ==")
templates = [
    ManualTemplate("declarative", "single", "healthcare", "The care act",
                   "good", single_candidates=("good", "bad")),
    ManualTemplate("interrogative", "qa", "healthcare", "the care act",
                   "good"),
    ManualTemplate("association_pre", "qa", "healthcare", "the care act",
                   "good"),
]
for prompt in expand_manual_templates(templates):
    print(f"  {prompt.text_with_mask!r:45} candidates={list(prompt.candidates)}")
