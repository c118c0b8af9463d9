"""Walk through corpus handling: sentence-level greedy splitting of long
paragraphs and the stratified train/dev partition."""

from framelens.corpus import (CorpusConfig, Instance, partition,
                              split_paragraph, split_sentences)


def sentence(tag, n_words):
    return " ".join([f"Start{tag}"] + [f"w{i}" for i in range(n_words - 1)]) + "."


config = CorpusConfig(max_words=256, dev_fraction=0.10, split_seed=42)

print("== sentence splitting ==")
text = "The act passed. Critics disagreed! Was version 2.5 final? Yes."
for s in split_sentences(text):
    print(" ", s)

print("\n== greedy chunking ==")
paragraph = " ".join(sentence(i, n) for i, n in enumerate([120, 100, 80]))
print(f"paragraph of {len(paragraph.split())} words, limit {config.max_words}")
for chunk in split_paragraph(paragraph, config):
    print(f"  chunk: {chunk.word_count} words, over_length={chunk.over_length}")

print("\n== a single over-long sentence is kept whole ==")
for chunk in split_paragraph(sentence(0, 300), config):
    print(f"  chunk: {chunk.word_count} words, over_length={chunk.over_length}")

print("\n== stratified partition ==")
instances = [Instance.make(f"{src}-{i}", f"text number {i}", src, "topic")
             for src in ("outlet_a", "outlet_b") for i in range(100)]
train, dev = partition(instances, config)
print(f"{len(instances)} instances -> {len(train)} train / {len(dev)} dev")
for src in ("outlet_a", "outlet_b"):
    n = sum(1 for i in dev if i.source == src)
    print(f"  dev share of {src}: {n}")
