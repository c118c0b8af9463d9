"""From masked-token distributions to aligned framing vectors: stub-backed
scoring, normalization by a reference model, union alignment with zero fill.

Uses the bundled golden fixture (4 synthetic sources, 2 topics)."""

import json
from pathlib import Path

from framelens.prompts import load_prompts
from framelens.represent import build_topic_representation
from framelens.scorer import ScorerClient, StubBackend

GOLDEN = Path(__file__).resolve().parent.parent / "fixtures" / "golden"

client = ScorerClient(StubBackend.from_file(GOLDEN / "stub_tables.json"))
prompts = load_prompts(GOLDEN / "prompts" / "energy.jsonl")
sources = ["alpha", "beta", "gamma", "delta"]

for mode in ("none", "general"):
    rep = build_topic_representation(prompts, sources, client, mode=mode,
                                     k=3, family="tiny")
    print(f"== topic {rep.topic!r}, normalization {mode!r}: "
          f"{rep.prompt_count} framing matrices ==")
    matrix = rep.matrices[0]
    print(f"prompt {matrix.prompt_id}")
    print(f"vocabulary: {matrix.vocabulary}")
    for source in sources:
        row = "  ".join(f"{v:7.3f}" for v in matrix.rows[source])
        print(f"  {source:6} {row}")
    print()

print("note: zeros mark tokens outside that source's top-k; under "
      "normalization every value is a ratio against the reference model.")
