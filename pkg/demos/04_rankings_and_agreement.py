"""Mean cosine distances, per-source similarity rankings, and Kendall tau-b
agreement against a leaning-based ground truth, on the golden fixture."""

from pathlib import Path

from framelens.groundtruth import ground_truth_rankings, load_leaning_scores
from framelens.measure import (agreement, distance_matrix,
                               instance_level_agreement, similarity_rankings,
                               tau_histogram)
from framelens.prompts import load_prompts
from framelens.represent import build_topic_representation
from framelens.scorer import ScorerClient, StubBackend

GOLDEN = Path(__file__).resolve().parent.parent / "fixtures" / "golden"
SOURCES = ["alpha", "beta", "gamma", "delta"]

client = ScorerClient(StubBackend.from_file(GOLDEN / "stub_tables.json"))
prompts = load_prompts(GOLDEN / "prompts" / "energy.jsonl")
rep = build_topic_representation(prompts, SOURCES, client, mode="domain",
                                 k=3, family="tiny")

dm = distance_matrix(rep)
print("== mean cosine distances ==")
header = "        " + "  ".join(f"{s:>7}" for s in dm.sources)
print(header)
for i, source in enumerate(dm.sources):
    row = "  ".join(f"{dm.values[i, j]:7.4f}" for j in range(len(dm.sources)))
    print(f"{source:>7} {row}")

predicted = similarity_rankings(dm)
print("\n== similarity rankings (closest first; not symmetric) ==")
for ranking in predicted:
    print(f"  {ranking.anchor:6} -> {ranking.ranked}")

truth = ground_truth_rankings(load_leaning_scores(GOLDEN / "mbr.csv"))
report = agreement(predicted, truth)
print("\n== agreement with the leaning ground truth ==")
for source, tau in sorted(report.per_source_tau.items()):
    print(f"  tau[{source}] = {tau:+.3f}")
print(f"  mean tau = {report.mean_tau:+.3f} (std {report.std_tau:.3f})")

records, skipped = instance_level_agreement(rep, truth)
edges, counts = tau_histogram(records, bins=8)
print("\n== per-prompt tau histogram ==")
for lo, hi, count in zip(edges, edges[1:], counts):
    print(f"  [{lo:+.2f}, {hi:+.2f})  {'#' * count}")
