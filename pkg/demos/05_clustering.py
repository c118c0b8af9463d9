"""Complete-linkage agglomerative clustering of the source distance matrix,
printed as an indented dendrogram."""

from pathlib import Path

from framelens.measure import agglomerative_cluster, distance_matrix
from framelens.prompts import load_prompts
from framelens.represent import build_topic_representation
from framelens.scorer import ScorerClient, StubBackend

GOLDEN = Path(__file__).resolve().parent.parent / "fixtures" / "golden"
SOURCES = ["alpha", "beta", "gamma", "delta"]

client = ScorerClient(StubBackend.from_file(GOLDEN / "stub_tables.json"))
prompts = load_prompts(GOLDEN / "prompts" / "transit.jsonl")
rep = build_topic_representation(prompts, SOURCES, client, mode="general",
                                 k=3, family="tiny")
dendrogram = agglomerative_cluster(distance_matrix(rep))

print("== merge sequence (complete linkage) ==")
for a, b, height in dendrogram.merges:
    print(f"  {'+'.join(a):20} + {'+'.join(b):20} at {height:.4f}")


def show(node, indent=0):
    if isinstance(node, str):
        print("  " * indent + node)
    else:
        left, right, height = node
        print("  " * indent + f"[{height:.4f}]")
        show(left, indent + 1)
        show(right, indent + 1)


print("\n== dendrogram ==")
show(dendrogram.nested())
