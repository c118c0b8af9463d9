"""Distance, ranking, and agreement machinery.

Source pairs are compared by the mean cosine distance over their aligned
framing vectors; per-source similarity rankings (closest first, not
necessarily symmetric) are scored against ground-truth rankings with
tie-aware Kendall tau-b. Also here: per-prompt agreement for error analysis
and complete-linkage agglomerative clustering of the distance matrix.

Ties are everywhere broken lexicographically (source ids, cluster pairs) so
every output is reproducible.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .represent import TopicRepresentation

log = logging.getLogger(__name__)


class MeasurementError(ValueError):
    pass


class UndefinedDistanceError(MeasurementError):
    """Cosine distance is undefined for an all-zero vector; callers exclude
    the affected pair for that prompt."""


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def cosine_distance(u, v) -> float:
    """1 - cos(u, v). In [0, 2] generally; in [0, 1] for nonnegative vectors;
    invariant under positive scaling of either argument."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise MeasurementError(f"length mismatch: {u.shape} vs {v.shape}")
    norm_u = float(np.linalg.norm(u))
    norm_v = float(np.linalg.norm(v))
    if norm_u == 0.0 or norm_v == 0.0:
        raise UndefinedDistanceError("undefined distance: all-zero vector")
    return 1.0 - float(np.dot(u, v)) / (norm_u * norm_v)


@dataclass
class DistanceMatrix:
    """Symmetric nonnegative distances with a zero diagonal. Matrices built
    from cosine distances additionally respect the [0, 2] cosine bound
    (``cosine_bound``); ground-truth leaning distances may exceed 2."""

    sources: list[str]
    values: np.ndarray
    excluded: dict[tuple[str, str], int] = field(default_factory=dict)
    cosine_bound: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = len(self.sources)
        if self.values.shape != (n, n):
            raise MeasurementError(f"matrix shape {self.values.shape} does "
                                   f"not match {n} sources")
        if not np.allclose(self.values, self.values.T, atol=1e-12):
            raise MeasurementError("distance matrix is not symmetric")
        if np.any(np.abs(np.diag(self.values)) > 0):
            raise MeasurementError("distance matrix diagonal must be zero")
        if np.any(self.values < -1e-12):
            raise MeasurementError("distance entries must be nonnegative")
        if self.cosine_bound and np.any(self.values > 2 + 1e-12):
            raise MeasurementError("distance entries outside [0, 2]")

    def distance(self, a: str, b: str) -> float:
        return float(self.values[self.sources.index(a),
                                 self.sources.index(b)])


def pair_distance_detail(rep: TopicRepresentation, a: str,
                         b: str) -> tuple[float, int]:
    """Mean cosine distance between two sources over a topic's prompts,
    excluding prompts where either vector is all-zero. Returns the mean and
    the number of excluded prompts."""
    distances = []
    excluded = 0
    for matrix in rep.matrices:
        if a not in matrix.rows or b not in matrix.rows:
            raise MeasurementError(
                f"prompt {matrix.prompt_id!r} lacks a row for "
                f"{a if a not in matrix.rows else b!r}")
        try:
            distances.append(cosine_distance(matrix.rows[a], matrix.rows[b]))
        except UndefinedDistanceError:
            log.warning("prompt %s: undefined distance for (%s, %s); "
                        "excluded", matrix.prompt_id, a, b)
            excluded += 1
    if not distances:
        raise MeasurementError(
            f"all {len(rep.matrices)} prompts undefined for ({a}, {b})")
    return float(np.mean(distances)), excluded


def pair_distance(rep: TopicRepresentation, a: str, b: str) -> float:
    return pair_distance_detail(rep, a, b)[0]


def distance_matrix(rep: TopicRepresentation) -> DistanceMatrix:
    sources = rep.sources()
    n = len(sources)
    values = np.zeros((n, n))
    excluded = {}
    for i in range(n):
        for j in range(i + 1, n):
            d, skipped = pair_distance_detail(rep, sources[i], sources[j])
            values[i, j] = values[j, i] = d
            if skipped:
                excluded[(sources[i], sources[j])] = skipped
    return DistanceMatrix(sources, values, excluded)


# ---------------------------------------------------------------------------
# similarity rankings
# ---------------------------------------------------------------------------

@dataclass
class SimilarityRanking:
    """The other sources ordered by ascending distance from the anchor.
    Equal distances are ordered lexicographically and flag the ranking as
    tied; ``tie_groups`` recovers the tied structure for tau-b."""

    anchor: str
    ranked: list[str]
    distances: list[float]
    tied: bool = False

    def __post_init__(self):
        if self.anchor in self.ranked:
            raise MeasurementError("ranking must exclude its anchor")
        if len(self.ranked) != len(self.distances):
            raise MeasurementError("ranked/distances length mismatch")
        if any(a > b for a, b in zip(self.distances, self.distances[1:])):
            raise MeasurementError("distances must be nondecreasing")

    def tie_groups(self) -> list[list[str]]:
        groups: list[list[str]] = []
        last = None
        for source, dist in zip(self.ranked, self.distances):
            if groups and dist == last:
                groups[-1].append(source)
            else:
                groups.append([source])
            last = dist
        return groups


def similarity_rankings(dm: DistanceMatrix) -> list[SimilarityRanking]:
    if len(dm.sources) < 3:
        raise MeasurementError("need at least 3 sources to rank")
    rankings = []
    for anchor in dm.sources:
        others = sorted((s for s in dm.sources if s != anchor),
                        key=lambda s: (dm.distance(anchor, s), s))
        distances = [dm.distance(anchor, s) for s in others]
        tied = any(a == b for a, b in zip(distances, distances[1:]))
        if tied:
            log.info("ranking for %s contains ties", anchor)
        rankings.append(SimilarityRanking(anchor, others, distances, tied))
    return rankings


# ---------------------------------------------------------------------------
# Kendall tau-b
# ---------------------------------------------------------------------------

def _rank_map(ranking) -> dict[str, int]:
    # elements are items or tie groups of items; group index is the rank
    ranks: dict[str, int] = {}
    for position, element in enumerate(ranking):
        group = [element] if isinstance(element, str) else list(element)
        for item in group:
            if item in ranks:
                raise MeasurementError(f"item {item!r} appears twice")
            ranks[item] = position
    return ranks


def kendall_tau(rank_a, rank_b) -> float:
    """Tie-aware Kendall tau-b between two rankings of the same items.

    Rankings are sequences whose elements are items or tie groups (lists) of
    items. tau = S / sqrt((n0 - n1)(n0 - n2)) where S sums the products of
    pair-order signs, n0 = n(n-1)/2 and n1/n2 correct for tied pairs within
    each ranking. Without ties this is (concordant - discordant) / n0.
    """
    ranks_a = _rank_map(rank_a)
    ranks_b = _rank_map(rank_b)
    if set(ranks_a) != set(ranks_b):
        raise MeasurementError(
            f"rankings cover different items: "
            f"{sorted(set(ranks_a) ^ set(ranks_b))}")
    items = sorted(ranks_a)
    n = len(items)
    if n < 2:
        raise MeasurementError("need at least 2 items")

    s = 0
    for i in range(n):
        for j in range(i + 1, n):
            da = ranks_a[items[i]] - ranks_a[items[j]]
            db = ranks_b[items[i]] - ranks_b[items[j]]
            s += ((da > 0) - (da < 0)) * ((db > 0) - (db < 0))

    n0 = n * (n - 1) // 2
    n1 = sum(t * (t - 1) // 2 for t in _group_sizes(ranks_a))
    n2 = sum(t * (t - 1) // 2 for t in _group_sizes(ranks_b))
    if n0 == n1 or n0 == n2:
        raise MeasurementError("tau undefined: a ranking is entirely tied")
    return s / math.sqrt((n0 - n1) * (n0 - n2))


def _group_sizes(ranks: dict[str, int]) -> list[int]:
    sizes: dict[int, int] = {}
    for r in ranks.values():
        sizes[r] = sizes.get(r, 0) + 1
    return [t for t in sizes.values() if t > 1]


# ---------------------------------------------------------------------------
# agreement
# ---------------------------------------------------------------------------

@dataclass
class AgreementReport:
    per_source_tau: dict[str, float]
    mean_tau: float
    std_tau: float


def agreement(predicted: list[SimilarityRanking],
              truth: list[SimilarityRanking]) -> AgreementReport:
    """Per-anchor tau-b between predicted and ground-truth rankings of the
    remaining sources, with mean and (population) std over anchors."""
    truth_by_anchor = {r.anchor: r for r in truth}
    missing = [r.anchor for r in predicted if r.anchor not in truth_by_anchor]
    if missing:
        raise MeasurementError(f"anchors missing from ground truth: "
                               f"{sorted(missing)}")
    per_source = {}
    for pred in predicted:
        per_source[pred.anchor] = kendall_tau(
            pred.tie_groups(), truth_by_anchor[pred.anchor].tie_groups())
    taus = [per_source[a] for a in sorted(per_source)]
    return AgreementReport(per_source_tau=per_source,
                           mean_tau=float(np.mean(taus)),
                           std_tau=float(np.std(taus)))


@dataclass(frozen=True)
class InstanceAgreement:
    prompt_id: str
    tau: float


def instance_level_agreement(rep: TopicRepresentation,
                             truth: list[SimilarityRanking],
                             ) -> tuple[list[InstanceAgreement], list[str]]:
    """Mean tau per single prompt (instead of per topic mean distance).
    Prompts with any undefined pairwise distance are skipped and listed."""
    sources = rep.sources()
    records = []
    skipped = []
    for matrix in rep.matrices:
        n = len(sources)
        values = np.zeros((n, n))
        try:
            for i in range(n):
                for j in range(i + 1, n):
                    d = cosine_distance(matrix.rows[sources[i]],
                                        matrix.rows[sources[j]])
                    values[i, j] = values[j, i] = d
        except UndefinedDistanceError:
            skipped.append(matrix.prompt_id)
            continue
        rankings = similarity_rankings(DistanceMatrix(sources, values))
        report = agreement(rankings, truth)
        records.append(InstanceAgreement(matrix.prompt_id, report.mean_tau))
    if skipped:
        log.warning("%d prompt(s) skipped for undefined distances: %s",
                    len(skipped), ", ".join(skipped[:5]))
    return records, skipped


def tau_histogram(records: list[InstanceAgreement],
                  bins: int = 20) -> tuple[list[float], list[int]]:
    """Plot-ready histogram of per-prompt tau values over [-1, 1]."""
    taus = [r.tau for r in records]
    counts, edges = np.histogram(taus, bins=bins, range=(-1.0, 1.0))
    return [float(e) for e in edges], [int(c) for c in counts]


@dataclass
class ExtremeSelection:
    worst: list[InstanceAgreement]
    best: list[InstanceAgreement]
    worst_expanded: bool = False   # boundary ties pulled in extra records
    best_expanded: bool = False


def extreme_instances(records: list[InstanceAgreement],
                      k: int) -> ExtremeSelection:
    """The k worst (lowest tau) and k best prompts; ties at the selection
    boundary are all included and flagged."""
    if not records:
        raise MeasurementError("no records")
    if k > len(records):
        log.warning("k=%d exceeds %d records; clamped", k, len(records))
        k = len(records)
    ascending = sorted(records, key=lambda r: (r.tau, r.prompt_id))
    worst_cut = ascending[k - 1].tau
    worst = [r for r in ascending if r.tau <= worst_cut]
    descending = sorted(records, key=lambda r: (-r.tau, r.prompt_id))
    best_cut = descending[k - 1].tau
    best = [r for r in descending if r.tau >= best_cut]
    return ExtremeSelection(worst=worst, best=best,
                            worst_expanded=len(worst) > k,
                            best_expanded=len(best) > k)


def extremes_report(selection: ExtremeSelection, rep: TopicRepresentation,
                    prompts_by_id: dict, top_n: int = 3) -> dict:
    """Qualitative-inspection rows: each extreme prompt with its gold token
    and every source's top predicted tokens."""
    matrices = {m.prompt_id: m for m in rep.matrices}

    def rows(records):
        out = []
        for record in records:
            matrix = matrices[record.prompt_id]
            prompt = prompts_by_id.get(record.prompt_id)
            top_tokens = {}
            for source in matrix.sources():
                ranked = sorted(zip(matrix.rows[source], matrix.vocabulary),
                                key=lambda pair: (-pair[0], pair[1]))
                top_tokens[source] = [t for _, t in ranked[:top_n]]
            out.append({
                "prompt_id": record.prompt_id,
                "tau": record.tau,
                "gold_token": prompt.gold_token if prompt else None,
                "text_with_mask": prompt.text_with_mask if prompt else None,
                "top_tokens": top_tokens,
            })
        return out

    return {"worst": rows(selection.worst), "best": rows(selection.best),
            "worst_expanded": selection.worst_expanded,
            "best_expanded": selection.best_expanded}


# ---------------------------------------------------------------------------
# complete-linkage clustering
# ---------------------------------------------------------------------------

@dataclass
class Dendrogram:
    leaves: list[str]
    merges: list[tuple[tuple[str, ...], tuple[str, ...], float]]

    def __post_init__(self):
        if len(self.merges) != len(self.leaves) - 1:
            raise MeasurementError(
                f"{len(self.leaves)} leaves need {len(self.leaves) - 1} "
                f"merges, got {len(self.merges)}")

    def nested(self):
        """Nested [left, right, height] lists, leaves as plain names."""
        trees: dict[tuple[str, ...], object] = {
            (leaf,): leaf for leaf in self.leaves}
        for a, b, height in self.merges:
            trees[tuple(sorted(a + b))] = [trees.pop(a), trees.pop(b),
                                           height]
        (root,) = trees.values()
        return root


def agglomerative_cluster(dm: DistanceMatrix) -> Dendrogram:
    """Complete-linkage agglomeration: repeatedly merge the pair of clusters
    with the smallest maximum member-to-member distance, breaking ties on the
    lexicographically smallest cluster pair."""
    if len(dm.sources) < 2:
        raise MeasurementError("need at least 2 sources to cluster")
    clusters: list[tuple[str, ...]] = [(s,) for s in sorted(dm.sources)]
    dist: dict[frozenset, float] = {}
    for i, a in enumerate(clusters):
        for b in clusters[i + 1:]:
            dist[frozenset((a, b))] = dm.distance(a[0], b[0])

    merges = []
    while len(clusters) > 1:
        best_pair = None
        best = None
        for i, a in enumerate(clusters):
            for b in clusters[i + 1:]:
                pair = tuple(sorted((a, b)))
                d = dist[frozenset((a, b))]
                if best is None or (d, pair) < (best, best_pair):
                    best, best_pair = d, pair
        a, b = best_pair
        merged = tuple(sorted(a + b))
        merges.append((a, b, best))
        clusters = [c for c in clusters if c not in (a, b)]
        for c in clusters:
            # complete linkage: distance to the union is the max of the parts
            dist[frozenset((merged, c))] = max(dist.pop(frozenset((a, c))),
                                               dist.pop(frozenset((b, c))))
        dist.pop(frozenset((a, b)))
        clusters.append(merged)
    return Dendrogram(leaves=list(dm.sources), merges=merges)


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------

def _dump(doc, path):
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, sort_keys=True, indent=1)
        fh.write("\n")


def save_distance_matrix(dm: DistanceMatrix, path: str | Path) -> None:
    _dump({"sources": dm.sources,
           "values": [[float(v) for v in row] for row in dm.values],
           "excluded": [{"pair": list(pair), "count": count}
                        for pair, count in sorted(dm.excluded.items())],
           "cosine_bound": dm.cosine_bound},
          path)


def load_distance_matrix(path: str | Path) -> DistanceMatrix:
    with Path(path).open("r", encoding="utf-8") as fh:
        doc = json.load(fh)
    excluded = {tuple(e["pair"]): e["count"] for e in doc.get("excluded", [])}
    return DistanceMatrix(list(doc["sources"]), np.array(doc["values"]),
                          excluded, doc.get("cosine_bound", True))


def save_rankings(rankings: list[SimilarityRanking], path: str | Path) -> None:
    _dump([{"anchor": r.anchor, "ranked": r.ranked,
            "distances": [float(d) for d in r.distances], "tied": r.tied}
           for r in rankings], path)


def load_rankings(path: str | Path) -> list[SimilarityRanking]:
    with Path(path).open("r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return [SimilarityRanking(r["anchor"], list(r["ranked"]),
                              [float(d) for d in r["distances"]],
                              bool(r.get("tied", False))) for r in doc]


def save_agreement(report: AgreementReport, path: str | Path,
                   metadata: dict | None = None) -> None:
    _dump({"per_source_tau": {s: float(t)
                              for s, t in sorted(report.per_source_tau.items())},
           "mean_tau": float(report.mean_tau),
           "std_tau": float(report.std_tau),
           "metadata": metadata or {}}, path)


def save_histogram(edges: list[float], counts: list[int], skipped: list[str],
                   path: str | Path) -> None:
    _dump({"bin_edges": edges, "counts": counts, "skipped": skipped}, path)


def save_dendrogram(dendrogram: Dendrogram, path: str | Path) -> None:
    _dump({"leaves": dendrogram.leaves,
           "merges": [{"a": list(a), "b": list(b), "distance": float(d)}
                      for a, b, d in dendrogram.merges],
           "nested": dendrogram.nested()}, path)
