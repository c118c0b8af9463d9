"""Independent brute-force oracles for the test suite.

Everything here deliberately reimplements the checked logic from scratch
(plain Python arithmetic, explicit pair counting, from-scratch linkage
recomputation) and never calls into the package's own code paths.
"""

import math

EPSILON = 1e-12


# ---------------------------------------------------------------------------
# cosine
# ---------------------------------------------------------------------------

def cosine_distance(u, v):
    dot = sum(a * b for a, b in zip(u, v))
    norm_u = math.sqrt(sum(a * a for a in u))
    norm_v = math.sqrt(sum(b * b for b in v))
    if norm_u == 0.0 or norm_v == 0.0:
        raise ZeroDivisionError("all-zero vector")
    return 1.0 - dot / (norm_u * norm_v)


# ---------------------------------------------------------------------------
# Kendall tau-b by explicit pair classification
# ---------------------------------------------------------------------------

def tau_b(groups_a, groups_b):
    """Tau-b from explicit concordant / discordant / tied-pair counts.

    ``groups_a`` / ``groups_b`` are lists of tie groups (lists of items),
    best first. tau = (C - D) / sqrt((C + D + Tb)(C + D + Ta)) where Ta / Tb
    count pairs tied only in a / only in b.
    """
    ranks_a = {item: i for i, group in enumerate(groups_a) for item in group}
    ranks_b = {item: i for i, group in enumerate(groups_b) for item in group}
    assert set(ranks_a) == set(ranks_b)
    items = sorted(ranks_a)
    concordant = discordant = tied_a_only = tied_b_only = 0
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            da = ranks_a[items[i]] - ranks_a[items[j]]
            db = ranks_b[items[i]] - ranks_b[items[j]]
            if da == 0 and db == 0:
                continue
            if da == 0:
                tied_a_only += 1
            elif db == 0:
                tied_b_only += 1
            elif (da > 0) == (db > 0):
                concordant += 1
            else:
                discordant += 1
    denom = math.sqrt((concordant + discordant + tied_b_only)
                      * (concordant + discordant + tied_a_only))
    return (concordant - discordant) / denom


# ---------------------------------------------------------------------------
# union-and-zero-fill alignment
# ---------------------------------------------------------------------------

def align(distributions):
    """distributions: {source: [(token, value), ...]} ->
    (vocabulary, {source: [values]}) by explicit union and zero fill."""
    vocabulary = []
    for entries in distributions.values():
        for token, _ in entries:
            if token not in vocabulary:
                vocabulary.append(token)
    vocabulary.sort()
    rows = {}
    for source, entries in distributions.items():
        lookup = dict(entries)
        rows[source] = [lookup[t] if t in lookup else 0.0
                        for t in vocabulary]
    return vocabulary, rows


# ---------------------------------------------------------------------------
# complete-linkage agglomeration, recomputed from scratch each step
# ---------------------------------------------------------------------------

def complete_linkage(sources, matrix):
    """Merge sequence [(cluster_a, cluster_b, distance), ...] where the
    linkage between clusters is recomputed every step as the max original
    pairwise distance over member pairs; ties break on the lexicographically
    smallest (sorted) cluster pair."""
    index = {s: i for i, s in enumerate(sources)}
    clusters = [(s,) for s in sorted(sources)]
    merges = []
    while len(clusters) > 1:
        best = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                a, b = clusters[i], clusters[j]
                linkage = max(matrix[index[x]][index[y]]
                              for x in a for y in b)
                pair = tuple(sorted((a, b)))
                candidate = (linkage, pair)
                if best is None or candidate < best:
                    best = candidate
        linkage, (a, b) = best
        merges.append((a, b, linkage))
        clusters = [c for c in clusters if c not in (a, b)]
        clusters.append(tuple(sorted(a + b)))
    return merges


# ---------------------------------------------------------------------------
# ranking construction with tie groups
# ---------------------------------------------------------------------------

def ranking_groups(anchor, others, distance_of):
    """Tie groups of the non-anchor sources, closest first; equal distances
    share a group."""
    ordered = sorted(others, key=lambda s: (distance_of(s), s))
    groups = []
    last = None
    for source in ordered:
        d = distance_of(source)
        if groups and d == last:
            groups[-1].append(source)
        else:
            groups.append([source])
        last = d
    return groups


def mbr_truth_groups(leanings):
    """{outlet: leaning int} -> {anchor: tie groups} by absolute distance."""
    truth = {}
    for anchor in leanings:
        others = [o for o in leanings if o != anchor]
        truth[anchor] = ranking_groups(
            anchor, others, lambda s: abs(leanings[anchor] - leanings[s]))
    return truth


# ---------------------------------------------------------------------------
# end-to-end recomputation from stub tables
# ---------------------------------------------------------------------------

def _source_vectors(stub, prompt, sources, topic, mode, k, family):
    """Per-source framing vectors for one prompt record, straight from the
    stub score tables: top-k (or candidate) selection, union, zero fill,
    floored reference division."""
    score = stub["score"]
    raw = {}
    for source in sources:
        row = score[f"source:{source}:{topic}:{family}"][prompt["id"]]
        if prompt.get("candidates"):
            raw[source] = [(c, row.get(c, 0.0))
                           for c in prompt["candidates"]]
        else:
            ranked = sorted(row.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
            raw[source] = list(ranked)
    if prompt.get("candidates"):
        vocabulary = list(prompt["candidates"])
    else:
        vocabulary = sorted({t for entries in raw.values()
                             for t, _ in entries})
    vectors = {}
    for source in sources:
        lookup = dict(raw[source])
        vectors[source] = [lookup.get(t, 0.0) for t in vocabulary]
    if mode != "none":
        ref_kind = "base" if mode == "general" else "domain"
        ref_row = score[f"{ref_kind}:-:{topic}:{family}"][prompt["id"]]
        for source in sources:
            vectors[source] = [
                v / max(ref_row[t], EPSILON) if v != 0.0 else 0.0
                for v, t in zip(vectors[source], vocabulary)]
    return vectors


def e2e_mean_tau(stub, prompt_records, sources, topic, mode, k, family,
                 truth_groups):
    """Mean tau over anchors for one (topic, mode): per-prompt vectors from
    the stub tables, mean pairwise cosine, tie-grouped rankings, tau-b
    against the given ground-truth groups."""
    per_prompt = [_source_vectors(stub, p, sources, topic, mode, k, family)
                  for p in prompt_records]
    mean_distance = {}
    for i, a in enumerate(sources):
        for b in sources[i + 1:]:
            distances = [cosine_distance(vectors[a], vectors[b])
                         for vectors in per_prompt]
            mean_distance[(a, b)] = mean_distance[(b, a)] = \
                sum(distances) / len(distances)
    taus = []
    for anchor in sources:
        others = [s for s in sources if s != anchor]
        predicted = ranking_groups(anchor, others,
                                   lambda s: mean_distance[(anchor, s)])
        taus.append(tau_b(predicted, truth_groups[anchor]))
    return sum(taus) / len(taus)
