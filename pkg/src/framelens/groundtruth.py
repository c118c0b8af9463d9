"""Ground-truth similarity rankings for validating predicted rankings.

Two kinds of ground truth are supported: audience-survey tables (share of
adults per ideology category, normalized by the all-adults baseline per
outlet, compared by cosine distance) and expert leaning labels on the
five-point left..right scale (compared by absolute distance). Both reduce to
the same ranking construction as the measurement module, so ranking and tau
code paths are shared, ties included.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .measure import (DistanceMatrix, SimilarityRanking, cosine_distance,
                      similarity_rankings)

log = logging.getLogger(__name__)

LEANING_VALUES = {
    "left": -2,
    "lean-left": -1,
    "center": 0,
    "lean-right": 1,
    "right": 2,
}

_BASELINE_RE = re.compile(r"all\s+u\.?s\.?\s+adults|all\s+adults", re.I)


class GroundTruthError(ValueError):
    pass


@dataclass
class SurveyTable:
    """Outlets x ideology categories, percentages in [0, 100]. One category
    is the distinguished all-adults baseline."""

    outlets: list[str]
    categories: list[str]
    shares: np.ndarray
    baseline: str

    def __post_init__(self):
        self.shares = np.asarray(self.shares, dtype=float)
        if self.shares.shape != (len(self.outlets), len(self.categories)):
            raise GroundTruthError(
                f"shares shape {self.shares.shape} does not match "
                f"{len(self.outlets)} outlets x {len(self.categories)} "
                f"categories")
        if self.baseline not in self.categories:
            raise GroundTruthError(
                f"baseline {self.baseline!r} not among categories")
        if not np.all(np.isfinite(self.shares)):
            raise GroundTruthError("shares must be finite")


@dataclass(frozen=True)
class IdeologyProfile:
    outlet: str
    categories: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if any(v < 0 for v in self.values):
            raise GroundTruthError(
                f"profile for {self.outlet!r} has negative values")


@dataclass(frozen=True)
class LeaningScore:
    outlet: str
    leaning: int

    def __post_init__(self):
        if self.leaning not in (-2, -1, 0, 1, 2):
            raise GroundTruthError(
                f"leaning for {self.outlet!r} out of range: {self.leaning}")


def normalize_survey(table: SurveyTable) -> list[IdeologyProfile]:
    """Divide each outlet's per-category share by its all-adults baseline
    share, removing outlet popularity. E.g. 67% of Democrats over 47% of all
    adults gives 1.43."""
    baseline_idx = table.categories.index(table.baseline)
    other = [(i, c) for i, c in enumerate(table.categories)
             if i != baseline_idx]
    profiles = []
    for row, outlet in enumerate(table.outlets):
        base = table.shares[row, baseline_idx]
        if base <= 0:
            raise GroundTruthError(
                f"outlet {outlet!r}: baseline share is {base}; "
                f"profile undefined")
        profiles.append(IdeologyProfile(
            outlet=outlet,
            categories=tuple(c for _, c in other),
            values=tuple(float(table.shares[row, i] / base)
                         for i, _ in other)))
    return profiles


def survey_distance(a: IdeologyProfile, b: IdeologyProfile) -> float:
    if a.categories != b.categories:
        raise GroundTruthError(
            f"category mismatch between {a.outlet!r} and {b.outlet!r}")
    return cosine_distance(a.values, b.values)


def leaning_distance(a: LeaningScore, b: LeaningScore) -> float:
    return float(abs(a.leaning - b.leaning))


def ground_truth_rankings(entries) -> list[SimilarityRanking]:
    """Similarity rankings from ideology profiles or leaning scores, with the
    same construction and tie rules as the measurement module. Leaning-based
    rankings typically contain ties; these carry into tau-b downstream."""
    entries = list(entries)
    if len(entries) < 3:
        raise GroundTruthError("need at least 3 outlets")
    if all(isinstance(e, IdeologyProfile) for e in entries):
        metric = survey_distance
    elif all(isinstance(e, LeaningScore) for e in entries):
        metric = leaning_distance
    else:
        raise GroundTruthError(
            "entries must be all profiles or all leaning scores")
    entries.sort(key=lambda e: e.outlet)
    outlets = [e.outlet for e in entries]
    if len(set(outlets)) != len(outlets):
        raise GroundTruthError("duplicate outlet")
    n = len(entries)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            values[i, j] = values[j, i] = metric(entries[i], entries[j])
    return similarity_rankings(DistanceMatrix(
        outlets, values, cosine_bound=metric is survey_distance))


def restrict_outlets(entries, wanted: list[str]):
    """Keep only the wanted outlets, warning about mismatches on both sides
    (ground-truth datasets often cover a subset of the experiment)."""
    by_outlet = {e.outlet: e for e in entries}
    missing = sorted(set(wanted) - set(by_outlet))
    extra = sorted(set(by_outlet) - set(wanted))
    if missing:
        log.warning("outlets absent from ground truth, dropped: %s",
                    ", ".join(missing))
    if extra:
        log.warning("ground-truth outlets not in experiment, dropped: %s",
                    ", ".join(extra))
    return [by_outlet[o] for o in wanted if o in by_outlet]


# ---------------------------------------------------------------------------
# input files
# ---------------------------------------------------------------------------

def _parse_share(raw: str, where: str) -> float:
    value = raw.strip().rstrip("%").strip()
    try:
        return float(value)
    except ValueError:
        raise GroundTruthError(f"{where}: cannot parse share {raw!r}")


def load_survey_table(path: str | Path, *, delimiter: str = ",",
                      baseline: str | None = None) -> SurveyTable:
    """Read a delimited survey table: header row of categories (first column
    names the outlet), one row per outlet, percentages with or without the %
    sign. The baseline category defaults to the one matching "all adults"."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        rows = [row for row in reader if row and any(c.strip() for c in row)]
    if len(rows) < 2:
        raise GroundTruthError(f"{path}: need a header and at least one row")
    categories = [c.strip() for c in rows[0][1:]]
    if baseline is None:
        matches = [c for c in categories if _BASELINE_RE.search(c)]
        if len(matches) != 1:
            raise GroundTruthError(
                f"{path}: cannot identify the all-adults baseline among "
                f"{categories}; pass baseline= explicitly")
        baseline = matches[0]
    outlets = []
    shares = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(categories) + 1:
            raise GroundTruthError(
                f"{path}: line {lineno}: expected {len(categories) + 1} "
                f"columns, got {len(row)}")
        outlets.append(row[0].strip())
        shares.append([_parse_share(c, f"{path}: line {lineno}")
                       for c in row[1:]])
    return SurveyTable(outlets, categories, np.array(shares), baseline)


def load_leaning_scores(path: str | Path, *,
                        delimiter: str = ",") -> list[LeaningScore]:
    """Read a two-column outlet/leaning file. Leanings are the five labels
    (left, lean-left, center, lean-right, right) or their integers -2..2."""
    path = Path(path)
    scores = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, row in enumerate(reader, start=1):
            if not row or not any(c.strip() for c in row):
                continue
            if len(row) != 2:
                raise GroundTruthError(
                    f"{path}: line {lineno}: expected 2 columns, got "
                    f"{len(row)}")
            outlet, raw = row[0].strip(), row[1].strip().lower()
            if lineno == 1 and raw in ("leaning", "label"):
                continue
            if raw in LEANING_VALUES:
                leaning = LEANING_VALUES[raw]
            else:
                try:
                    leaning = int(raw)
                except ValueError:
                    raise GroundTruthError(
                        f"{path}: line {lineno}: unknown leaning {row[1]!r}")
            scores.append(LeaningScore(outlet, leaning))
    return scores
