"""Candidate selection and pattern-graph retrieval of semantic objects.

The pattern dictionary is viewed as an undirected graph whose vertices are
labels and whose edge weights are pair frequencies. The four retrieval rules
map onto that graph as follows:

* P1: direct neighbors of the anchor, scored by edge frequency.
* P2: mutual relatedness of the anchor's neighbors; from the anchor's own
  perspective this retrieves the same neighbor set as P1.
* P4: vertices at distance exactly two via a chain anchor-b-c, scored by
  min(freq(anchor, b), freq(b, c)); multiple chains keep the max score.
* P3: the same distance-two closure, but traced as P3 when the chain's
  first edge is not the anchor's highest-frequency edge (the two-distinct-
  neighbors reading).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .dictionary import PatternDictionary
from .ingest import ImageRecord

PROPOSITIONS = ("P1", "P2", "P3", "P4")
DEFAULT_K_CAND = 5
DEFAULT_S_SEM = 5
DEFAULT_MODES = ("P1", "P4")


@dataclass(frozen=True)
class CandidateSet:
    """An image's most frequent raw labels, the anchors for dictionary lookup."""

    image_id: str
    candidates: tuple[str, ...]
    raw_support: dict[str, int]


@dataclass(frozen=True)
class SemanticObjectSet:
    """Related objects retrieved for one image against one category dictionary.

    ``objects`` holds (label, pair_frequency_score); ``proposition_trace``
    records which rule supplied each retained object's score.
    """

    image_id: str
    category: str
    objects: tuple[tuple[str, int], ...]
    proposition_trace: dict[str, str]


def select_candidates(image: ImageRecord, k_cand: int = DEFAULT_K_CAND) -> CandidateSet:
    """Top-``k_cand`` labels by frequency across the image's sub-image tags."""
    if k_cand < 1:
        raise ValueError("k_cand must be >= 1")
    hist = Counter(image.labels())
    ordered = sorted(hist.items(), key=lambda kv: (-kv[1], kv[0]))
    return CandidateSet(
        image_id=image.image_id,
        candidates=tuple(label for label, _ in ordered[:k_cand]),
        raw_support=dict(hist),
    )


class PatternGraph:
    """Adjacency view over a pattern dictionary with memoized retrievals.

    Extraction calls the same anchors for every image of a run, so per-anchor
    results are cached. The graph is read-only after construction.
    """

    def __init__(self, pattern: PatternDictionary):
        adj: dict[str, dict[str, int]] = {}
        for (a, b), n in pattern.pairs.items():
            adj.setdefault(a, {})[b] = n
            adj.setdefault(b, {})[a] = n
        self._adj = adj
        self._direct_cache: dict[str, dict[str, tuple[int, str]]] = {}
        self._twohop_cache: dict[str, dict[str, tuple[int, str]]] = {}

    def direct(self, anchor: str) -> dict[str, tuple[int, str]]:
        """label -> (edge frequency, trace tag)."""
        hit = self._direct_cache.get(anchor)
        if hit is None:
            hit = {b: (f, "P1") for b, f in self._adj.get(anchor, {}).items()}
            self._direct_cache[anchor] = hit
        return hit

    def two_hop(self, anchor: str) -> dict[str, tuple[int, str]]:
        """Distance-exactly-2 closure: label -> (min-edge score, trace tag)."""
        hit = self._twohop_cache.get(anchor)
        if hit is not None:
            return hit
        neighbors = self._adj.get(anchor, {})
        top_edge = max(neighbors.values()) if neighbors else 0
        # Best path per target: higher min-score wins, then higher first
        # edge; iterating intermediates in sorted order makes remaining ties
        # keep the lexicographically smallest one.
        best: dict[str, tuple[int, int]] = {}
        for b in sorted(neighbors):
            f1 = neighbors[b]
            for c, f2 in self._adj.get(b, {}).items():
                if c == anchor or c in neighbors:
                    continue
                cand = (min(f1, f2), f1)
                if best.get(c, (-1, -1)) < cand:
                    best[c] = cand
        hit = {
            c: (score, "P3" if f1 != top_edge else "P4")
            for c, (score, f1) in best.items()
        }
        self._twohop_cache[anchor] = hit
        return hit

    def related(self, anchor: str, mode: str) -> dict[str, tuple[int, str]]:
        if mode in ("P1", "P2"):
            found = self.direct(anchor)
            if mode == "P2":
                found = {c: (f, "P2") for c, (f, _) in found.items()}
            return found
        if mode in ("P3", "P4"):
            found = self.two_hop(anchor)
            if mode == "P4":
                found = {c: (f, "P4") for c, (f, _) in found.items()}
            return found
        raise ValueError(f"unknown proposition {mode!r}")


def normalize_modes(modes: Iterable[str]) -> tuple[str, ...]:
    canon = tuple(m.upper() for m in modes)
    unknown = [m for m in canon if m not in PROPOSITIONS]
    if unknown:
        raise ValueError(f"unknown proposition(s): {unknown}")
    if not canon:
        raise ValueError("at least one proposition mode is required")
    return tuple(p for p in PROPOSITIONS if p in canon)


def related_by_proposition(
    pattern: PatternDictionary, anchor: str, mode: str
) -> list[tuple[str, int]]:
    """Objects related to ``anchor`` under one proposition, scored.

    Output sorted by score descending, ties by label ascending; the anchor
    itself is never returned. An anchor absent from the graph yields [].
    """
    (mode,) = normalize_modes([mode])
    found = PatternGraph(pattern).related(anchor, mode)
    return sorted(((c, f) for c, (f, _) in found.items()), key=lambda kv: (-kv[1], kv[0]))


def extract_semantic_objects(
    pattern: PatternDictionary | PatternGraph,
    cands: CandidateSet,
    raw_labels: frozenset[str] | set[str],
    s_sem: int = DEFAULT_S_SEM,
    modes: Sequence[str] = DEFAULT_MODES,
    category: str | None = None,
) -> SemanticObjectSet:
    """Union proposition retrievals over all candidates, filter, rank, truncate.

    Labels already among the image's raw tags are excluded. Ranking key is
    (candidate consensus, pair-frequency score, label): an object related to
    more candidates outranks single-candidate relations, then higher score,
    then lexicographic order.
    """
    if s_sem < 1:
        raise ValueError("s_sem must be >= 1")
    modes = normalize_modes(modes)
    if isinstance(pattern, PatternGraph):
        graph = pattern
        if category is None:
            raise ValueError("category is required when passing a prebuilt graph")
    else:
        graph = PatternGraph(pattern)
        category = category or pattern.category

    score: dict[str, int] = {}
    trace: dict[str, str] = {}
    supporters: dict[str, set[str]] = {}
    for anchor in cands.candidates:
        for mode in modes:
            for label, (s, tag) in graph.related(anchor, mode).items():
                if label in raw_labels:
                    continue
                supporters.setdefault(label, set()).add(anchor)
                if label not in score or s > score[label]:
                    score[label] = s
                    trace[label] = tag

    ranked = sorted(
        score.items(), key=lambda kv: (-len(supporters[kv[0]]), -kv[1], kv[0])
    )[:s_sem]
    return SemanticObjectSet(
        image_id=cands.image_id,
        category=category,
        objects=tuple(ranked),
        proposition_trace={label: trace[label] for label, _ in ranked},
    )
