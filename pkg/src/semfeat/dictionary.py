"""Per-category token streams and adjacent-pair co-occurrence dictionaries."""

from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Mapping

from .ingest import Corpus

log = logging.getLogger(__name__)

PairKey = tuple[str, str]

DEFAULT_MAX_IMAGES = 100


@dataclass(frozen=True)
class RawDictionary:
    """Ordered concatenation of one category's training tag labels.

    ``tokens`` preserves (image order, sub-image index order, tag rank order).
    ``tokens`` is None for dictionaries reloaded from disk, where only the
    digest survives; counts and total remain authoritative.
    ``segment_size`` is the per-sub-image token count, used when pair
    counting is restricted to within a sub-image.
    """

    category: str
    tokens: tuple[str, ...] | None
    counts: dict[str, int]
    total: int
    segment_size: int | None = None


@dataclass(frozen=True)
class PatternDictionary:
    """Unordered adjacent-pair frequencies, rank-sorted."""

    category: str
    pairs: dict[PairKey, int]
    ranked: tuple[tuple[PairKey, int], ...]


def canonical_pair(a: str, b: str) -> PairKey:
    return (a, b) if a <= b else (b, a)


def build_raw_dictionary(corpus: Corpus, category: str, max_images: int = DEFAULT_MAX_IMAGES) -> RawDictionary:
    """Concatenate tag labels of the first ``max_images`` training images.

    Each image contributes n_slices * k_tags tokens in sub-image-index then
    rank order. When fewer than ``max_images`` training images exist, all
    available ones are used.
    """
    if max_images < 1:
        raise ValueError("max_images must be >= 1")
    if category not in corpus.categories:
        raise ValueError(f"unknown category {category!r}")
    eligible = [im for im in corpus.images if im.category == category and im.split == "train"]
    if not eligible:
        raise ValueError(f"no eligible train images for category {category!r}")
    tokens: list[str] = []
    for im in eligible[:max_images]:
        tokens.extend(im.labels())
    return RawDictionary(
        category=category,
        tokens=tuple(tokens),
        counts=dict(Counter(tokens)),
        total=len(tokens),
        segment_size=corpus.k_tags or None,
    )


def rank_pairs(pairs: Mapping[PairKey, int]) -> tuple[tuple[PairKey, int], ...]:
    """Frequency descending, ties by pair lexicographic ascending."""
    return tuple(sorted(pairs.items(), key=lambda kv: (-kv[1], kv[0])))


def build_pattern_dictionary(
    raw: RawDictionary,
    *,
    within_subimage: bool = False,
    count_both_directions: bool = False,
) -> PatternDictionary:
    """Count unordered adjacent label pairs in the raw token stream.

    Identical-adjacent-label pairs are skipped. By default each adjacency is
    counted once (canonical unordered pair); ``count_both_directions``
    restores the literal forward+backward scan, which doubles every
    frequency uniformly. ``within_subimage`` drops pairs that straddle a
    sub-image boundary.
    """
    if raw.total < 2:
        log.warning("raw dictionary %r has %d token(s); pattern dictionary is empty",
                    raw.category, raw.total)
        return PatternDictionary(raw.category, {}, ())
    if raw.tokens is None:
        raise ValueError("raw dictionary was loaded without tokens; rebuild from a corpus")
    step = 2 if count_both_directions else 1
    seg = raw.segment_size if within_subimage else None
    pairs: Counter[PairKey] = Counter()
    toks = raw.tokens
    for t in range(len(toks) - 1):
        if seg and (t + 1) % seg == 0:
            continue
        a, b = toks[t], toks[t + 1]
        if a == b:
            continue
        pairs[canonical_pair(a, b)] += step
    return PatternDictionary(raw.category, dict(pairs), rank_pairs(pairs))


def probability(raw: RawDictionary, label: str) -> float:
    """Relative frequency of ``label`` in the raw dictionary; 0 when absent."""
    if raw.total < 1:
        raise ValueError("raw dictionary is empty")
    return raw.counts.get(label, 0) / raw.total


def tokens_digest(tokens: tuple[str, ...]) -> str:
    # Labels contain no whitespace, so newline-joining is injective.
    return hashlib.sha256("\n".join(tokens).encode("utf-8")).hexdigest()


def save_dictionary(raw: RawDictionary, pattern: PatternDictionary, path) -> None:
    """Write one category's dictionaries as deterministic JSON."""
    payload = {
        "category": raw.category,
        "total": raw.total,
        "tokens_sha256": tokens_digest(raw.tokens) if raw.tokens is not None else None,
        "segment_size": raw.segment_size,
        "counts": raw.counts,
        "pairs": [[a, b, n] for (a, b), n in pattern.ranked],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_dictionary(path) -> tuple[RawDictionary, PatternDictionary]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    raw = RawDictionary(
        category=payload["category"],
        tokens=None,
        counts={str(k): int(v) for k, v in payload["counts"].items()},
        total=int(payload["total"]),
        segment_size=payload.get("segment_size"),
    )
    pairs = {canonical_pair(a, b): int(n) for a, b, n in payload["pairs"]}
    ranked = tuple(((a, b), int(n)) for a, b, n in payload["pairs"])
    return raw, PatternDictionary(raw.category, pairs, ranked)
