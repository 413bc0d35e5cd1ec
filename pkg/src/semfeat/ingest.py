"""Tag-detection corpus: schema types, JSONL parsing, synthesis, and splitting.

The ingestion boundary of the pipeline is a JSONL file with one image per
line::

    {"image_id": str, "category": str, "split": "train"|"test"|"unassigned",
     "sub_images": [{"index": int, "tags": [{"label": str, "score": float}, ...]}, ...]}

Everything downstream (dictionaries, semantic objects, features) consumes the
validated, immutable ``Corpus`` produced here.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, replace
from typing import IO, Iterable, Iterator, Mapping

VALID_SPLITS = ("train", "test", "unassigned")
VALID_SLICES = (9, 16, 25)
DEFAULT_K_TAGS = 10


class CorpusFormatError(ValueError):
    """A corpus stream violates the JSONL schema or a corpus invariant."""


def normalize_label(label: str) -> str:
    """Lowercase a label and replace every whitespace character with '_'."""
    return "".join("_" if ch.isspace() else ch for ch in label.lower())


@dataclass(frozen=True)
class TagRecord:
    """One object tag: a normalized label plus its softmax score."""

    label: str
    score: float


@dataclass(frozen=True)
class SubImageTags:
    """Tags of one grid cell, sorted by score descending (ties: label asc)."""

    index: int
    tags: tuple[TagRecord, ...]


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    category: str
    split: str
    sub_images: tuple[SubImageTags, ...]

    def labels(self) -> Iterator[str]:
        """All tag labels of the image in (sub-image index, rank) order."""
        for sub in self.sub_images:
            for tag in sub.tags:
                yield tag.label


@dataclass(frozen=True)
class Corpus:
    """An immutable tag corpus; ``categories`` fixes the feature-axis order."""

    images: tuple[ImageRecord, ...]
    categories: tuple[str, ...]
    n_slices: int
    k_tags: int

    def images_of(self, category: str) -> list[ImageRecord]:
        return [im for im in self.images if im.category == category]


def _sorted_tags(tags: Iterable[TagRecord]) -> tuple[TagRecord, ...]:
    return tuple(sorted(tags, key=lambda t: (-t.score, t.label)))


def _parse_image(obj: object, line_no: int, k_tags: int | None) -> ImageRecord:
    if not isinstance(obj, dict):
        raise CorpusFormatError(f"line {line_no}: expected a JSON object")
    image_id = obj.get("image_id")
    category = obj.get("category")
    split = obj.get("split", "unassigned")
    subs = obj.get("sub_images")
    if not isinstance(image_id, str) or not image_id:
        raise CorpusFormatError(f"line {line_no}: missing or empty image_id")
    if not isinstance(category, str) or not category:
        raise CorpusFormatError(f"line {line_no}: missing or empty category")
    if split not in VALID_SPLITS:
        raise CorpusFormatError(f"line {line_no}: invalid split {split!r}")
    if not isinstance(subs, list) or not subs:
        raise CorpusFormatError(f"line {line_no}: sub_images must be a non-empty list")

    sub_images = []
    for sub in subs:
        if not isinstance(sub, dict) or not isinstance(sub.get("index"), int):
            raise CorpusFormatError(f"line {line_no}: sub-image missing integer index")
        idx = sub["index"]
        tags_raw = sub.get("tags")
        if not isinstance(tags_raw, list):
            raise CorpusFormatError(f"line {line_no}: sub-image {idx}: tags must be a list")
        if k_tags is not None and len(tags_raw) != k_tags:
            raise CorpusFormatError(
                f"line {line_no}: sub-image {idx}: expected {k_tags} tags, got {len(tags_raw)}"
            )
        tags = []
        for t in tags_raw:
            if not isinstance(t, dict):
                raise CorpusFormatError(f"line {line_no}: sub-image {idx}: malformed tag")
            label = t.get("label")
            score = t.get("score")
            if not isinstance(label, str):
                raise CorpusFormatError(f"line {line_no}: sub-image {idx}: tag label must be a string")
            label = normalize_label(label)
            if not label:
                raise CorpusFormatError(f"line {line_no}: sub-image {idx}: empty tag label")
            if not isinstance(score, (int, float)) or isinstance(score, bool):
                raise CorpusFormatError(f"line {line_no}: sub-image {idx}: tag score must be a number")
            score = float(score)
            if not 0.0 <= score <= 1.0:
                raise CorpusFormatError(
                    f"line {line_no}: sub-image {idx}: score {score} outside [0, 1]"
                )
            tags.append(TagRecord(label, score))
        sub_images.append(SubImageTags(idx, _sorted_tags(tags)))

    sub_images.sort(key=lambda s: s.index)
    indices = [s.index for s in sub_images]
    if indices != list(range(len(sub_images))):
        raise CorpusFormatError(
            f"line {line_no}: sub-image indices must be exactly 0..{len(sub_images) - 1}"
        )
    return ImageRecord(image_id, category, split, tuple(sub_images))


def parse_corpus(
    stream: Iterable[str] | IO[str],
    *,
    expected_n_slices: int | None = None,
    expected_k_tags: int | None = None,
) -> Corpus:
    """Parse and validate a line-delimited JSON corpus.

    Category order is first-appearance order; labels are case-normalized.
    Raises :class:`CorpusFormatError` naming the offending line on any
    schema violation.
    """
    images: list[ImageRecord] = []
    categories: list[str] = []
    seen_ids: set[str] = set()
    n_slices = expected_n_slices
    k_tags = expected_k_tags

    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"line {line_no}: malformed JSON ({exc.msg})") from exc

        if k_tags is None:
            # First image fixes the per-sub-image tag count for the corpus.
            probe = obj.get("sub_images") if isinstance(obj, dict) else None
            if isinstance(probe, list) and probe and isinstance(probe[0], dict):
                first_tags = probe[0].get("tags")
                if isinstance(first_tags, list):
                    k_tags = len(first_tags)
        image = _parse_image(obj, line_no, k_tags)

        if image.image_id in seen_ids:
            raise CorpusFormatError(f"line {line_no}: duplicate image_id {image.image_id!r}")
        seen_ids.add(image.image_id)

        if n_slices is None:
            n_slices = len(image.sub_images)
            if n_slices not in VALID_SLICES:
                raise CorpusFormatError(
                    f"line {line_no}: n_slices must be one of {VALID_SLICES}, got {n_slices}"
                )
        elif len(image.sub_images) != n_slices:
            raise CorpusFormatError(
                f"line {line_no}: expected {n_slices} sub-images, got {len(image.sub_images)}"
            )
        if image.category not in categories:
            categories.append(image.category)
        images.append(image)

    return Corpus(tuple(images), tuple(categories), n_slices or 0, k_tags or 0)


def serialize_corpus(corpus: Corpus) -> Iterator[str]:
    """Yield one JSON line per image; exact inverse of :func:`parse_corpus`."""
    for im in corpus.images:
        yield json.dumps(
            {
                "image_id": im.image_id,
                "category": im.category,
                "split": im.split,
                "sub_images": [
                    {
                        "index": sub.index,
                        "tags": [{"label": t.label, "score": t.score} for t in sub.tags],
                    }
                    for sub in im.sub_images
                ],
            },
            sort_keys=True,
        )


def write_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in serialize_corpus(corpus):
            fh.write(line + "\n")


def load_corpus(path, **kwargs) -> Corpus:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_corpus(fh, **kwargs)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a planted-signature corpus.

    Each category owns a signature label set; sub-image tags are drawn from
    the signature with probability ``signature_probability`` (placed as
    adjacent pairs, so planted co-occurrence exists in the concatenated
    token stream) and from the shared noise pool otherwise.
    """

    signatures: Mapping[str, tuple[str, ...]]
    noise_labels: tuple[str, ...]
    images_per_category: int
    signature_probability: float
    n_slices: int = 9
    k_tags: int = DEFAULT_K_TAGS


def _validate_synthetic_spec(spec: SyntheticSpec) -> None:
    if len(spec.signatures) < 2:
        raise ValueError("need at least 2 categories")
    if spec.images_per_category < 2:
        raise ValueError("need at least 2 images per category")
    q = spec.signature_probability
    if not 0.0 < q <= 1.0:
        raise ValueError(f"signature probability {q} outside (0, 1]")
    if q < 1.0 and not spec.noise_labels:
        raise ValueError("noise pool is empty but signature probability < 1")
    if spec.n_slices not in VALID_SLICES:
        raise ValueError(f"n_slices must be one of {VALID_SLICES}")
    if spec.k_tags < 1:
        raise ValueError("k_tags must be >= 1")
    for cat, sig in spec.signatures.items():
        if len(set(sig)) < 2:
            raise ValueError(f"category {cat!r}: signature set needs >= 2 distinct labels")


def _draw_labels(
    rng: random.Random, sig: tuple[str, ...], noise: tuple[str, ...], q: float, k: int
) -> list[str]:
    out: list[str] = []
    pending: str | None = None
    while len(out) < k:
        if pending is not None:
            out.append(pending)
            pending = None
        elif rng.random() < q:
            a = rng.choice(sig)
            b = rng.choice([s for s in sig if s != a])
            out.append(a)
            if len(out) < k:
                pending = b
        else:
            out.append(rng.choice(noise))
    return out


def _draw_scores(rng: random.Random, k: int) -> list[float]:
    vals: set[float] = set()
    while len(vals) < k:
        vals.add(1.0 - rng.random())  # (0, 1]
    return sorted(vals, reverse=True)


def generate_synthetic(spec: SyntheticSpec, seed: int) -> Corpus:
    """Deterministically synthesize a corpus from ``spec``; pure in (spec, seed)."""
    _validate_synthetic_spec(spec)
    rng = random.Random(seed)
    signatures = {
        cat: tuple(normalize_label(s) for s in sig) for cat, sig in spec.signatures.items()
    }
    noise = tuple(normalize_label(s) for s in spec.noise_labels)

    images = []
    for cat, sig in signatures.items():
        for i in range(spec.images_per_category):
            subs = []
            for s in range(spec.n_slices):
                labels = _draw_labels(rng, sig, noise, spec.signature_probability, spec.k_tags)
                scores = _draw_scores(rng, spec.k_tags)
                tags = tuple(TagRecord(lab, sc) for lab, sc in zip(labels, scores))
                subs.append(SubImageTags(s, tags))
            images.append(ImageRecord(f"{cat}_{i:04d}", cat, "unassigned", tuple(subs)))
    return Corpus(tuple(images), tuple(signatures), spec.n_slices, spec.k_tags)


def split_corpus(corpus: Corpus, train_fraction: float, seed: int) -> Corpus:
    """Stratified random train/test assignment; only the ``split`` field changes.

    Per category the training count is round(train_fraction * size), with at
    least one image on each side. Deterministic per seed.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train fraction {train_fraction} outside (0, 1)")
    rng = random.Random(seed)
    assignment: dict[int, str] = {}
    for cat in corpus.categories:
        idxs = [i for i, im in enumerate(corpus.images) if im.category == cat]
        if len(idxs) < 2:
            raise ValueError(f"category {cat!r} has {len(idxs)} image(s); need >= 2 to split")
        n_train = int(math.floor(train_fraction * len(idxs) + 0.5))
        n_train = max(1, min(len(idxs) - 1, n_train))
        shuffled = list(idxs)
        rng.shuffle(shuffled)
        train = set(shuffled[:n_train])
        for i in idxs:
            assignment[i] = "train" if i in train else "test"
    images = tuple(replace(im, split=assignment[i]) for i, im in enumerate(corpus.images))
    return replace(corpus, images=images)
