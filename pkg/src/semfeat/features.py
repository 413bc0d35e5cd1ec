"""Delta weightings, probability fusion, normalization, and feature export.

Each image gets one real value per category: the sum over its semantic
objects of delta(object) * p(object | category dictionary). Six delta
variants are supported:

    normal      f / c                 (identical to the probability itself)
    avg         p / sum of all p over the image's (object, category) terms
    normalized  p / p^(1/4) = p^(3/4)
    multi       p * f
    root        sqrt(p)
    divide      p / 10^k

Division hazards are removed by add-1 smoothing of the frequency counts
involved, applied only when a denominator would be zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Mapping, Sequence

from .dictionary import PatternDictionary, RawDictionary
from .ingest import ImageRecord
from .semantic import (
    DEFAULT_K_CAND,
    DEFAULT_MODES,
    DEFAULT_S_SEM,
    PatternGraph,
    SemanticObjectSet,
    extract_semantic_objects,
    select_candidates,
)

DELTA_VARIANTS = ("normal", "avg", "normalized", "multi", "root", "divide")
LAYOUTS = ("category", "per-object")


@dataclass(frozen=True)
class DeltaKind:
    variant: str
    divide_exponent: int = 1

    def __post_init__(self):
        if self.variant not in DELTA_VARIANTS:
            raise ValueError(f"unknown delta variant {self.variant!r}")
        if self.divide_exponent < 0:
            raise ValueError("divide exponent must be >= 0")


@dataclass(frozen=True)
class ProbabilityEntry:
    """Frequency and total backing one p(object | dictionary) value."""

    frequency: int
    total: int

    @property
    def probability(self) -> float:
        return self.frequency / self.total if self.total else 0.0

    @property
    def smoothed(self) -> float:
        return (self.frequency + 1) / (self.total + 1)


ProbabilityContext = Mapping[tuple[str, str], ProbabilityEntry]


@dataclass(frozen=True)
class FeatureVector:
    image_id: str
    values: tuple[float, ...]
    label: str


@dataclass(frozen=True)
class NormalizationModel:
    """Per-attribute (min, max) learned on training vectors."""

    mins: tuple[float, ...]
    maxs: tuple[float, ...]


def _smoothed_probability(raw: RawDictionary, label: str) -> float:
    entry = ProbabilityEntry(raw.counts.get(label, 0), raw.total)
    return entry.probability if raw.total else entry.smoothed


def delta(kind: DeltaKind, raw: RawDictionary, label: str, context: ProbabilityContext) -> float:
    """One delta value for ``label`` against ``raw``; never raises on zeros."""
    f = raw.counts.get(label, 0)
    p = _smoothed_probability(raw, label)
    v = kind.variant
    if v == "normal":
        return p
    if v == "avg":
        denom = sum(e.probability for e in context.values())
        if denom > 0.0:
            return p / denom
        denom = sum(e.smoothed for e in context.values())
        if denom == 0.0:  # empty context: no terms exist at all
            return 0.0
        return ProbabilityEntry(f, raw.total).smoothed / denom
    if v == "normalized":
        if p == 0.0:
            p = ProbabilityEntry(f, raw.total).smoothed
        return p ** 0.75
    if v == "multi":
        return p * f
    if v == "root":
        return math.sqrt(p)
    if v == "divide":
        return p / 10 ** kind.divide_exponent
    raise AssertionError(v)


def semantic_profile(
    image: ImageRecord,
    dictionaries: Mapping[str, tuple[RawDictionary, PatternDictionary]],
    categories: Sequence[str],
    k_cand: int = DEFAULT_K_CAND,
    s_sem: int = DEFAULT_S_SEM,
    modes: Sequence[str] = DEFAULT_MODES,
    graphs: Mapping[str, PatternGraph] | None = None,
) -> dict[str, SemanticObjectSet]:
    """Semantic object sets of one image against every category dictionary."""
    missing = [c for c in categories if c not in dictionaries]
    if missing:
        raise ValueError(f"missing dictionary for categories: {missing}")
    raw_labels = frozenset(image.labels())
    cands = select_candidates(image, k_cand)
    profile = {}
    for cat in categories:
        graph = graphs[cat] if graphs is not None else dictionaries[cat][1]
        profile[cat] = extract_semantic_objects(
            graph, cands, raw_labels, s_sem=s_sem, modes=modes, category=cat
        )
    return profile


def _vector_from_profile(
    profile: Mapping[str, SemanticObjectSet],
    dictionaries: Mapping[str, tuple[RawDictionary, PatternDictionary]],
    categories: Sequence[str],
    kind: DeltaKind,
    s_sem: int,
    layout: str,
) -> tuple[float, ...]:
    context: dict[tuple[str, str], ProbabilityEntry] = {}
    for cat in categories:
        raw = dictionaries[cat][0]
        for label, _ in profile[cat].objects:
            context[(cat, label)] = ProbabilityEntry(raw.counts.get(label, 0), raw.total)

    values: list[float] = []
    for cat in categories:
        raw = dictionaries[cat][0]
        terms = [
            delta(kind, raw, label, context) * _smoothed_probability(raw, label)
            for label, _ in profile[cat].objects
        ]
        if layout == "per-object":
            values.extend(terms + [0.0] * (s_sem - len(terms)))
        else:
            values.append(math.fsum(terms))
    if not all(math.isfinite(x) for x in values):
        raise ValueError("non-finite feature value")
    return tuple(values)


def featurize(
    image: ImageRecord,
    dictionaries: Mapping[str, tuple[RawDictionary, PatternDictionary]],
    kind: DeltaKind,
    categories: Sequence[str],
    k_cand: int = DEFAULT_K_CAND,
    s_sem: int = DEFAULT_S_SEM,
    modes: Sequence[str] = DEFAULT_MODES,
    layout: str = "category",
) -> FeatureVector:
    """Fuse delta and probability into one value per category (Eq. layout).

    With layout="per-object" the per-term products are emitted instead, as
    m blocks of s_sem zero-padded slots.
    """
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}")
    profile = semantic_profile(image, dictionaries, categories, k_cand, s_sem, modes)
    values = _vector_from_profile(profile, dictionaries, categories, kind, s_sem, layout)
    return FeatureVector(image.image_id, values, image.category)


def featurize_corpus(
    images: Sequence[ImageRecord],
    dictionaries: Mapping[str, tuple[RawDictionary, PatternDictionary]],
    kind: DeltaKind,
    categories: Sequence[str],
    k_cand: int = DEFAULT_K_CAND,
    s_sem: int = DEFAULT_S_SEM,
    modes: Sequence[str] = DEFAULT_MODES,
    layout: str = "category",
    collect_profiles: bool = False,
) -> tuple[list[FeatureVector], list[dict[str, SemanticObjectSet]]]:
    """Batch featurize sharing one pattern graph per category across images."""
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}")
    missing = [c for c in categories if c not in dictionaries]
    if missing:
        raise ValueError(f"missing dictionary for categories: {missing}")
    graphs = {cat: PatternGraph(dictionaries[cat][1]) for cat in categories}
    vectors = []
    profiles = []
    for image in images:
        profile = semantic_profile(
            image, dictionaries, categories, k_cand, s_sem, modes, graphs=graphs
        )
        values = _vector_from_profile(profile, dictionaries, categories, kind, s_sem, layout)
        vectors.append(FeatureVector(image.image_id, values, image.category))
        if collect_profiles:
            profiles.append(profile)
    return vectors, profiles


def fit_normalization(train: Sequence[FeatureVector]) -> NormalizationModel:
    """Per-attribute min/max over the training vectors."""
    if not train:
        raise ValueError("need at least one training vector")
    dim = len(train[0].values)
    if any(len(v.values) != dim for v in train):
        raise ValueError("inconsistent feature dimensions")
    mins = tuple(min(v.values[j] for v in train) for j in range(dim))
    maxs = tuple(max(v.values[j] for v in train) for j in range(dim))
    return NormalizationModel(mins, maxs)


def apply_normalization(model: NormalizationModel, v: FeatureVector) -> FeatureVector:
    """Map each attribute to (x - min) / (max - min), clipped to [0, 1].

    Attributes constant on the training set map to 0.
    """
    if len(v.values) != len(model.mins):
        raise ValueError(
            f"dimension mismatch: vector has {len(v.values)}, model has {len(model.mins)}"
        )
    out = []
    for x, mn, mx in zip(v.values, model.mins, model.maxs):
        if mx == mn:
            out.append(0.0)
        else:
            out.append(min(1.0, max(0.0, (x - mn) / (mx - mn))))
    return FeatureVector(v.image_id, tuple(out), v.label)


def write_csv(vectors: Sequence[FeatureVector], fh: IO[str]) -> None:
    """``image_id,label,v1..vm`` with round-trip float formatting."""
    dim = len(vectors[0].values) if vectors else 0
    header = ["image_id", "label"] + [f"v{j + 1}" for j in range(dim)]
    fh.write(",".join(header) + "\n")
    for v in vectors:
        fh.write(",".join([v.image_id, v.label] + [repr(x) for x in v.values]) + "\n")


def write_svmlight(
    vectors: Sequence[FeatureVector], categories: Sequence[str], fh: IO[str]
) -> None:
    """Sparse ``<label-index> <attr>:<value>`` lines, 1-based attributes.

    A leading comment records the category axis so evaluation reports can
    name classes; standard svmlight readers ignore it.
    """
    fh.write("# categories: " + ",".join(categories) + "\n")
    if vectors:
        fh.write(f"# dim: {len(vectors[0].values)}\n")
    index = {c: i for i, c in enumerate(categories)}
    for v in vectors:
        parts = [str(index[v.label])]
        parts += [f"{j + 1}:{x!r}" for j, x in enumerate(v.values) if x != 0.0]
        fh.write(" ".join(parts) + "\n")


def read_svmlight(fh: IO[str]) -> tuple[list[tuple[float, ...]], list[int], list[str] | None]:
    """Inverse of :func:`write_svmlight`; infers dimension when no axis comment."""
    categories: list[str] | None = None
    dim: int | None = None
    rows: list[dict[int, float]] = []
    labels: list[int] = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("categories:"):
                categories = [c for c in body[len("categories:"):].strip().split(",") if c]
            elif body.startswith("dim:"):
                dim = int(body[len("dim:"):].strip())
            continue
        parts = line.split()
        labels.append(int(parts[0]))
        row = {}
        for item in parts[1:]:
            attr, val = item.split(":")
            row[int(attr) - 1] = float(val)
        rows.append(row)
    if dim is None:
        dim = len(categories) if categories else max((max(r) + 1 for r in rows if r), default=0)
    vectors = [tuple(r.get(j, 0.0) for j in range(dim)) for r in rows]
    return vectors, labels, categories
