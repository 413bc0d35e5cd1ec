"""Semantic scene features from object-tag co-occurrence dictionaries."""

from .ingest import (
    Corpus,
    ImageRecord,
    SubImageTags,
    SyntheticSpec,
    TagRecord,
    generate_synthetic,
    parse_corpus,
    serialize_corpus,
    split_corpus,
)
from .dictionary import (
    PatternDictionary,
    RawDictionary,
    build_pattern_dictionary,
    build_raw_dictionary,
    probability,
)
from .semantic import (
    CandidateSet,
    SemanticObjectSet,
    extract_semantic_objects,
    related_by_proposition,
    select_candidates,
)
from .features import (
    DeltaKind,
    FeatureVector,
    NormalizationModel,
    apply_normalization,
    delta,
    featurize,
    fit_normalization,
)
from .classify import (
    BinarySvmModel,
    EvalReport,
    MulticlassModel,
    cross_validate,
    evaluate,
    predict,
    train_binary,
    train_multiclass,
)
from .pipeline import AblationGrid, PipelineConfig, run_ablation, run_pipeline

__all__ = [
    "AblationGrid",
    "BinarySvmModel",
    "CandidateSet",
    "Corpus",
    "DeltaKind",
    "EvalReport",
    "FeatureVector",
    "ImageRecord",
    "MulticlassModel",
    "NormalizationModel",
    "PatternDictionary",
    "PipelineConfig",
    "RawDictionary",
    "SemanticObjectSet",
    "SubImageTags",
    "SyntheticSpec",
    "TagRecord",
    "apply_normalization",
    "build_pattern_dictionary",
    "build_raw_dictionary",
    "cross_validate",
    "delta",
    "evaluate",
    "extract_semantic_objects",
    "featurize",
    "fit_normalization",
    "generate_synthetic",
    "parse_corpus",
    "predict",
    "probability",
    "related_by_proposition",
    "run_ablation",
    "run_pipeline",
    "select_candidates",
    "serialize_corpus",
    "split_corpus",
    "train_binary",
    "train_multiclass",
]
