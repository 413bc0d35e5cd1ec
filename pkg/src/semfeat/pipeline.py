"""End-to-end pipeline orchestration and the ablation harness."""

from __future__ import annotations

import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from . import classify, dictionary, features, ingest, semantic

ABLATION_AXES = ("dictionary_size", "sub_images", "delta")

# dictionary size = images * slices * tags; the built-in presets assume the
# default 10 tags and pin (max_images, n_slices).
DICTIONARY_SIZE_PRESETS = {9000: (100, 9), 16000: (100, 16), 25000: (100, 25)}

WORKERS_ENV = "SEMFEAT_WORKERS"


class ConfigError(ValueError):
    """Invalid pipeline configuration, raised before any stage runs."""


class StageError(RuntimeError):
    """A pipeline stage failed; the message names the stage."""


@dataclass(frozen=True)
class PipelineConfig:
    corpus: str | None = None
    synthetic: ingest.SyntheticSpec | None = None
    out_dir: str = "out"
    max_images: int = dictionary.DEFAULT_MAX_IMAGES
    k_cand: int = semantic.DEFAULT_K_CAND
    s_sem: int = semantic.DEFAULT_S_SEM
    propositions: tuple[str, ...] = semantic.DEFAULT_MODES
    delta: str = "normal"
    divide_k: int = 1
    layout: str = "category"
    feature_format: str = "csv"
    train_fraction: float = 0.8
    folds: int = 0
    C: float = classify.DEFAULT_C
    tol: float = classify.DEFAULT_TOL
    seed: int = 0
    split_seed: int | None = None
    count_both_directions: bool = False
    within_subimage: bool = False
    trace: str | None = None

    def delta_kind(self) -> features.DeltaKind:
        return features.DeltaKind(self.delta, self.divide_k)

    def validate(self) -> None:
        if self.delta not in features.DELTA_VARIANTS:
            raise ConfigError(f"unknown delta {self.delta!r}; choose from {features.DELTA_VARIANTS}")
        if self.layout not in features.LAYOUTS:
            raise ConfigError(f"unknown layout {self.layout!r}")
        if self.feature_format not in ("csv", "svmlight"):
            raise ConfigError(f"unknown feature format {self.feature_format!r}")
        try:
            semantic.normalize_modes(self.propositions)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train fraction must be in (0, 1)")
        if self.folds < 0:
            raise ConfigError("folds must be >= 0")
        if self.C <= 0.0 or self.tol <= 0.0:
            raise ConfigError("C and tol must be positive")
        if self.max_images < 1 or self.k_cand < 1 or self.s_sem < 1 or self.divide_k < 0:
            raise ConfigError("max_images, k_cand, s_sem must be >= 1 and divide_k >= 0")


@dataclass(frozen=True)
class PipelineResult:
    corpus: ingest.Corpus
    dictionaries: dict[str, tuple[dictionary.RawDictionary, dictionary.PatternDictionary]]
    train_vectors: list[features.FeatureVector]
    test_vectors: list[features.FeatureVector]
    model: classify.MulticlassModel
    report: classify.EvalReport
    cv_report: classify.EvalReport | None
    profiles: list[dict[str, semantic.SemanticObjectSet]]


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ConfigError, StageError):
        raise
    except Exception as exc:
        raise StageError(f"[{name}] {exc}") from exc


def default_synthetic_spec(
    categories: int = 5,
    images_per_category: int = 40,
    signature_size: int = 6,
    noise_size: int = 30,
    signature_probability: float = 0.8,
    n_slices: int = 9,
    k_tags: int = ingest.DEFAULT_K_TAGS,
) -> ingest.SyntheticSpec:
    """Disjoint-signature recipe used by the CLI and the experiment scripts."""
    sigs = {
        f"cat{i:02d}": tuple(f"cat{i:02d}_sig{j:02d}" for j in range(signature_size))
        for i in range(categories)
    }
    noise = tuple(f"noise{j:02d}" for j in range(noise_size))
    return ingest.SyntheticSpec(
        signatures=sigs,
        noise_labels=noise,
        images_per_category=images_per_category,
        signature_probability=signature_probability,
        n_slices=n_slices,
        k_tags=k_tags,
    )


def _load_corpus(config: PipelineConfig) -> ingest.Corpus:
    if config.corpus is not None:
        return ingest.load_corpus(config.corpus)
    if config.synthetic is not None:
        return ingest.generate_synthetic(config.synthetic, config.seed)
    raise ConfigError("either a corpus path or a synthetic spec is required")


def build_all_dictionaries(
    corpus: ingest.Corpus, config: PipelineConfig
) -> dict[str, tuple[dictionary.RawDictionary, dictionary.PatternDictionary]]:
    out = {}
    for cat in corpus.categories:
        raw = dictionary.build_raw_dictionary(corpus, cat, config.max_images)
        pattern = dictionary.build_pattern_dictionary(
            raw,
            within_subimage=config.within_subimage,
            count_both_directions=config.count_both_directions,
        )
        out[cat] = (raw, pattern)
    return out


def execute(config: PipelineConfig, corpus: ingest.Corpus | None = None) -> PipelineResult:
    """Run split, dictionaries, features, normalization, train, eval in memory."""
    config.validate()
    if corpus is None:
        corpus = _stage("load", _load_corpus, config)
    split_seed = config.seed if config.split_seed is None else config.split_seed
    split = _stage("split", ingest.split_corpus, corpus, config.train_fraction, split_seed)
    dicts = _stage("dictionaries", build_all_dictionaries, split, config)
    vectors, profiles = _stage(
        "features",
        features.featurize_corpus,
        split.images,
        dicts,
        config.delta_kind(),
        split.categories,
        config.k_cand,
        config.s_sem,
        config.propositions,
        config.layout,
        config.trace is not None,
    )
    train_raw = [v for v, im in zip(vectors, split.images) if im.split == "train"]
    test_raw = [v for v, im in zip(vectors, split.images) if im.split == "test"]
    norm = _stage("normalize", features.fit_normalization, train_raw)
    train_vecs = [features.apply_normalization(norm, v) for v in train_raw]
    test_vecs = [features.apply_normalization(norm, v) for v in test_raw]
    model = _stage("train", classify.train_multiclass, train_vecs, split.categories, config.C, config.tol)
    report = _stage("evaluate", classify.evaluate, model, test_vecs)
    cv_report = None
    if config.folds >= 2:
        cv_report = _stage(
            "cross-validate",
            classify.cross_validate,
            train_vecs,
            config.folds,
            split_seed,
            config.C,
            config.tol,
            split.categories,
        )
    return PipelineResult(split, dicts, train_vecs, test_vecs, model, report, cv_report, profiles)


def _safe_filename(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", name)


def save_dictionaries(
    dicts: dict[str, tuple[dictionary.RawDictionary, dictionary.PatternDictionary]],
    dict_dir: Path,
) -> None:
    dict_dir.mkdir(parents=True, exist_ok=True)
    names = {}
    for cat, (raw, pattern) in dicts.items():
        fname = _safe_filename(cat) + ".json"
        if fname in names:
            raise StageError(f"[dictionaries] categories {names[fname]!r} and {cat!r} "
                             f"collide on file name {fname!r}")
        names[fname] = cat
        dictionary.save_dictionary(raw, pattern, dict_dir / fname)


def load_dictionaries(dict_dir: Path) -> dict[str, tuple[dictionary.RawDictionary, dictionary.PatternDictionary]]:
    out = {}
    for path in sorted(Path(dict_dir).glob("*.json")):
        raw, pattern = dictionary.load_dictionary(path)
        out[raw.category] = (raw, pattern)
    return out


def _settings_dict(config: PipelineConfig) -> dict:
    # paths are deliberately excluded so reports are byte-stable across out dirs
    return {
        "delta": config.delta,
        "divide_k": config.divide_k,
        "layout": config.layout,
        "propositions": list(config.propositions),
        "k_cand": config.k_cand,
        "s_sem": config.s_sem,
        "max_images": config.max_images,
        "train_fraction": config.train_fraction,
        "folds": config.folds,
        "C": config.C,
        "tol": config.tol,
        "seed": config.seed,
        "count_both_directions": config.count_both_directions,
        "within_subimage": config.within_subimage,
    }


def write_report(result: PipelineResult, config: PipelineConfig, path: Path) -> None:
    payload = {
        "holdout": result.report.to_dict(),
        "cross_validation": result.cv_report.to_dict() if result.cv_report else None,
        "settings": _settings_dict(config),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def write_trace(
    images: Sequence[ingest.ImageRecord],
    categories: Sequence[str],
    profiles: Sequence[dict[str, semantic.SemanticObjectSet]],
    k_cand: int,
    path: Path,
) -> None:
    """Dump per-image extraction traces as JSONL for debugging."""
    with open(path, "w", encoding="utf-8") as fh:
        for image, profile in zip(images, profiles):
            cands = semantic.select_candidates(image, k_cand)
            for cat in categories:
                objs = profile[cat]
                fh.write(
                    json.dumps(
                        {
                            "image_id": image.image_id,
                            "category": cat,
                            "candidates": list(cands.candidates),
                            "objects": [
                                {
                                    "label": label,
                                    "score": score,
                                    "proposition": objs.proposition_trace[label],
                                }
                                for label, score in objs.objects
                            ],
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )


def run_pipeline(config: PipelineConfig) -> classify.EvalReport:
    """Execute the full pipeline and write all artifacts under ``out_dir``.

    Writes dictionaries, train/test feature files, the model JSON, and the
    evaluation report. Byte-identical outputs for identical (config, seed).
    """
    result = execute(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_dictionaries(result.dictionaries, out_dir / "dict")

    ext = "csv" if config.feature_format == "csv" else "svmlight"
    writer = features.write_csv if ext == "csv" else (
        lambda vecs, fh: features.write_svmlight(vecs, result.corpus.categories, fh)
    )
    for name, vecs in (("train", result.train_vectors), ("test", result.test_vectors)):
        with open(out_dir / f"features_{name}.{ext}", "w", encoding="utf-8") as fh:
            writer(vecs, fh)

    classify.save_model(result.model, out_dir / "model.json")
    write_report(result, config, out_dir / "report.json")
    if config.trace is not None:
        write_trace(
            result.corpus.images,
            result.corpus.categories,
            result.profiles,
            config.k_cand,
            Path(config.trace),
        )
    return result.report


@dataclass(frozen=True)
class AblationGrid:
    """One experiment axis with the values to sweep and the repeat count."""

    axis: str
    values: tuple
    repeats: int = 1

    def validate(self) -> None:
        if self.axis not in ABLATION_AXES:
            raise ConfigError(f"unknown ablation axis {self.axis!r}; choose from {ABLATION_AXES}")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if not self.values:
            raise ConfigError("ablation values must be non-empty")
        if self.axis == "delta":
            bad = [v for v in self.values if v not in features.DELTA_VARIANTS]
            if bad:
                raise ConfigError(f"unknown delta value(s) {bad}")
        elif self.axis == "sub_images":
            bad = [v for v in self.values if v not in ingest.VALID_SLICES]
            if bad:
                raise ConfigError(f"sub_images values must be among {ingest.VALID_SLICES}, got {bad}")
        else:
            bad = [v for v in self.values if v not in DICTIONARY_SIZE_PRESETS]
            if bad:
                raise ConfigError(
                    f"dictionary_size values must be presets {sorted(DICTIONARY_SIZE_PRESETS)}, got {bad}"
                )


@dataclass(frozen=True)
class AblationTable:
    axis: str
    values: tuple
    cells: tuple[tuple[object, ...], ...]  # rows = repeats; float or error string
    averages: tuple[object, ...]

    def to_csv(self, fh) -> None:
        fh.write(",".join(["repeat"] + [str(v) for v in self.values]) + "\n")
        for r, row in enumerate(self.cells, start=1):
            fh.write(",".join([str(r)] + [_cell_str(c) for c in row]) + "\n")
        fh.write(",".join(["average"] + [_cell_str(c) for c in self.averages]) + "\n")

    def format_text(self) -> str:
        widths = [max(7, len(str(v))) for v in self.values]
        head = "repeat  " + "  ".join(str(v).rjust(w) for v, w in zip(self.values, widths))
        lines = [head]
        for r, row in enumerate(self.cells, start=1):
            lines.append(
                f"{r:>6}  " + "  ".join(_cell_str(c)[:w].rjust(w) for c, w in zip(row, widths))
            )
        lines.append(
            "   avg  " + "  ".join(_cell_str(c)[:w].rjust(w) for c, w in zip(self.averages, widths))
        )
        return "\n".join(lines)


def _cell_str(cell) -> str:
    return repr(cell) if isinstance(cell, float) else str(cell)


def _corpus_for_value(config: PipelineConfig, grid: AblationGrid, value) -> tuple[ingest.Corpus, PipelineConfig]:
    """Resolve the corpus and per-cell config for one grid value."""
    if grid.axis == "delta":
        return _load_corpus(config), replace(config, delta=value)
    if grid.axis == "sub_images":
        want = value
        max_images = config.max_images
    else:
        max_images, want = DICTIONARY_SIZE_PRESETS[value]
    if config.synthetic is not None:
        spec = replace(config.synthetic, n_slices=want)
        return ingest.generate_synthetic(spec, config.seed), replace(config, max_images=max_images)
    corpus = _load_corpus(config)
    if corpus.n_slices != want:
        raise ConfigError(
            f"corpus has {corpus.n_slices} sub-images but axis value needs {want}; "
            "use a synthetic source to sweep slice counts"
        )
    return corpus, replace(config, max_images=max_images)


def run_ablation(
    config: PipelineConfig, grid: AblationGrid, workers: int | None = None
) -> AblationTable:
    """Sweep one axis; each cell is an isolated pipeline run.

    Repeat r uses split seed = base seed + r. Cell failures are recorded in
    the cell and the sweep continues.
    """
    config.validate()
    grid.validate()
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "0")) or (os.cpu_count() or 1)

    prepared = {}
    for value in grid.values:
        try:
            prepared[value] = _corpus_for_value(config, grid, value)
        except Exception as exc:  # recorded per cell below
            prepared[value] = exc

    def cell(value, repeat: int):
        base = prepared[value]
        if isinstance(base, Exception):
            raise base
        corpus, cfg = base
        cfg = replace(cfg, split_seed=config.seed + repeat)
        return execute(cfg, corpus=corpus).report.accuracy

    table: list[list[object]] = [[None] * len(grid.values) for _ in range(grid.repeats)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {}
        for r in range(grid.repeats):
            for c, value in enumerate(grid.values):
                futures[(r, c)] = pool.submit(cell, value, r)
        for (r, c), fut in futures.items():
            try:
                table[r][c] = fut.result()
            except Exception as exc:
                table[r][c] = f"error: {exc}"

    averages: list[object] = []
    for c in range(len(grid.values)):
        col = [table[r][c] for r in range(grid.repeats) if isinstance(table[r][c], float)]
        averages.append(sum(col) / len(col) if col else "error")
    return AblationTable(
        axis=grid.axis,
        values=tuple(grid.values),
        cells=tuple(tuple(row) for row in table),
        averages=tuple(averages),
    )
