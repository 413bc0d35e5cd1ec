"""Subcommand front-end wiring the pipeline stages together."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import classify, features, ingest, pipeline
from .features import DELTA_VARIANTS
from .pipeline import ConfigError, PipelineConfig, StageError

_INT_KEYS = {"max_images", "k_cand", "s_sem", "divide_k", "folds", "seed", "split_seed"}
_FLOAT_KEYS = {"train_fraction", "C", "tol"}
_BOOL_KEYS = {"count_both_directions", "within_subimage"}


def _parse_config_file(path: str) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return {str(k).replace("-", "_"): v for k, v in json.loads(text).items()}
    out = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _coerce(key: str, value):
    if not isinstance(value, str):
        if key == "propositions" and isinstance(value, list):
            return tuple(value)
        return value
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key in _BOOL_KEYS:
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key!r}: expected a boolean, got {value!r}")
    if key == "propositions":
        return tuple(p.strip() for p in value.split(",") if p.strip())
    return value


def _synthetic_from_args(args) -> ingest.SyntheticSpec:
    return pipeline.default_synthetic_spec(
        categories=args.categories,
        images_per_category=args.images_per_category,
        signature_size=args.signature_size,
        noise_size=args.noise_size,
        signature_probability=args.q,
        n_slices=args.slices,
        k_tags=args.k_tags,
    )


def _config_from_args(args) -> PipelineConfig:
    file_vals = _parse_config_file(args.config) if getattr(args, "config", None) else {}
    valid = {f.name for f in fields(PipelineConfig)} - {"synthetic"}
    unknown = sorted(set(file_vals) - valid)
    if unknown:
        raise ConfigError(f"unknown config key(s): {unknown}")
    overrides = {}
    for key in valid:
        flag = getattr(args, key, None)
        if flag is not None:
            overrides[key] = flag
        elif key in file_vals:
            overrides[key] = _coerce(key, file_vals[key])
    if getattr(args, "synthetic", False):
        if overrides.get("corpus"):
            raise ConfigError("--synthetic and --corpus are mutually exclusive")
        overrides["synthetic"] = _synthetic_from_args(args)
    config = replace(PipelineConfig(), **overrides)
    config.validate()
    return config


def _add_synthetic_flags(p: argparse.ArgumentParser, for_pipeline: bool = False) -> None:
    if for_pipeline:
        p.add_argument("--synthetic", action="store_true",
                       help="generate a synthetic corpus instead of reading --corpus")
    p.add_argument("--categories", type=int, default=5)
    p.add_argument("--images-per-category", type=int, default=40)
    p.add_argument("--signature-size", type=int, default=6)
    p.add_argument("--noise-size", type=int, default=30)
    p.add_argument("--q", type=float, default=0.8, help="signature probability in (0, 1]")
    p.add_argument("--slices", type=int, choices=ingest.VALID_SLICES, default=9)
    p.add_argument("--k-tags", type=int, default=ingest.DEFAULT_K_TAGS)


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", dest="corpus")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--config", help="flat key=value file with PipelineConfig fields; flags win")
    p.add_argument("--max-images", dest="max_images", type=int)
    p.add_argument("--k-cand", dest="k_cand", type=int)
    p.add_argument("--s-sem", dest="s_sem", type=int)
    p.add_argument("--propositions", type=lambda s: tuple(x.strip() for x in s.split(",")))
    p.add_argument("--delta", choices=DELTA_VARIANTS)
    p.add_argument("--divide-k", dest="divide_k", type=int)
    p.add_argument("--layout", choices=features.LAYOUTS)
    p.add_argument("--format", dest="feature_format", choices=("csv", "svmlight"))
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--folds", type=int)
    p.add_argument("--C", dest="C", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--count-both-directions", dest="count_both_directions",
                   action="store_const", const=True)
    p.add_argument("--within-subimage", dest="within_subimage",
                   action="store_const", const=True)
    p.add_argument("--trace", help="write extraction trace JSONL here")
    _add_synthetic_flags(p, for_pipeline=True)


def _cmd_gen_synthetic(args) -> int:
    spec = _synthetic_from_args(args)
    corpus = ingest.generate_synthetic(spec, args.seed)
    if args.train_fraction is not None:
        corpus = ingest.split_corpus(corpus, args.train_fraction, args.seed)
    ingest.write_corpus(corpus, args.out)
    print(f"wrote {len(corpus.images)} images / {len(corpus.categories)} categories to {args.out}")
    return 0


def _cmd_build_dict(args) -> int:
    corpus = ingest.load_corpus(
        args.corpus, expected_n_slices=args.slices, expected_k_tags=args.k_tags
    )
    if not any(im.split == "train" for im in corpus.images):
        corpus = ingest.split_corpus(corpus, args.train_fraction, args.seed)
    cfg = PipelineConfig(
        max_images=args.max_images,
        count_both_directions=args.count_both_directions,
        within_subimage=args.within_subimage,
    )
    dicts = pipeline.build_all_dictionaries(corpus, cfg)
    pipeline.save_dictionaries(dicts, Path(args.dict_dir))
    print(f"wrote {len(dicts)} dictionaries to {args.dict_dir}")
    return 0


def _cmd_featurize(args) -> int:
    corpus = ingest.load_corpus(args.corpus)
    dicts = pipeline.load_dictionaries(Path(args.dict_dir))
    kind = features.DeltaKind(args.delta, args.divide_k)
    modes = args.propositions
    all_vectors, all_profiles = features.featurize_corpus(
        corpus.images, dicts, kind, corpus.categories,
        args.k_cand, args.s_sem, modes, args.layout,
        collect_profiles=bool(args.trace),
    )
    if args.normalize:
        # fit on the corpus's train split even when exporting another split
        train = [v for v, im in zip(all_vectors, corpus.images) if im.split == "train"]
        if not train:
            raise ConfigError("--normalize needs a corpus with train-split images")
        norm = features.fit_normalization(train)
        all_vectors = [features.apply_normalization(norm, v) for v in all_vectors]
    keep = [
        i for i, im in enumerate(corpus.images)
        if args.split == "all" or im.split == args.split
    ]
    vectors = [all_vectors[i] for i in keep]
    with open(args.out, "w", encoding="utf-8") as fh:
        if args.format == "csv":
            features.write_csv(vectors, fh)
        else:
            features.write_svmlight(vectors, corpus.categories, fh)
    if args.trace:
        pipeline.write_trace(
            [corpus.images[i] for i in keep],
            corpus.categories,
            [all_profiles[i] for i in keep],
            args.k_cand,
            Path(args.trace),
        )
    print(f"wrote {len(vectors)} feature vectors to {args.out}")
    return 0


def _read_feature_file(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        vectors, labels, categories = features.read_svmlight(fh)
    if categories is None:
        categories = [f"class{i}" for i in range(max(labels, default=0) + 1)]
    fvs = [
        features.FeatureVector(f"row{i}", tuple(vec), categories[lab])
        for i, (vec, lab) in enumerate(zip(vectors, labels))
    ]
    return fvs, categories


def _cmd_train(args) -> int:
    fvs, categories = _read_feature_file(args.features)
    model = classify.train_multiclass(fvs, categories, args.C, args.tol)
    classify.save_model(model, args.model_out)
    print(f"trained {len(model.machines)} pairwise machines -> {args.model_out}")
    return 0


def _cmd_eval(args) -> int:
    fvs, categories = _read_feature_file(args.features)
    if args.folds:
        report = classify.cross_validate(
            fvs, args.folds, args.seed, args.C, args.tol, categories
        )
    else:
        if not args.model:
            raise ConfigError("eval needs --model (holdout) or --folds (cross-validation)")
        model = classify.load_model(args.model)
        report = classify.evaluate(model, fvs)
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    print(f"accuracy {report.accuracy:.4f} -> {args.report}")
    return 0


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    report = pipeline.run_pipeline(config)
    print(f"holdout accuracy {report.accuracy:.4f}")
    print(f"artifacts in {config.out_dir}")
    return 0


def _cmd_ablate(args) -> int:
    config = _config_from_args(args)
    if args.values:
        raw = [v.strip() for v in args.values.split(",") if v.strip()]
        values = tuple(raw) if args.axis == "delta" else tuple(int(v) for v in raw)
    else:
        values = {
            "delta": DELTA_VARIANTS,
            "sub_images": ingest.VALID_SLICES,
            "dictionary_size": tuple(sorted(pipeline.DICTIONARY_SIZE_PRESETS)),
        }[args.axis]
    grid = pipeline.AblationGrid(axis=args.axis, values=values, repeats=args.repeats)
    table = pipeline.run_ablation(config, grid, workers=args.workers)
    print(table.format_text())
    out = args.out or str(Path(config.out_dir) / "ablation.csv")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        table.to_csv(fh)
    print(f"table -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semfeat",
        description="co-occurrence based semantic scene features with an SMO-SVM harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="write a planted-signature corpus")
    _add_synthetic_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-fraction", type=float,
                   help="also assign train/test splits at this ratio")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_synthetic)

    p = sub.add_parser("build-dict", help="build per-category dictionaries from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dict-dir", required=True)
    p.add_argument("--slices", type=int, choices=ingest.VALID_SLICES)
    p.add_argument("--k-tags", type=int)
    p.add_argument("--max-images", type=int, default=100)
    p.add_argument("--train-fraction", type=float, default=0.8,
                   help="used only when the corpus carries no train split")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count-both-directions", action="store_true")
    p.add_argument("--within-subimage", action="store_true")
    p.set_defaults(func=_cmd_build_dict)

    p = sub.add_parser("featurize", help="corpus + dictionaries -> feature file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dict-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "svmlight"), default="csv")
    p.add_argument("--split", choices=("train", "test", "all"), default="all")
    p.add_argument("--delta", choices=DELTA_VARIANTS, default="normal")
    p.add_argument("--divide-k", type=int, default=1)
    p.add_argument("--k-cand", type=int, default=5)
    p.add_argument("--s-sem", type=int, default=5)
    p.add_argument("--propositions", type=lambda s: tuple(x.strip() for x in s.split(",")),
                   default=("p1", "p4"))
    p.add_argument("--layout", choices=features.LAYOUTS, default="category")
    p.add_argument("--normalize", action="store_true",
                   help="min-max scale using the train-split vectors")
    p.add_argument("--trace", help="write extraction trace JSONL here")
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", help="train the one-vs-one SVM from an svmlight file")
    p.add_argument("--features", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--C", type=float, default=classify.DEFAULT_C)
    p.add_argument("--tol", type=float, default=classify.DEFAULT_TOL)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a model (or cross-validate a feature file)")
    p.add_argument("--features", required=True)
    p.add_argument("--model")
    p.add_argument("--report", required=True)
    p.add_argument("--folds", type=int, default=0,
                   help="when > 0, run stratified cross-validation instead of holdout")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--C", type=float, default=classify.DEFAULT_C)
    p.add_argument("--tol", type=float, default=classify.DEFAULT_TOL)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("run", help="split, dictionaries, features, train, eval")
    _add_pipeline_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("ablate", help="sweep one axis and emit a repeats x values table")
    _add_pipeline_flags(p)
    p.add_argument("--axis", choices=pipeline.ABLATION_AXES, required=True)
    p.add_argument("--values", help="comma-separated axis values (default: full axis)")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--workers", type=int, help=f"cell parallelism (default ${pipeline.WORKERS_ENV} or cpu count)")
    p.add_argument("--out", help="CSV output path (default <out-dir>/ablation.csv)")
    p.set_defaults(func=_cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, StageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
