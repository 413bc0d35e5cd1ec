#!/usr/bin/env python3
"""Compare the six delta weightings on one synthetic corpus.

Thin wrapper over `semfeat ablate --axis delta`; prints the repeats-by-delta
table and writes the CSV.
"""

import argparse
from pathlib import Path

from semfeat.features import DELTA_VARIANTS
from semfeat.pipeline import (
    AblationGrid,
    PipelineConfig,
    default_synthetic_spec,
    run_ablation,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--categories", type=int, default=5)
    ap.add_argument("--images-per-category", type=int, default=40)
    ap.add_argument("--q", type=float, default=0.8)
    ap.add_argument("--repeats", type=int, default=10)
    ap.add_argument("--seed", type=int, default=17)
    ap.add_argument("--out", default="delta_ablation.csv")
    args = ap.parse_args()

    cfg = PipelineConfig(
        synthetic=default_synthetic_spec(
            categories=args.categories,
            images_per_category=args.images_per_category,
            signature_probability=args.q,
        ),
        seed=args.seed,
    )
    table = run_ablation(cfg, AblationGrid("delta", DELTA_VARIANTS, args.repeats))
    print(table.format_text())
    with open(args.out, "w", encoding="utf-8") as fh:
        table.to_csv(fh)
    print(f"table -> {Path(args.out).resolve()}")


if __name__ == "__main__":
    main()
