"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one `[ACCEPTANCE] <criterion>: PASS|FAIL` line (visible
with ``pytest -s``).
"""

from __future__ import annotations

import functools
import random
import time
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

import oracles
from semfeat.classify import dual_objective, kkt_violations, train_binary
from semfeat.cli import main
from semfeat.dictionary import (
    RawDictionary,
    build_pattern_dictionary,
    build_raw_dictionary,
    rank_pairs,
    PatternDictionary,
)
from semfeat.features import DeltaKind, delta, featurize_corpus
from semfeat.ingest import generate_synthetic, split_corpus
from semfeat.pipeline import (
    DICTIONARY_SIZE_PRESETS,
    PipelineConfig,
    default_synthetic_spec,
    execute,
)
from semfeat.semantic import CandidateSet, extract_semantic_objects, related_by_proposition


def criterion(name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                out = fn(*args, **kwargs)
            except BaseException:
                print(f"\n[ACCEPTANCE] {name}: FAIL")
                raise
            print(f"\n[ACCEPTANCE] {name}: PASS")
            return out

        return wrapper

    return deco


def raw_from_tokens(tokens):
    return RawDictionary("x", tuple(tokens), dict(Counter(tokens)), len(tokens))


ACCEPTANCE_SPEC = default_synthetic_spec(
    categories=5, images_per_category=40, signature_probability=0.8, n_slices=9
)


@criterion("bigram oracle (200 random streams, exact)")
def test_bigram_oracle_exact():
    rng = random.Random(100)
    t0 = time.perf_counter()
    for _ in range(200):
        alphabet = [f"w{i:02d}" for i in range(rng.randint(2, 30))]
        tokens = [rng.choice(alphabet) for _ in range(rng.randint(2, 500))]
        pat = build_pattern_dictionary(raw_from_tokens(tokens))
        assert pat.pairs == oracles.bigram_counts(tokens)
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0, f"bigram oracle took {elapsed:.2f}s"


@criterion("proposition oracle (100 random graphs + worked example)")
def test_proposition_oracle_exact():
    rng = random.Random(200)
    for _ in range(100):
        n = rng.randint(2, 50)
        verts = [f"v{i:02d}" for i in range(n)]
        pairs = {}
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < 3.0 / n:
                    pairs[(verts[i], verts[j])] = rng.randint(1, 99)
        pattern = PatternDictionary("g", pairs, rank_pairs(pairs))
        anchors = rng.sample(verts, min(4, n))
        for anchor in anchors:
            p1 = dict(related_by_proposition(pattern, anchor, "P1"))
            assert p1 == oracles.direct_neighbors(pairs, anchor)
            p4 = dict(related_by_proposition(pattern, anchor, "P4"))
            assert p4 == oracles.bfs_depth2(pairs, anchor)

    # worked example: pairs {o1,o2}->n1, {o2,o3}->n2, {o4,o5}->n3
    pairs = {("o1", "o2"): 3, ("o2", "o3"): 2, ("o4", "o5"): 7}
    pattern = PatternDictionary("w", pairs, rank_pairs(pairs))
    assert related_by_proposition(pattern, "o1", "P1") == [("o2", 3)]
    assert related_by_proposition(pattern, "o1", "P4") == [("o3", 2)]
    out = extract_semantic_objects(
        pattern,
        CandidateSet("img", ("o1", "o2"), {"o1": 1, "o2": 1}),
        {"o1", "o2"},
        s_sem=5,
        modes=("P1", "P4"),
    )
    assert [label for label, _ in out.objects] == ["o3"]


@criterion("delta analytics (closed forms at 1e-12, divide/normal argsort)")
def test_delta_analytics():
    ctx = {}
    raw16 = raw_from_tokens(["a"] + ["pad"] * 15)
    assert delta(DeltaKind("normalized"), raw16, "a", ctx) == pytest.approx(0.125, abs=1e-12)
    raw4 = raw_from_tokens(["a"] + ["pad"] * 3)
    assert delta(DeltaKind("root"), raw4, "a", ctx) == pytest.approx(0.5, abs=1e-12)

    raw = raw_from_tokens(["a"] * 3 + ["b"] * 9 + ["c"] * 4)  # p(a) = 3/16
    p = 3 / 16
    from semfeat.features import ProbabilityEntry

    context = {("x", "a"): ProbabilityEntry(3, 16), ("x", "b"): ProbabilityEntry(9, 16)}
    closed = {
        "normal": p,
        "avg": p / (12 / 16),
        "normalized": p ** 0.75,
        "multi": p * 3,
        "root": p ** 0.5,
        "divide": p / 10,
    }
    for variant, want in closed.items():
        got = delta(DeltaKind(variant, 1), raw, "a", context)
        assert got == pytest.approx(want, abs=1e-12), variant

    corpus = split_corpus(generate_synthetic(ACCEPTANCE_SPEC, 21), 0.8, 21)
    dicts = {}
    for cat in corpus.categories:
        r = build_raw_dictionary(corpus, cat)
        dicts[cat] = (r, build_pattern_dictionary(r))
    images = corpus.images[:50]
    normal, _ = featurize_corpus(images, dicts, DeltaKind("normal"), corpus.categories)
    divide, _ = featurize_corpus(images, dicts, DeltaKind("divide", 1), corpus.categories)
    for vn, vd in zip(normal, divide):
        argsort = lambda vals: sorted(range(len(vals)), key=lambda j: (-vals[j], j))
        assert argsort(vn.values) == argsort(vd.values)


@criterion("SMO oracle (20 problems, dual within 1e-6 of QP)")
def test_smo_against_qp_oracle():
    rng = np.random.default_rng(300)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        X, y = oracles.separable_problem(rng, n)
        model = train_binary(list(zip(X.tolist(), y.astype(int).tolist())), C=1.0, tol=1e-5)
        assert dual_objective(model) == pytest.approx(
            oracles.qp_dual_max(X, y, 1.0), abs=1e-6
        )
        assert kkt_violations(model).max() < 1e-5
        hist = np.asarray(model.objective_history)
        assert (np.diff(hist) >= -1e-9).all()


@criterion("end-to-end synthetic (normal >= 0.90, others >= 0.80, < 60 s)")
def test_end_to_end_synthetic():
    t0 = time.perf_counter()
    accs = {}
    for variant in ("normal", "avg", "normalized", "multi", "root", "divide"):
        cfg = PipelineConfig(synthetic=ACCEPTANCE_SPEC, delta=variant, seed=17)
        accs[variant] = execute(cfg).report.accuracy
    elapsed = time.perf_counter() - t0
    assert accs["normal"] >= 0.90, accs
    for variant, acc in accs.items():
        if variant != "normal":
            assert acc >= 0.80, (variant, accs)
    assert elapsed < 60.0, f"end-to-end took {elapsed:.1f}s"


@criterion("determinism (byte-identical feature CSVs and reports)")
def test_run_determinism(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = main([
            "run", "--synthetic", "--categories", "5", "--images-per-category", "40",
            "--q", "0.8", "--slices", "9", "--seed", "17", "--out-dir", str(out),
        ])
        assert rc == 0
        outs.append(out)
    for name in ("features_train.csv", "features_test.csv", "report.json", "model.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name


@criterion("ablation harness (10x6 delta table, exact column means)")
def test_ablation_delta_table(tmp_path):
    out_csv = tmp_path / "ablation.csv"
    rc = main([
        "ablate", "--synthetic", "--categories", "5", "--images-per-category", "40",
        "--q", "0.8", "--slices", "9", "--seed", "17",
        "--axis", "delta", "--repeats", "10",
        "--out-dir", str(tmp_path / "out"), "--out", str(out_csv),
    ])
    assert rc == 0
    lines = out_csv.read_text().splitlines()
    header = lines[0].split(",")
    assert header == ["repeat", "avg", "divide", "multi", "normal", "normalized", "root"] or header == [
        "repeat", "normal", "avg", "normalized", "multi", "root", "divide",
    ]
    body = [line.split(",") for line in lines[1:]]
    assert len(body) == 11  # 10 repeats + averages row
    assert body[-1][0] == "average"
    for col in range(1, 7):
        cells = [float(row[col]) for row in body[:-1]]
        assert all(0.0 <= c <= 1.0 for c in cells)
        assert float(body[-1][col]) == sum(cells) / len(cells)


@criterion("dictionary-size arithmetic (9000/16000/25000 presets)")
def test_dictionary_size_presets():
    assert DICTIONARY_SIZE_PRESETS == {9000: (100, 9), 16000: (100, 16), 25000: (100, 25)}
    for target, (max_images, n_slices) in DICTIONARY_SIZE_PRESETS.items():
        spec = default_synthetic_spec(
            categories=2, images_per_category=max_images, n_slices=n_slices
        )
        corpus = generate_synthetic(spec, 30)
        corpus = replace(
            corpus, images=tuple(replace(im, split="train") for im in corpus.images)
        )
        raw = build_raw_dictionary(corpus, "cat00", max_images=max_images)
        assert raw.total == target
