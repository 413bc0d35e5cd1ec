from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from semfeat.dictionary import rank_pairs, PatternDictionary
from semfeat.ingest import Corpus, ImageRecord, SubImageTags, TagRecord

LABELS = [f"obj{i:02d}" for i in range(12)]


@st.composite
def sub_image_tags(draw, index: int, k_tags: int):
    labels = draw(st.lists(st.sampled_from(LABELS), min_size=k_tags, max_size=k_tags))
    scores = draw(
        st.lists(
            st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
            min_size=k_tags,
            max_size=k_tags,
        )
    )
    tags = sorted(
        (TagRecord(lab, sc) for lab, sc in zip(labels, scores)),
        key=lambda t: (-t.score, t.label),
    )
    return SubImageTags(index, tuple(tags))


@st.composite
def corpora(draw, max_categories: int = 3, max_images: int = 2):
    """Small valid corpora; 9 sub-images per image, 1-3 tags each."""
    k_tags = draw(st.integers(min_value=1, max_value=3))
    n_cats = draw(st.integers(min_value=0, max_value=max_categories))
    images = []
    for c in range(n_cats):
        n_images = draw(st.integers(min_value=1, max_value=max_images))
        for i in range(n_images):
            subs = tuple(draw(sub_image_tags(s, k_tags)) for s in range(9))
            split = draw(st.sampled_from(["train", "test", "unassigned"]))
            images.append(ImageRecord(f"im_{c}_{i}", f"cat{c}", split, subs))
    categories = tuple(f"cat{c}" for c in range(n_cats))
    return Corpus(tuple(images), categories, 9 if images else 0, k_tags if images else 0)


@st.composite
def token_streams(draw, max_len: int = 60, alphabet: int = 8):
    return draw(
        st.lists(
            st.sampled_from([f"t{i}" for i in range(alphabet)]),
            min_size=2,
            max_size=max_len,
        )
    )


@st.composite
def pair_graphs(draw, max_vertices: int = 12, max_freq: int = 30):
    n = draw(st.integers(min_value=2, max_value=max_vertices))
    verts = [f"v{i:02d}" for i in range(n)]
    pairs = {}
    for i in range(n):
        for j in range(i + 1, n):
            f = draw(st.integers(min_value=0, max_value=max_freq))
            if f > 0 and draw(st.booleans()):
                pairs[(verts[i], verts[j])] = f
    return PatternDictionary("g", pairs, rank_pairs(pairs))


@pytest.fixture(scope="session")
def small_synthetic():
    from semfeat.ingest import generate_synthetic
    from semfeat.pipeline import default_synthetic_spec

    return generate_synthetic(
        default_synthetic_spec(categories=3, images_per_category=8), seed=11
    )
