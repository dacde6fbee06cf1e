"""Shared fixture paths and random-corpus generators for the test suite."""

from __future__ import annotations

import random
from pathlib import Path

from vrannot.corpus import (
    AnnotatedObject,
    AnnotationCorpus,
    BoundingBox,
    VisualRelationship,
    load_corpus,
)

DATA_DIR = Path(__file__).parent / "data"
LISTING_DIR = DATA_DIR / "listing_1"
DEMO_DIR = DATA_DIR / "workflow_demo"

_ADJECTIVES = ("red", "tall", "small", "old", "wet", "shiny", "round", "flat", "dark", "pale")
_NOUNS = ("dog", "chair", "lamp", "tree", "cup", "sign", "bag", "wall", "bike", "bird")
_VERBS = ("touch", "hold", "face", "cover", "follow", "push", "carry", "guard")
_PREPS = ("near", "over", "behind", "against")


def load_listing_corpus() -> AnnotationCorpus:
    return load_corpus(
        LISTING_DIR / "annotations.json",
        LISTING_DIR / "classes.json",
        LISTING_DIR / "predicates.json",
    )


def load_listing_expected() -> AnnotationCorpus:
    return load_corpus(
        LISTING_DIR / "expected_annotations.json",
        LISTING_DIR / "classes.json",
        LISTING_DIR / "predicates.json",
    )


def random_class_names(rng: random.Random, count: int) -> list[str]:
    pool = [f"{a} {n}" for a in _ADJECTIVES for n in _NOUNS]
    return rng.sample(pool, count)


def random_predicate_names(rng: random.Random, count: int) -> list[str]:
    pool = [v for v in _VERBS] + [f"{v} {p}" for v in _VERBS for p in _PREPS]
    return rng.sample(pool, count)


def random_bbox(rng: random.Random, span: int = 400) -> BoundingBox:
    ymin = rng.randrange(0, span)
    xmin = rng.randrange(0, span)
    return BoundingBox(ymin, ymin + rng.randrange(1, 80), xmin, xmin + rng.randrange(1, 80))


def random_vr(rng: random.Random, n_classes: int, n_predicates: int) -> VisualRelationship:
    return VisualRelationship(
        AnnotatedObject(rng.randrange(n_classes), random_bbox(rng)),
        rng.randrange(n_predicates),
        AnnotatedObject(rng.randrange(n_classes), random_bbox(rng)),
    )


def random_corpus(
    rng: random.Random,
    max_images: int = 10,
    max_vrs: int = 8,
    n_classes: int = 6,
    n_predicates: int = 4,
    allow_empty_images: bool = False,
) -> AnnotationCorpus:
    images = {}
    low = 0 if allow_empty_images else 1
    for index in range(rng.randrange(1, max_images + 1)):
        images[f"i{index:03d}.jpg"] = [
            random_vr(rng, n_classes, n_predicates)
            for _ in range(rng.randrange(low, max_vrs + 1))
        ]
    return AnnotationCorpus(
        images,
        random_class_names(rng, n_classes),
        random_predicate_names(rng, n_predicates),
    )
