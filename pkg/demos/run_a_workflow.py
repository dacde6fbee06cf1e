"""Run a multi-step cleanup as one configured, repeatable unit.

Writes a small corpus plus a workflow config to demos/out/, then executes
the run twice and checks the outputs are byte-identical.  The pipeline
merges a synonym class, deletes a noisy relationship type everywhere,
drops images left empty, and deduplicates.
"""

import json
from pathlib import Path

from vrannot import (
    AnnotatedObject,
    AnnotationCorpus,
    BoundingBox,
    VisualRelationship,
    load_workflow_config,
    run_workflow_files,
    save_corpus,
)

BASE = Path(__file__).parent / "out" / "workflow"
CLASSES = ["person", "sofa", "couch", "dog", "hat"]
PREDICATES = ["on", "sit on", "wear", "has"]


def vr(s_class, s_box, predicate, o_class, o_box):
    return VisualRelationship(
        AnnotatedObject(CLASSES.index(s_class), BoundingBox(*s_box)),
        PREDICATES.index(predicate),
        AnnotatedObject(CLASSES.index(o_class), BoundingBox(*o_box)),
    )


corpus = AnnotationCorpus(
    images={
        "den.jpg": [
            vr("person", (40, 200, 10, 90), "sit on", "sofa", (120, 300, 0, 220)),
            vr("person", (40, 200, 10, 90), "sit on", "sofa", (120, 300, 0, 220)),
            vr("dog", (180, 260, 150, 280), "on", "couch", (120, 300, 0, 220)),
        ],
        "study.jpg": [
            vr("person", (10, 190, 20, 110), "sit on", "couch", (100, 280, 0, 200)),
            vr("dog", (60, 160, 80, 190), "has", "hat", (50, 80, 100, 160)),
        ],
        "closet.jpg": [
            vr("dog", (30, 120, 30, 140), "has", "hat", (10, 45, 60, 120)),
        ],
    },
    object_class_names=list(CLASSES),
    predicate_names=list(PREDICATES),
)

CONFIG = {
    "input_annotations": "in/annotations.json",
    "input_classes": "in/classes.json",
    "input_predicates": "in/predicates.json",
    "output_annotations": "out/annotations.json",
    "output_classes": "out/classes.json",
    "output_predicates": "out/predicates.json",
    "steps": [
        {"kind": "merge_class", "from": "sofa", "to": "couch"},
        {"kind": "remove_vr_types_global", "types": [["dog", "has", "hat"]]},
        {"kind": "remove_empty_images"},
        {"kind": "dedup_vrs"},
    ],
}


def run_once(tag):
    root = BASE / tag
    (root / "in").mkdir(parents=True, exist_ok=True)
    save_corpus(
        corpus,
        root / "in" / "annotations.json",
        root / "in" / "classes.json",
        root / "in" / "predicates.json",
    )
    (root / "config.json").write_text(json.dumps(CONFIG, indent=2), encoding="utf-8")
    report = run_workflow_files(load_workflow_config(root / "config.json"))
    return root / "out", report


first, report = run_once("first")
for step in report.steps:
    e = step.effect
    print(
        f"step {step.ordinal} {step.kind}: touched={e.images_touched} "
        f"changed={e.vrs_changed} added={e.vrs_added} removed={e.vrs_removed} "
        f"images_removed={e.images_removed}"
    )

second, _ = run_once("second")
for name in ("annotations.json", "classes.json", "predicates.json"):
    assert (first / name).read_bytes() == (second / name).read_bytes()
print("\nrepeat run produced byte-identical outputs")

final = json.loads((first / "annotations.json").read_text(encoding="utf-8"))
print(f"final corpus: {len(final)} images, {sum(len(v) for v in final.values())} relationships")
print(f"outputs under {first}")
