"""Configured multi-step corpus transformation runs.

A workflow is an ordered list of typed steps applied to one corpus.  Steps
never renumber master-list ids: names removed by a merge are tombstoned so
every later step (and any protocol file in the same run) keeps addressing
the ids it was written against.  Runs are all-or-nothing; a failing step
raises StepFailedError with its 1-based ordinal and the input corpus is
left untouched.

The file form of a config is a JSON object:

    {
      "input_annotations": "...", "input_classes": "...", "input_predicates": "...",
      "output_annotations": "...", "output_classes": "...", "output_predicates": "...",
      "steps": [{"kind": "<step kind>", ...}, ...]
    }

Relative paths resolve against the directory containing the config file.
Step kinds and their keys are documented in docs/formats.md.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import protocol
from .corpus import (
    AnnotatedObject,
    AnnotationCorpus,
    VisualRelationship,
    diff_corpora,
    load_corpus,
    save_corpus,
)
from .errors import (
    ConfigError,
    DuplicateMasterNameError,
    FileMissingError,
    ImageNotFoundError,
    SelfMergeError,
    StepFailedError,
    UnsupportedRewriteError,
    VrannotError,
)
from .protocol import ApplyReport

CLASSES = "classes"
PREDICATES = "predicates"


# --------------------------------------------------------------------------
# corpus operations (pure: corpus in, new corpus out)
# --------------------------------------------------------------------------


def update_master_lists(
    corpus: AnnotationCorpus,
    target: str,
    renames: list[tuple[str, str]] = (),
    additions: list[str] = (),
) -> AnnotationCorpus:
    """Rename and append master-list names; ids of renamed entries stay put.

    A new name colliding with any current entry (live or retired) is an
    error, as is renaming a name that does not resolve.
    """
    if target not in (CLASSES, PREDICATES):
        raise ConfigError(f"unknown master-list target {target!r}")
    work = corpus.copy()
    names = work.object_class_names if target == CLASSES else work.predicate_names
    resolve = work.class_id if target == CLASSES else work.predicate_id
    for old, new in renames:
        index = resolve(old)
        if new in names:
            raise DuplicateMasterNameError(new)
        names[index] = new
    for name in additions:
        if name in names:
            raise DuplicateMasterNameError(name)
        names.append(name)
    return work


def apply_protocol_file(corpus: AnnotationCorpus, path) -> AnnotationCorpus:
    """Parse and apply one protocol script from disk."""
    path = Path(path)
    if not path.exists():
        raise FileMissingError(path)
    blocks = protocol.parse_script(path.read_bytes())
    new, _ = protocol.validate_and_apply(corpus, blocks)
    return new


def change_class_for_image_set(
    corpus: AnnotationCorpus,
    image_filenames: list[str],
    from_name: str,
    to_name: str,
) -> AnnotationCorpus:
    """Rewrite one object class to another inside the listed images only.

    Both names stay live; this is a scoped relabeling, not a merge.
    """
    work = corpus.copy()
    from_id = work.class_id(from_name)
    to_id = work.class_id(to_name)
    for image in image_filenames:
        if image not in work.images:
            raise ImageNotFoundError(image)
    for image in image_filenames:
        work.images[image] = [
            _rewrite_classes(vr, {from_id: to_id}) for vr in work.images[image]
        ]
    return work


def _rewrite_classes(vr: VisualRelationship, mapping: dict[int, int]) -> VisualRelationship:
    subject = vr.subject
    obj = vr.object
    if subject.class_id in mapping:
        subject = AnnotatedObject(mapping[subject.class_id], subject.bbox)
    if obj.class_id in mapping:
        obj = AnnotatedObject(mapping[obj.class_id], obj.bbox)
    if subject is vr.subject and obj is vr.object:
        return vr
    return VisualRelationship(subject, vr.predicate_id, obj)


def merge_object_class(
    corpus: AnnotationCorpus, from_name: str, to_name: str
) -> AnnotationCorpus:
    """Rewrite every use of one class to another, globally, and retire the
    donor name.  The donor keeps its master-list slot so no id shifts."""
    if from_name == to_name:
        raise SelfMergeError(from_name)
    work = corpus.copy()
    from_id = work.class_id(from_name)
    to_id = work.class_id(to_name)
    for image, vrs in work.images.items():
        work.images[image] = [_rewrite_classes(vr, {from_id: to_id}) for vr in vrs]
    work.retired_class_ids.add(from_id)
    return work


def merge_predicate(
    corpus: AnnotationCorpus, from_name: str, to_name: str
) -> AnnotationCorpus:
    if from_name == to_name:
        raise SelfMergeError(from_name)
    work = corpus.copy()
    from_id = work.predicate_id(from_name)
    to_id = work.predicate_id(to_name)
    for image, vrs in work.images.items():
        work.images[image] = [
            replace(vr, predicate_id=to_id) if vr.predicate_id == from_id else vr
            for vr in vrs
        ]
    work.retired_predicate_ids.add(from_id)
    return work


def remove_vr_types_global(
    corpus: AnnotationCorpus, types: list[tuple[str, str, str]]
) -> AnnotationCorpus:
    """Delete every VR whose name triple matches any of the given types."""
    work = corpus.copy()
    doomed = {
        (work.class_id(s), work.predicate_id(p), work.class_id(o)) for s, p, o in types
    }
    for image, vrs in work.images.items():
        work.images[image] = [
            vr
            for vr in vrs
            if (vr.subject.class_id, vr.predicate_id, vr.object.class_id) not in doomed
        ]
    return work


def remove_empty_images(corpus: AnnotationCorpus) -> AnnotationCorpus:
    work = corpus.copy()
    work.images = {image: vrs for image, vrs in work.images.items() if vrs}
    return work


def change_vr_type_global(
    corpus: AnnotationCorpus,
    from_type: tuple[str, str, str],
    to_type: tuple[str, str, str],
) -> AnnotationCorpus:
    """Rewrite one VR type to another everywhere, keeping bounding boxes.

    Because boxes stay with their roles, a target type that exchanges the
    two class names (subject becomes object and vice versa) cannot be
    expressed here and is rejected; per-image protocol edits cover that.
    """
    work = corpus.copy()
    from_s, from_p, from_o = from_type
    to_s, to_p, to_o = to_type
    from_ids = (work.class_id(from_s), work.predicate_id(from_p), work.class_id(from_o))
    to_ids = (work.class_id(to_s), work.predicate_id(to_p), work.class_id(to_o))
    if from_ids[0] != from_ids[2] and (to_ids[0], to_ids[2]) == (from_ids[2], from_ids[0]):
        raise UnsupportedRewriteError(
            f"rewriting {from_type} to {to_type} would swap subject and object roles"
        )
    for image, vrs in work.images.items():
        new_vrs = []
        for vr in vrs:
            if (vr.subject.class_id, vr.predicate_id, vr.object.class_id) == from_ids:
                vr = VisualRelationship(
                    AnnotatedObject(to_ids[0], vr.subject.bbox),
                    to_ids[1],
                    AnnotatedObject(to_ids[2], vr.object.bbox),
                )
            new_vrs.append(vr)
        work.images[image] = new_vrs
    return work


def dedup_vrs(corpus: AnnotationCorpus) -> AnnotationCorpus:
    """Drop exact-duplicate VRs per image, keeping the first occurrence."""
    work = corpus.copy()
    for image, vrs in work.images.items():
        seen: set[VisualRelationship] = set()
        kept = []
        for vr in vrs:
            if vr not in seen:
                seen.add(vr)
                kept.append(vr)
        work.images[image] = kept
    return work


def compact_master_lists(
    corpus: AnnotationCorpus,
) -> tuple[AnnotationCorpus, dict[str, dict[int, int]]]:
    """Drop retired master-list slots and renumber ids densely.

    Only safe after a run completes (mid-run callers depend on stable ids).
    Returns the compacted corpus and the old-to-new id maps for both lists.
    """
    class_map = {
        old: new
        for new, old in enumerate(
            i for i in range(len(corpus.object_class_names)) if i not in corpus.retired_class_ids
        )
    }
    predicate_map = {
        old: new
        for new, old in enumerate(
            i for i in range(len(corpus.predicate_names)) if i not in corpus.retired_predicate_ids
        )
    }
    work = AnnotationCorpus(
        images={
            image: [
                VisualRelationship(
                    AnnotatedObject(class_map[vr.subject.class_id], vr.subject.bbox),
                    predicate_map[vr.predicate_id],
                    AnnotatedObject(class_map[vr.object.class_id], vr.object.bbox),
                )
                for vr in vrs
            ]
            for image, vrs in corpus.images.items()
        },
        object_class_names=[
            name
            for i, name in enumerate(corpus.object_class_names)
            if i not in corpus.retired_class_ids
        ],
        predicate_names=[
            name
            for i, name in enumerate(corpus.predicate_names)
            if i not in corpus.retired_predicate_ids
        ],
    )
    return work, {"classes": class_map, "predicates": predicate_map}


# --------------------------------------------------------------------------
# step specifications
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class UpdateMasterLists:
    kind = "update_master_lists"
    target: str
    renames: tuple[tuple[str, str], ...] = ()
    additions: tuple[str, ...] = ()

    def apply_to(self, corpus: AnnotationCorpus) -> AnnotationCorpus:
        return update_master_lists(corpus, self.target, list(self.renames), list(self.additions))


@dataclass(frozen=True)
class ApplyProtocolFile:
    kind = "apply_protocol_file"
    path: str

    def apply_to(self, corpus: AnnotationCorpus) -> AnnotationCorpus:
        return apply_protocol_file(corpus, self.path)


@dataclass(frozen=True)
class ChangeClassForImageSet:
    kind = "change_class_for_image_set"
    images: tuple[str, ...]
    from_name: str
    to_name: str

    def apply_to(self, corpus: AnnotationCorpus) -> AnnotationCorpus:
        return change_class_for_image_set(corpus, list(self.images), self.from_name, self.to_name)


@dataclass(frozen=True)
class MergeClass:
    kind = "merge_class"
    from_name: str
    to_name: str

    def apply_to(self, corpus: AnnotationCorpus) -> AnnotationCorpus:
        return merge_object_class(corpus, self.from_name, self.to_name)


@dataclass(frozen=True)
class MergePredicate:
    kind = "merge_predicate"
    from_name: str
    to_name: str

    def apply_to(self, corpus: AnnotationCorpus) -> AnnotationCorpus:
        return merge_predicate(corpus, self.from_name, self.to_name)


@dataclass(frozen=True)
class RemoveVRTypesGlobal:
    kind = "remove_vr_types_global"
    types: tuple[tuple[str, str, str], ...]

    def apply_to(self, corpus: AnnotationCorpus) -> AnnotationCorpus:
        return remove_vr_types_global(corpus, list(self.types))


@dataclass(frozen=True)
class RemoveEmptyImages:
    kind = "remove_empty_images"

    def apply_to(self, corpus: AnnotationCorpus) -> AnnotationCorpus:
        return remove_empty_images(corpus)


@dataclass(frozen=True)
class ChangeVRTypeGlobal:
    kind = "change_vr_type_global"
    from_type: tuple[str, str, str]
    to_type: tuple[str, str, str]

    def apply_to(self, corpus: AnnotationCorpus) -> AnnotationCorpus:
        return change_vr_type_global(corpus, self.from_type, self.to_type)


@dataclass(frozen=True)
class DedupVRs:
    kind = "dedup_vrs"

    def apply_to(self, corpus: AnnotationCorpus) -> AnnotationCorpus:
        return dedup_vrs(corpus)


StepSpec = (
    UpdateMasterLists
    | ApplyProtocolFile
    | ChangeClassForImageSet
    | MergeClass
    | MergePredicate
    | RemoveVRTypesGlobal
    | RemoveEmptyImages
    | ChangeVRTypeGlobal
    | DedupVRs
)


@dataclass
class WorkflowConfig:
    steps: list[StepSpec]
    input_annotations: Path | None = None
    input_classes: Path | None = None
    input_predicates: Path | None = None
    output_annotations: Path | None = None
    output_classes: Path | None = None
    output_predicates: Path | None = None


@dataclass(frozen=True)
class StepReport:
    ordinal: int
    kind: str
    effect: ApplyReport


@dataclass(frozen=True)
class WorkflowReport:
    steps: list[StepReport]
    elapsed_seconds: float


# --------------------------------------------------------------------------
# execution
# --------------------------------------------------------------------------


def run_workflow(
    config: WorkflowConfig, corpus: AnnotationCorpus
) -> tuple[AnnotationCorpus, WorkflowReport]:
    """Run all steps in order; any failure aborts the run via StepFailedError
    and leaves the input corpus unmodified."""
    if not config.steps:
        raise ConfigError("a workflow needs at least one step")
    started = time.perf_counter()
    current = corpus
    reports: list[StepReport] = []
    for ordinal, step in enumerate(config.steps, start=1):
        before = current
        try:
            current = step.apply_to(current)
        except (VrannotError, OSError) as exc:
            raise StepFailedError(ordinal, step.kind, exc) from exc
        reports.append(
            StepReport(ordinal, step.kind, ApplyReport.from_diff(diff_corpora(before, current)))
        )
    return current, WorkflowReport(reports, time.perf_counter() - started)


def run_workflow_files(config: WorkflowConfig) -> WorkflowReport:
    """Load the input corpus, run the steps, write canonical outputs."""
    for name in (
        "input_annotations",
        "input_classes",
        "input_predicates",
        "output_annotations",
        "output_classes",
        "output_predicates",
    ):
        if getattr(config, name) is None:
            raise ConfigError(f"config key {name!r} is required for a file-based run")
    corpus = load_corpus(config.input_annotations, config.input_classes, config.input_predicates)
    result, report = run_workflow(config, corpus)
    save_corpus(result, config.output_annotations, config.output_classes, config.output_predicates)
    return report


# --------------------------------------------------------------------------
# config file loading
# --------------------------------------------------------------------------

_PATH_KEYS = (
    "input_annotations",
    "input_classes",
    "input_predicates",
    "output_annotations",
    "output_classes",
    "output_predicates",
)


def _string(value, where: str) -> str:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{where} must be a non-empty string")
    return value


def _string_list(value, where: str) -> list[str]:
    if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
        raise ConfigError(f"{where} must be an array of strings")
    return value


def _name_pair_list(value, where: str) -> list[tuple[str, str]]:
    if not isinstance(value, list):
        raise ConfigError(f"{where} must be an array of [old, new] pairs")
    pairs = []
    for entry in value:
        if not isinstance(entry, list) or len(entry) != 2 or any(not isinstance(v, str) for v in entry):
            raise ConfigError(f"{where} entries must be [old, new] string pairs")
        pairs.append((entry[0], entry[1]))
    return pairs


def _name_triple(value, where: str) -> tuple[str, str, str]:
    if (
        not isinstance(value, list)
        or len(value) != 3
        or any(not isinstance(v, str) for v in value)
    ):
        raise ConfigError(f"{where} must be a [subject, predicate, object] name triple")
    return (value[0], value[1], value[2])


def _parse_step(entry, ordinal: int, base_dir: Path) -> StepSpec:
    where = f"steps[{ordinal}]"
    if not isinstance(entry, dict) or "kind" not in entry:
        raise ConfigError(f"{where} must be an object with a 'kind' key")
    kind = entry["kind"]
    keys = set(entry) - {"kind"}

    def require(*names: str) -> None:
        if keys != set(names):
            expected = ", ".join(sorted(names)) if names else "none"
            raise ConfigError(f"{where} ({kind}): expected keys {{{expected}}}, got {sorted(keys)}")

    if kind == "update_master_lists":
        if not keys <= {"target", "renames", "additions"} or "target" not in keys:
            raise ConfigError(f"{where} ({kind}): needs 'target' plus optional 'renames'/'additions'")
        return UpdateMasterLists(
            target=_string(entry["target"], f"{where}.target"),
            renames=tuple(_name_pair_list(entry.get("renames", []), f"{where}.renames")),
            additions=tuple(_string_list(entry.get("additions", []), f"{where}.additions")),
        )
    if kind == "apply_protocol_file":
        require("path")
        return ApplyProtocolFile(path=str(base_dir / _string(entry["path"], f"{where}.path")))
    if kind == "change_class_for_image_set":
        require("images", "from", "to")
        return ChangeClassForImageSet(
            images=tuple(_string_list(entry["images"], f"{where}.images")),
            from_name=_string(entry["from"], f"{where}.from"),
            to_name=_string(entry["to"], f"{where}.to"),
        )
    if kind == "merge_class":
        require("from", "to")
        return MergeClass(
            from_name=_string(entry["from"], f"{where}.from"),
            to_name=_string(entry["to"], f"{where}.to"),
        )
    if kind == "merge_predicate":
        require("from", "to")
        return MergePredicate(
            from_name=_string(entry["from"], f"{where}.from"),
            to_name=_string(entry["to"], f"{where}.to"),
        )
    if kind == "remove_vr_types_global":
        require("types")
        if not isinstance(entry["types"], list):
            raise ConfigError(f"{where}.types must be an array of name triples")
        return RemoveVRTypesGlobal(
            types=tuple(
                _name_triple(t, f"{where}.types[{i}]") for i, t in enumerate(entry["types"])
            )
        )
    if kind == "remove_empty_images":
        require()
        return RemoveEmptyImages()
    if kind == "change_vr_type_global":
        require("from", "to")
        return ChangeVRTypeGlobal(
            from_type=_name_triple(entry["from"], f"{where}.from"),
            to_type=_name_triple(entry["to"], f"{where}.to"),
        )
    if kind == "dedup_vrs":
        require()
        return DedupVRs()
    raise ConfigError(f"{where}: unknown step kind {kind!r}")


def load_workflow_config(path) -> WorkflowConfig:
    """Read a config file; relative paths resolve against the file's directory."""
    path = Path(path)
    if not path.exists():
        raise FileMissingError(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    missing = [k for k in (*_PATH_KEYS, "steps") if k not in raw]
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)}")
    unknown = set(raw) - {*_PATH_KEYS, "steps"}
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    base_dir = path.parent
    resolved = {key: base_dir / _string(raw[key], key) for key in _PATH_KEYS}
    for side in ("annotations", "classes", "predicates"):
        if resolved[f"input_{side}"].resolve() == resolved[f"output_{side}"].resolve():
            raise ConfigError(f"input and output {side} paths must differ")
    if not isinstance(raw["steps"], list) or not raw["steps"]:
        raise ConfigError("steps must be a non-empty array")
    steps = [_parse_step(entry, i, base_dir) for i, entry in enumerate(raw["steps"])]
    return WorkflowConfig(steps=steps, **resolved)
