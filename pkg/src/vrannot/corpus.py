"""Core data model for visual relationship annotation corpora.

A corpus maps image filenames to ordered lists of visual relationships.
Object classes and predicates are referenced by integer id; the id is the
position of the name in one of two master lists carried with the corpus.

On disk a corpus is three UTF-8 JSON files: the annotations object
(filename -> list of relationship records) and the two master lists (plain
string arrays).  `save_corpus` writes a canonical form -- image keys sorted,
object keys sorted, fixed indentation -- so equal corpora always serialize
to identical bytes.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .errors import (
    DuplicateMasterNameError,
    FileMissingError,
    IdOutOfRangeError,
    MalformedRecordError,
    UnknownNameError,
)


@dataclass(frozen=True, order=True)
class BoundingBox:
    """Pixel box stored in [ymin, ymax, xmin, xmax] order."""

    ymin: int
    ymax: int
    xmin: int
    xmax: int

    @property
    def well_formed(self) -> bool:
        """False for degenerate boxes: empty extent or negative coordinates."""
        return 0 <= self.ymin < self.ymax and 0 <= self.xmin < self.xmax

    def to_list(self) -> list[int]:
        return [self.ymin, self.ymax, self.xmin, self.xmax]

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.ymin, self.ymax, self.xmin, self.xmax)


@dataclass(frozen=True)
class AnnotatedObject:
    """A localized object: class id plus bounding box."""

    class_id: int
    bbox: BoundingBox


@dataclass(frozen=True)
class VisualRelationship:
    """One (subject, predicate, object) annotation."""

    subject: AnnotatedObject
    predicate_id: int
    object: AnnotatedObject


@dataclass(frozen=True)
class VRType:
    """A relationship type: the id triple with bounding boxes abstracted away."""

    subject_class_id: int
    predicate_id: int
    object_class_id: int

    @classmethod
    def of(cls, vr: VisualRelationship) -> VRType:
        return cls(vr.subject.class_id, vr.predicate_id, vr.object.class_id)


@dataclass
class AnnotationCorpus:
    """In-memory corpus: per-image relationship lists plus the master lists.

    `retired_class_ids` / `retired_predicate_ids` mark names tombstoned by a
    merge during the current run.  Retired ids keep their master-list slot
    (so ids never shift mid-run) but their names no longer resolve.  The sets
    are runtime state only; they are not serialized.
    """

    images: dict[str, list[VisualRelationship]] = field(default_factory=dict)
    object_class_names: list[str] = field(default_factory=list)
    predicate_names: list[str] = field(default_factory=list)
    retired_class_ids: set[int] = field(default_factory=set)
    retired_predicate_ids: set[int] = field(default_factory=set)

    @property
    def vr_count(self) -> int:
        return sum(len(vrs) for vrs in self.images.values())

    def copy(self) -> AnnotationCorpus:
        """Independent corpus sharing only the immutable relationship values."""
        return AnnotationCorpus(
            images={name: list(vrs) for name, vrs in self.images.items()},
            object_class_names=list(self.object_class_names),
            predicate_names=list(self.predicate_names),
            retired_class_ids=set(self.retired_class_ids),
            retired_predicate_ids=set(self.retired_predicate_ids),
        )

    def class_name(self, class_id: int) -> str:
        return self.object_class_names[class_id]

    def predicate_name(self, predicate_id: int) -> str:
        return self.predicate_names[predicate_id]

    def class_id(self, name: str) -> int:
        """Resolve a live object-class name; retired names do not resolve."""
        try:
            class_id = self.object_class_names.index(name)
        except ValueError:
            raise UnknownNameError(name, "object class") from None
        if class_id in self.retired_class_ids:
            raise UnknownNameError(name, "object class (retired)")
        return class_id

    def predicate_id(self, name: str) -> int:
        try:
            predicate_id = self.predicate_names.index(name)
        except ValueError:
            raise UnknownNameError(name, "predicate") from None
        if predicate_id in self.retired_predicate_ids:
            raise UnknownNameError(name, "predicate (retired)")
        return predicate_id

    def vr_type_names(self, vr: VisualRelationship) -> tuple[str, str, str]:
        """The (subject class, predicate, object class) name triple of a VR."""
        return (
            self.object_class_names[vr.subject.class_id],
            self.predicate_names[vr.predicate_id],
            self.object_class_names[vr.object.class_id],
        )

    def validate(self) -> None:
        """Re-check the corpus invariants; raises on the first violation."""
        for names in (self.object_class_names, self.predicate_names):
            seen: set[str] = set()
            for name in names:
                if name in seen:
                    raise DuplicateMasterNameError(name)
                seen.add(name)
        n_classes = len(self.object_class_names)
        n_predicates = len(self.predicate_names)
        for image, vrs in self.images.items():
            for index, vr in enumerate(vrs):
                if not 0 <= vr.subject.class_id < n_classes:
                    raise IdOutOfRangeError(
                        image, index, "subject.category", vr.subject.class_id, n_classes
                    )
                if not 0 <= vr.object.class_id < n_classes:
                    raise IdOutOfRangeError(
                        image, index, "object.category", vr.object.class_id, n_classes
                    )
                if not 0 <= vr.predicate_id < n_predicates:
                    raise IdOutOfRangeError(
                        image, index, "predicate", vr.predicate_id, n_predicates
                    )


@dataclass(frozen=True)
class CorpusStats:
    """Headline corpus counts.

    `mean_vrs_per_image` is rounded half-up to 2 decimals for display; the
    exact value is vr_count / image_count over the integer fields.
    """

    object_class_count: int
    predicate_count: int
    image_count: int
    vr_count: int
    mean_vrs_per_image: float
    images_with_exact_duplicate_vrs: int


# --------------------------------------------------------------------------
# loading
# --------------------------------------------------------------------------


def _reject_duplicate_keys(pairs: list[tuple[str, object]]) -> dict:
    out: dict = {}
    for key, value in pairs:
        if key in out:
            raise MalformedRecordError("annotations", f"duplicate key {key!r}")
        out[key] = value
    return out


def _load_json(path: Path, detect_duplicate_keys: bool = False):
    if not path.exists():
        raise FileMissingError(path)
    try:
        text = path.read_text(encoding="utf-8")
        if detect_duplicate_keys:
            return json.loads(text, object_pairs_hook=_reject_duplicate_keys)
        return json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedRecordError(str(path), str(exc)) from None


def load_master_list(path, what: str = "name") -> list[str]:
    """Load one master list: a JSON array of unique strings."""
    data = _load_json(Path(path))
    if not isinstance(data, list) or any(not isinstance(n, str) for n in data):
        raise MalformedRecordError(str(path), f"{what} master list must be an array of strings")
    seen: set[str] = set()
    for name in data:
        if name in seen:
            raise DuplicateMasterNameError(name)
        seen.add(name)
    return data


def _is_int(value: object) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _parse_bbox(raw: object, where: str) -> BoundingBox:
    if not isinstance(raw, list) or len(raw) != 4 or any(not _is_int(v) for v in raw):
        raise MalformedRecordError(where, f"bbox must be 4 integers, got {raw!r}")
    return BoundingBox(*raw)


def _parse_annotated_object(raw: object, where: str) -> AnnotatedObject:
    if not isinstance(raw, dict) or set(raw) != {"category", "bbox"}:
        raise MalformedRecordError(where, "expected an object with keys 'category' and 'bbox'")
    if not _is_int(raw["category"]):
        raise MalformedRecordError(where, "category must be an integer")
    return AnnotatedObject(raw["category"], _parse_bbox(raw["bbox"], where))


def load_corpus(annotations_path, classes_path, predicates_path) -> AnnotationCorpus:
    """Load a corpus from its three files and enforce the model invariants.

    Out-of-range ids are hard errors.  Degenerate bounding boxes are *not*:
    they load fine and only surface through lint.
    """
    classes = load_master_list(classes_path, "object class")
    predicates = load_master_list(predicates_path, "predicate")
    raw = _load_json(Path(annotations_path), detect_duplicate_keys=True)
    if not isinstance(raw, dict):
        raise MalformedRecordError(str(annotations_path), "annotations root must be an object")

    images: dict[str, list[VisualRelationship]] = {}
    for image, records in raw.items():
        if not isinstance(records, list):
            raise MalformedRecordError(image, "image entry must be an array of records")
        vrs: list[VisualRelationship] = []
        for index, record in enumerate(records):
            where = f"{image}[{index}]"
            if not isinstance(record, dict) or set(record) != {"predicate", "subject", "object"}:
                raise MalformedRecordError(
                    where, "expected keys 'predicate', 'subject' and 'object'"
                )
            if not _is_int(record["predicate"]):
                raise MalformedRecordError(where, "predicate must be an integer")
            subject = _parse_annotated_object(record["subject"], where + ".subject")
            obj = _parse_annotated_object(record["object"], where + ".object")
            if not 0 <= subject.class_id < len(classes):
                raise IdOutOfRangeError(image, index, "subject.category", subject.class_id, len(classes))
            if not 0 <= obj.class_id < len(classes):
                raise IdOutOfRangeError(image, index, "object.category", obj.class_id, len(classes))
            if not 0 <= record["predicate"] < len(predicates):
                raise IdOutOfRangeError(image, index, "predicate", record["predicate"], len(predicates))
            vrs.append(VisualRelationship(subject, record["predicate"], obj))
        images[image] = vrs
    return AnnotationCorpus(images, classes, predicates)


# --------------------------------------------------------------------------
# canonical serialization
# --------------------------------------------------------------------------


def _vr_record(vr: VisualRelationship) -> dict:
    return {
        "predicate": vr.predicate_id,
        "subject": {"category": vr.subject.class_id, "bbox": vr.subject.bbox.to_list()},
        "object": {"category": vr.object.class_id, "bbox": vr.object.bbox.to_list()},
    }


def _canonical_json_bytes(payload) -> bytes:
    # sort_keys orders image keys lexicographically; per-image VR order is
    # semantic (scripts index into it) and is preserved as-is.
    return (json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode(
        "utf-8"
    )


def canonical_annotations_bytes(corpus: AnnotationCorpus) -> bytes:
    payload = {image: [_vr_record(vr) for vr in vrs] for image, vrs in corpus.images.items()}
    return _canonical_json_bytes(payload)


def canonical_master_list_bytes(names: list[str]) -> bytes:
    return _canonical_json_bytes(list(names))


def save_corpus(
    corpus: AnnotationCorpus,
    annotations_path,
    classes_path=None,
    predicates_path=None,
) -> None:
    """Write the canonical on-disk form; equal corpora yield identical bytes.

    Master lists are written when their paths are given.  Retired names stay
    in the lists (ids must not shift); retirement itself is not persisted.
    """
    targets = [(annotations_path, canonical_annotations_bytes(corpus))]
    if classes_path is not None:
        targets.append((classes_path, canonical_master_list_bytes(corpus.object_class_names)))
    if predicates_path is not None:
        targets.append((predicates_path, canonical_master_list_bytes(corpus.predicate_names)))
    for path, payload in targets:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)


# --------------------------------------------------------------------------
# statistics
# --------------------------------------------------------------------------


def find_exact_duplicates(vrs: list[VisualRelationship]) -> list[tuple[int, int]]:
    """All index pairs (i, j), i < j, holding value-identical relationships."""
    positions: dict[VisualRelationship, list[int]] = {}
    for index, vr in enumerate(vrs):
        positions.setdefault(vr, []).append(index)
    pairs = [
        (i, j)
        for indices in positions.values()
        for k, i in enumerate(indices)
        for j in indices[k + 1 :]
    ]
    return sorted(pairs)


def _round_half_up(numerator: int, denominator: int) -> float:
    if denominator == 0:
        return 0.0
    exact = Decimal(numerator) / Decimal(denominator)
    return float(exact.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def compute_stats(corpus: AnnotationCorpus) -> CorpusStats:
    """Headline counts; class/predicate counts exclude retired names."""
    vr_count = corpus.vr_count
    image_count = len(corpus.images)
    duplicates = sum(
        1 for vrs in corpus.images.values() if len(set(vrs)) < len(vrs)
    )
    return CorpusStats(
        object_class_count=len(corpus.object_class_names) - len(corpus.retired_class_ids),
        predicate_count=len(corpus.predicate_names) - len(corpus.retired_predicate_ids),
        image_count=image_count,
        vr_count=vr_count,
        mean_vrs_per_image=_round_half_up(vr_count, image_count),
        images_with_exact_duplicate_vrs=duplicates,
    )


# --------------------------------------------------------------------------
# corpus diffing
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ImageDelta:
    """Value delta of one image entry between two corpora.

    VRs are compared by resolved names and boxes (robust to id renumbering).
    Within an image the lists are compared as multisets; surplus removals are
    paired with surplus additions and reported as `changed`.
    """

    filename: str
    status: str  # "modified" | "added" | "removed"
    changed: int = 0
    added: int = 0
    removed: int = 0


@dataclass(frozen=True)
class CorpusDiff:
    deltas: list[ImageDelta]

    @property
    def images_touched(self) -> int:
        return len(self.deltas)

    @property
    def images_added(self) -> int:
        return sum(1 for d in self.deltas if d.status == "added")

    @property
    def images_removed(self) -> int:
        return sum(1 for d in self.deltas if d.status == "removed")

    @property
    def vrs_changed(self) -> int:
        return sum(d.changed for d in self.deltas)

    @property
    def vrs_added(self) -> int:
        return sum(d.added for d in self.deltas)

    @property
    def vrs_removed(self) -> int:
        return sum(d.removed for d in self.deltas)


def _resolved_vrs(corpus: AnnotationCorpus, image: str) -> Counter:
    return Counter(
        (
            corpus.class_name(vr.subject.class_id),
            vr.subject.bbox.as_tuple(),
            corpus.predicate_name(vr.predicate_id),
            corpus.class_name(vr.object.class_id),
            vr.object.bbox.as_tuple(),
        )
        for vr in corpus.images[image]
    )


def diff_corpora(before: AnnotationCorpus, after: AnnotationCorpus) -> CorpusDiff:
    """Name-level value diff; VR removals and additions of an image that pair
    up one-to-one count as changes.  Image-level adds/removes do not feed the
    VR counters."""
    deltas: list[ImageDelta] = []
    for image in sorted(set(before.images) | set(after.images)):
        if image not in after.images:
            deltas.append(ImageDelta(image, "removed"))
            continue
        if image not in before.images:
            deltas.append(ImageDelta(image, "added"))
            continue
        old = _resolved_vrs(before, image)
        new = _resolved_vrs(after, image)
        if old == new:
            continue
        gone = sum((old - new).values())
        came = sum((new - old).values())
        paired = min(gone, came)
        deltas.append(
            ImageDelta(image, "modified", changed=paired, added=came - paired, removed=gone - paired)
        )
    return CorpusDiff(deltas)


def with_updated_vr(vr: VisualRelationship, **changes) -> VisualRelationship:
    """Convenience wrapper around dataclasses.replace for relationship edits."""
    return replace(vr, **changes)
