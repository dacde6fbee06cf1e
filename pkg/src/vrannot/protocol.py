"""Line-oriented customization scripts: parse, validate, apply.

A script is a sequence of image blocks.  Each block opens with an `imname`
line naming the image (optionally flagged for removal) and is followed by
instructions editing that image's relationship list.  Instructions address
relationships by 0-based index into the *current* list, so edits within a
block see the effects of earlier lines, and every index-addressed line also
names the expected (subject, predicate, object) class triple.  The applier
checks that triple before touching anything and aborts the whole run on the
first mismatch, reporting the offending source line.

Grammar (one instruction per line, fields split on `;`, whitespace trimmed,
`#` starts a comment line, blank lines ignored):

    imname; <filename>[; rimxxx]
    cvrsoc; <idx>; (<s>, <p>, <o>); <new subject class>
    cvrsbb; <idx>; (<s>, <p>, <o>); [ymin,ymax,xmin,xmax]
    cvrooc; <idx>; (<s>, <p>, <o>); <new object class>
    cvrobb; <idx>; (<s>, <p>, <o>); [ymin,ymax,xmin,xmax]
    cvrpxx; <idx>; (<s>, <p>, <o>); <new predicate>
    rvrxxx; <idx>; (<s>, <p>, <o>);
    avrxxx; <subject class>; [bbox]; <predicate>; <object class>; [bbox]

Names inside tuples may be bare or wrapped in straight, typographic, or
backtick-and-apostrophe quotes; names containing `;`, `,`, `(` or `)` are
not representable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum

from .corpus import (
    AnnotatedObject,
    AnnotationCorpus,
    BoundingBox,
    CorpusDiff,
    VisualRelationship,
    diff_corpora,
)
from .errors import ApplyError, ParseError, UnknownNameError


class InstructionKind(Enum):
    IMNAME = "imname"
    CVRSOC = "cvrsoc"
    CVRSBB = "cvrsbb"
    CVROOC = "cvrooc"
    CVROBB = "cvrobb"
    CVRPXX = "cvrpxx"
    RVRXXX = "rvrxxx"
    AVRXXX = "avrxxx"
    RIMXXX = "rimxxx"


# kinds that may appear as block-body instruction lines
_BODY_KINDS = {
    InstructionKind.CVRSOC,
    InstructionKind.CVRSBB,
    InstructionKind.CVROOC,
    InstructionKind.CVROBB,
    InstructionKind.CVRPXX,
    InstructionKind.RVRXXX,
    InstructionKind.AVRXXX,
}

_CLASS_PAYLOAD = {InstructionKind.CVRSOC, InstructionKind.CVROOC}
_BBOX_PAYLOAD = {InstructionKind.CVRSBB, InstructionKind.CVROBB}


@dataclass(frozen=True)
class NewVRSpec:
    """Payload of an `avrxxx` line: a full relationship given by names."""

    subject_class: str
    subject_bbox: BoundingBox
    predicate: str
    object_class: str
    object_bbox: BoundingBox


@dataclass(frozen=True)
class Instruction:
    kind: InstructionKind
    source_line: int
    vr_index: int | None = None
    ref_tuple: tuple[str, str, str] | None = None
    new_name: str | None = None
    new_bbox: BoundingBox | None = None
    new_vr: NewVRSpec | None = None


@dataclass
class ImageBlock:
    filename: str
    source_line: int
    remove_image: bool = False
    instructions: list[Instruction] = field(default_factory=list)


@dataclass(frozen=True)
class ApplyReport:
    """Net effect of a script run, counted as a value diff of the corpora."""

    images_touched: int
    vrs_changed: int
    vrs_removed: int
    vrs_added: int
    images_removed: int

    @classmethod
    def from_diff(cls, diff: CorpusDiff) -> ApplyReport:
        return cls(
            images_touched=diff.images_touched,
            vrs_changed=diff.vrs_changed,
            vrs_removed=diff.vrs_removed,
            vrs_added=diff.vrs_added,
            images_removed=diff.images_removed,
        )


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

_OPEN_QUOTES = "`'\"‘“"
_CLOSE_QUOTES = "'\"’”"
_INT_RE = re.compile(r"-?\d+$")


def _strip_quotes(name: str) -> str:
    if len(name) >= 2 and name[0] in _OPEN_QUOTES and name[-1] in _CLOSE_QUOTES:
        return name[1:-1].strip()
    return name


def _parse_index(text: str, line: int) -> int:
    if not text.isdigit():
        raise ParseError(line, f"expected a non-negative index, got {text!r}")
    return int(text)


def _parse_name(text: str, line: int, what: str) -> str:
    name = _strip_quotes(text)
    if not name:
        raise ParseError(line, f"empty {what}")
    return name


def _parse_bbox_literal(text: str, line: int) -> BoundingBox:
    if not (text.startswith("[") and text.endswith("]")):
        raise ParseError(line, f"expected a [ymin,ymax,xmin,xmax] literal, got {text!r}")
    parts = [p.strip() for p in text[1:-1].split(",")]
    if len(parts) != 4 or any(not _INT_RE.match(p) for p in parts):
        raise ParseError(line, f"bounding box must hold 4 integers, got {text!r}")
    return BoundingBox(*(int(p) for p in parts))


def _parse_ref_tuple(text: str, line: int) -> tuple[str, str, str]:
    if not (text.startswith("(") and text.endswith(")")):
        raise ParseError(line, f"expected a (subject, predicate, object) tuple, got {text!r}")
    parts = [p.strip() for p in text[1:-1].split(",")]
    if len(parts) != 3:
        raise ParseError(line, f"reference tuple must hold 3 names, got {text!r}")
    return tuple(_parse_name(p, line, "reference-tuple name") for p in parts)  # type: ignore[return-value]


def _decode_source(source: str | bytes) -> str:
    if isinstance(source, str):
        return source
    try:
        return source.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = source[: exc.start].count(b"\n") + 1
        raise ParseError(line, f"invalid UTF-8 ({exc.reason})") from None


def parse_script(source: str | bytes) -> list[ImageBlock]:
    """Parse script text into image blocks; total over arbitrary byte input.

    Every failure raises ParseError carrying the 1-based source line.
    """
    text = _decode_source(source)
    blocks: list[ImageBlock] = []
    current: ImageBlock | None = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(";")]
        mnemonic = fields[0]
        try:
            kind = InstructionKind(mnemonic)
        except ValueError:
            raise ParseError(line_no, f"unknown mnemonic {mnemonic!r}") from None

        if kind is InstructionKind.IMNAME:
            if len(fields) not in (2, 3):
                raise ParseError(line_no, "imname takes a filename and an optional rimxxx flag")
            filename = fields[1]
            if not filename:
                raise ParseError(line_no, "empty filename")
            remove = False
            if len(fields) == 3:
                if fields[2] != InstructionKind.RIMXXX.value:
                    raise ParseError(line_no, f"unexpected trailing field {fields[2]!r}")
                remove = True
            current = ImageBlock(filename, line_no, remove_image=remove)
            blocks.append(current)
            continue

        if kind is InstructionKind.RIMXXX:
            raise ParseError(line_no, "rimxxx is only valid as a flag on an imname line")
        if kind not in _BODY_KINDS:
            raise ParseError(line_no, f"unknown mnemonic {mnemonic!r}")
        if current is None:
            raise ParseError(line_no, "instruction before any imname line")
        if current.remove_image:
            raise ParseError(line_no, "instruction after an image-removal header")

        if kind is InstructionKind.AVRXXX:
            if len(fields) != 6:
                raise ParseError(line_no, "avrxxx takes 5 fields: class; [bbox]; predicate; class; [bbox]")
            spec = NewVRSpec(
                subject_class=_parse_name(fields[1], line_no, "subject class name"),
                subject_bbox=_parse_bbox_literal(fields[2], line_no),
                predicate=_parse_name(fields[3], line_no, "predicate name"),
                object_class=_parse_name(fields[4], line_no, "object class name"),
                object_bbox=_parse_bbox_literal(fields[5], line_no),
            )
            current.instructions.append(Instruction(kind, line_no, new_vr=spec))
            continue

        if kind is InstructionKind.RVRXXX:
            # a trailing `;` yields one empty extra field; both forms accepted
            if len(fields) == 4 and fields[3] == "":
                fields = fields[:3]
            if len(fields) != 3:
                raise ParseError(line_no, "rvrxxx takes 2 fields: index; (tuple)")
            current.instructions.append(
                Instruction(
                    kind,
                    line_no,
                    vr_index=_parse_index(fields[1], line_no),
                    ref_tuple=_parse_ref_tuple(fields[2], line_no),
                )
            )
            continue

        # remaining kinds: cvrsoc/cvrsbb/cvrooc/cvrobb/cvrpxx
        if len(fields) != 4:
            raise ParseError(line_no, f"{mnemonic} takes 3 fields: index; (tuple); payload")
        index = _parse_index(fields[1], line_no)
        ref = _parse_ref_tuple(fields[2], line_no)
        if kind in _BBOX_PAYLOAD:
            instruction = Instruction(
                kind, line_no, vr_index=index, ref_tuple=ref,
                new_bbox=_parse_bbox_literal(fields[3], line_no),
            )
        else:
            what = "class name" if kind in _CLASS_PAYLOAD else "predicate name"
            instruction = Instruction(
                kind, line_no, vr_index=index, ref_tuple=ref,
                new_name=_parse_name(fields[3], line_no, what),
            )
        current.instructions.append(instruction)
    return blocks


# --------------------------------------------------------------------------
# rendering (canonical inverse of parse_script)
# --------------------------------------------------------------------------


def _render_tuple(ref: tuple[str, str, str]) -> str:
    return "({}, {}, {})".format(*ref)


def _render_bbox(bbox: BoundingBox) -> str:
    return "[{},{},{},{}]".format(*bbox.to_list())


def render_script(blocks: list[ImageBlock]) -> str:
    """Render blocks back to script text; parse(render(blocks)) == blocks
    up to source line numbers."""
    lines: list[str] = []
    for block in blocks:
        if lines:
            lines.append("")
        if block.remove_image:
            lines.append(f"imname; {block.filename}; rimxxx")
            continue
        lines.append(f"imname; {block.filename}")
        for ins in block.instructions:
            kind = ins.kind.value
            if ins.kind is InstructionKind.AVRXXX:
                vr = ins.new_vr
                lines.append(
                    f"{kind}; {vr.subject_class}; {_render_bbox(vr.subject_bbox)}; "
                    f"{vr.predicate}; {vr.object_class}; {_render_bbox(vr.object_bbox)}"
                )
            elif ins.kind is InstructionKind.RVRXXX:
                lines.append(f"{kind}; {ins.vr_index}; {_render_tuple(ins.ref_tuple)};")
            elif ins.kind in _BBOX_PAYLOAD:
                lines.append(
                    f"{kind}; {ins.vr_index}; {_render_tuple(ins.ref_tuple)}; "
                    f"{_render_bbox(ins.new_bbox)}"
                )
            else:
                lines.append(
                    f"{kind}; {ins.vr_index}; {_render_tuple(ins.ref_tuple)}; {ins.new_name}"
                )
    return "\n".join(lines) + "\n" if lines else ""


# --------------------------------------------------------------------------
# application
# --------------------------------------------------------------------------


def _resolve_class(corpus: AnnotationCorpus, name: str, line: int) -> int:
    try:
        return corpus.class_id(name)
    except UnknownNameError:
        raise ApplyError(line, ApplyError.UNKNOWN_NAME, f"object class {name!r}") from None


def _resolve_predicate(corpus: AnnotationCorpus, name: str, line: int) -> int:
    try:
        return corpus.predicate_id(name)
    except UnknownNameError:
        raise ApplyError(line, ApplyError.UNKNOWN_NAME, f"predicate {name!r}") from None


def _checked_vr(
    corpus: AnnotationCorpus, image: str, ins: Instruction
) -> VisualRelationship:
    """Fetch the addressed VR after bounds and reference-tuple validation."""
    vrs = corpus.images[image]
    if not 0 <= ins.vr_index < len(vrs):
        raise ApplyError(
            ins.source_line,
            ApplyError.INDEX_OUT_OF_RANGE,
            f"index {ins.vr_index} outside 0..{len(vrs) - 1} of {image}"
            if vrs
            else f"index {ins.vr_index} into empty list of {image}",
        )
    vr = vrs[ins.vr_index]
    found = corpus.vr_type_names(vr)
    if found != ins.ref_tuple:
        raise ApplyError(
            ins.source_line,
            ApplyError.TUPLE_MISMATCH,
            f"expected {ins.ref_tuple}, found {found}",
        )
    return vr


def _apply_instruction(corpus: AnnotationCorpus, image: str, ins: Instruction) -> None:
    vrs = corpus.images[image]
    if ins.kind is InstructionKind.AVRXXX:
        spec = ins.new_vr
        vrs.append(
            VisualRelationship(
                AnnotatedObject(
                    _resolve_class(corpus, spec.subject_class, ins.source_line),
                    spec.subject_bbox,
                ),
                _resolve_predicate(corpus, spec.predicate, ins.source_line),
                AnnotatedObject(
                    _resolve_class(corpus, spec.object_class, ins.source_line),
                    spec.object_bbox,
                ),
            )
        )
        return

    vr = _checked_vr(corpus, image, ins)
    if ins.kind is InstructionKind.RVRXXX:
        del vrs[ins.vr_index]
        return
    if ins.kind is InstructionKind.CVRSOC:
        new = replace(
            vr,
            subject=AnnotatedObject(
                _resolve_class(corpus, ins.new_name, ins.source_line), vr.subject.bbox
            ),
        )
    elif ins.kind is InstructionKind.CVRSBB:
        new = replace(vr, subject=AnnotatedObject(vr.subject.class_id, ins.new_bbox))
    elif ins.kind is InstructionKind.CVROOC:
        new = replace(
            vr,
            object=AnnotatedObject(
                _resolve_class(corpus, ins.new_name, ins.source_line), vr.object.bbox
            ),
        )
    elif ins.kind is InstructionKind.CVROBB:
        new = replace(vr, object=AnnotatedObject(vr.object.class_id, ins.new_bbox))
    elif ins.kind is InstructionKind.CVRPXX:
        new = replace(
            vr, predicate_id=_resolve_predicate(corpus, ins.new_name, ins.source_line)
        )
    else:  # unreachable by construction of parse_script
        raise ApplyError(ins.source_line, ApplyError.TUPLE_MISMATCH, f"bad kind {ins.kind}")
    vrs[ins.vr_index] = new


def validate_and_apply(
    corpus: AnnotationCorpus, blocks: list[ImageBlock]
) -> tuple[AnnotationCorpus, ApplyReport]:
    """Apply blocks in order against a copy; the input corpus is never touched.

    The first failed check raises ApplyError with the offending source line;
    nothing is returned, so an aborted run leaves callers holding exactly the
    corpus they passed in.
    """
    work = corpus.copy()
    for block in blocks:
        if block.filename not in work.images:
            raise ApplyError(
                block.source_line, ApplyError.IMAGE_NOT_FOUND, block.filename
            )
        if block.remove_image:
            del work.images[block.filename]
            continue
        for ins in block.instructions:
            _apply_instruction(work, block.filename, ins)
    return work, ApplyReport.from_diff(diff_corpora(corpus, work))
