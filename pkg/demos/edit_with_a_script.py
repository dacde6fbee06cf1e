"""Change annotations with a plain-text script instead of hand-editing JSON.

Builds a three-image corpus, then applies a script that renames a
misclassified subject, fixes a box, removes a wrong relationship, and adds
a missing one.  Ends by showing that a script with a stale reference aborts
without touching anything.
"""

from pathlib import Path

from vrannot import (
    AnnotatedObject,
    AnnotationCorpus,
    ApplyError,
    BoundingBox,
    VisualRelationship,
    parse_script,
    validate_and_apply,
)
from vrannot.corpus import canonical_annotations_bytes

OUT_DIR = Path(__file__).parent / "out"

CLASSES = ["person", "speaker", "shelf", "dog", "hat", "ball"]
PREDICATES = ["on", "wear", "beside", "chase"]


def vr(s_class, s_box, predicate, o_class, o_box):
    return VisualRelationship(
        AnnotatedObject(CLASSES.index(s_class), BoundingBox(*s_box)),
        PREDICATES.index(predicate),
        AnnotatedObject(CLASSES.index(o_class), BoundingBox(*o_box)),
    )


corpus = AnnotationCorpus(
    images={
        "livingroom.jpg": [
            # actually a stereo speaker, and its box is a little off
            vr("person", (160, 235, 230, 270), "on", "shelf", (150, 420, 200, 300)),
            vr("dog", (300, 410, 40, 180), "beside", "shelf", (150, 420, 200, 300)),
        ],
        "park.jpg": [
            vr("person", (20, 210, 30, 120), "wear", "hat", (5, 40, 55, 105)),
            # wrong: nobody chases anyone in this picture
            vr("dog", (140, 260, 200, 340), "chase", "person", (20, 210, 30, 120)),
        ],
        "beach.jpg": [
            vr("dog", (100, 220, 60, 200), "chase", "ball", (150, 180, 300, 340)),
        ],
    },
    object_class_names=list(CLASSES),
    predicate_names=list(PREDICATES),
)

SCRIPT = """\
# livingroom: the "person" on the shelf is a stereo speaker
imname; livingroom.jpg
cvrsoc; 0; (person, on, shelf); speaker
cvrsbb; 0; (speaker, on, shelf); [161,234,231,270]

# park: drop the imagined chase, record the missed hat on the dog
imname; park.jpg
rvrxxx; 1; (dog, chase, person);
avrxxx; dog; [140,260,200,340]; wear; hat; [130,160,230,280]
"""


def show(title, c):
    print(title)
    for image in sorted(c.images):
        for i, relationship in enumerate(c.images[image]):
            s, p, o = c.vr_type_names(relationship)
            print(f"  {image} vr[{i}]: ({s}, {p}, {o})")


show("before:", corpus)

blocks = parse_script(SCRIPT)
edited, report = validate_and_apply(corpus, blocks)

print()
show("after:", edited)
print()
print(
    f"report: images touched {report.images_touched}, changed {report.vrs_changed}, "
    f"added {report.vrs_added}, removed {report.vrs_removed}"
)

# A script referencing state that no longer matches aborts as a whole; the
# input corpus is untouched even when earlier lines were valid.
STALE = """\
imname; beach.jpg
avrxxx; person; [10,200,10,100]; beside; dog; [100,220,60,200]
cvrpxx; 0; (dog, chase, person); beside
"""

before_bytes = canonical_annotations_bytes(edited)
try:
    validate_and_apply(edited, parse_script(STALE))
except ApplyError as err:
    print()
    print(f"stale script rejected: {err}")
assert canonical_annotations_bytes(edited) == before_bytes

OUT_DIR.mkdir(exist_ok=True)
(OUT_DIR / "edit_script.txt").write_text(SCRIPT, encoding="utf-8")
print(f"\nscript saved to {OUT_DIR / 'edit_script.txt'}")
