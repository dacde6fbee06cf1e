"""Command-line interface.

One binary, one subcommand per operation.  Exit codes: 0 success, 1 lint
findings under --strict, 2 usage error, 3 data error (malformed input,
failed validation, aborted apply), 4 I/O error.  All output is a pure
function of the inputs; nothing timestamped, nothing host-dependent.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import analyze, kg, protocol, workflow
from .corpus import (
    AnnotationCorpus,
    compute_stats,
    diff_corpora,
    load_corpus,
    load_master_list,
    save_corpus,
)
from .errors import FileMissingError, VrannotError


def _add_corpus_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--annotations", required=True, help="annotations JSON file")
    parser.add_argument("--classes", required=True, help="object-class master list")
    parser.add_argument("--predicates", required=True, help="predicate master list")


def _add_format_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--format", choices=("text", "structured"), default="text",
        help="output style (structured = JSON)",
    )


def _load(args) -> "AnnotationCorpus":
    return load_corpus(args.annotations, args.classes, args.predicates)


def _emit_structured(payload) -> None:
    print(json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False))


# --------------------------------------------------------------------------
# handlers
# --------------------------------------------------------------------------


def _cmd_validate(args) -> int:
    corpus = _load(args)
    corpus.validate()
    print(f"ok: {len(corpus.images)} images, {corpus.vr_count} relationships")
    return 0


def _cmd_stats(args) -> int:
    corpus = _load(args)
    stats = compute_stats(corpus)
    if args.distribution:
        histogram = analyze.distribution(corpus, args.distribution)
        if args.format == "structured":
            _emit_structured(
                {"metric": histogram.metric, "buckets": [list(b) for b in histogram.buckets]}
            )
        else:
            print(f"{histogram.metric}:")
            for value, count in histogram.buckets:
                print(f"  {value}: {count}")
        return 0
    if args.format == "structured":
        _emit_structured(
            {
                "object_classes": stats.object_class_count,
                "predicates": stats.predicate_count,
                "images": stats.image_count,
                "relationships": stats.vr_count,
                "mean_relationships_per_image": stats.mean_vrs_per_image,
                "images_with_duplicate_relationships": stats.images_with_exact_duplicate_vrs,
            }
        )
        return 0
    print(f"object classes: {stats.object_class_count}")
    print(f"predicates: {stats.predicate_count}")
    print(f"images: {stats.image_count}")
    print(f"relationships: {stats.vr_count}")
    print(f"mean relationships per image: {stats.mean_vrs_per_image:.2f}")
    print(f"images with duplicate relationships: {stats.images_with_exact_duplicate_vrs}")
    return 0


def _parse_count(spec: str, corpus) -> "int | range":
    if ".." not in spec:
        return int(spec)
    low_text, high_text = spec.split("..", 1)
    low = int(low_text) if low_text else 0
    if high_text:
        return range(low, int(high_text) + 1)
    longest = max((len(vrs) for vrs in corpus.images.values()), default=0)
    return range(low, longest + 1)


def _cmd_query(args) -> int:
    corpus = _load(args)
    if args.count is not None:
        try:
            target = _parse_count(args.count, corpus)
        except ValueError:
            print(f"error: bad count spec {args.count!r}", file=sys.stderr)
            return 2
        images = analyze.images_with_vr_count(corpus, target)
        if args.format == "structured":
            _emit_structured({"images": images})
        else:
            for image in images:
                print(image)
        return 0
    pattern = analyze.parse_pattern(args.pattern)
    result = analyze.query_images(corpus, pattern)
    if args.format == "structured":
        _emit_structured({"images": result.images, "bindings": result.bindings})
        return 0
    for image in result.images:
        print(image)
    for position in ("subject", "predicate", "object"):
        if position in result.bindings:
            print(f"{position}: {', '.join(result.bindings[position])}")
    return 0


def _cmd_lint(args) -> int:
    corpus = _load(args)
    findings = analyze.lint(corpus, near_dup_iou_threshold=args.threshold)
    if args.format == "structured":
        _emit_structured(
            [
                {"image": f.image, "rule": f.rule.value, "detail": f.detail, "severity": f.severity}
                for f in findings
            ]
        )
    else:
        sys.stdout.write(analyze.format_findings(findings))
    return 1 if args.strict and findings else 0


def _cmd_overlay(args) -> int:
    corpus = _load(args)
    analyze.render_overlay(corpus, args.image, args.vr, args.out)
    return 0


def _cmd_apply(args) -> int:
    corpus = _load(args)
    with open(args.script, "rb") as handle:
        blocks = protocol.parse_script(handle.read())
    result, report = protocol.validate_and_apply(corpus, blocks)
    save_corpus(result, args.out)
    print(f"images touched: {report.images_touched}")
    print(f"relationships changed: {report.vrs_changed}")
    print(f"relationships added: {report.vrs_added}")
    print(f"relationships removed: {report.vrs_removed}")
    print(f"images removed: {report.images_removed}")
    return 0


def _cmd_workflow_run(args) -> int:
    config = workflow.load_workflow_config(args.config)
    report = workflow.run_workflow_files(config)
    for step in report.steps:
        effect = step.effect
        print(
            f"step {step.ordinal} {step.kind}: touched={effect.images_touched} "
            f"changed={effect.vrs_changed} added={effect.vrs_added} "
            f"removed={effect.vrs_removed} images_removed={effect.images_removed}"
        )
    print(f"done: {len(report.steps)} steps")
    return 0


def _schema_for(args, corpus) -> "kg.Schema":
    if args.schema:
        return kg.load_schema(args.schema)
    return kg.default_schema(corpus)


def _cmd_kg_lower(args) -> int:
    corpus = _load(args)
    schema = _schema_for(args, corpus)
    store = kg.lower_annotations(corpus, schema, namespace=args.namespace, image=args.image)
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write(kg.dump_store(store))
    print(f"triples: {len(store)}")
    return 0


def _cmd_kg_materialize(args) -> int:
    schema = kg.load_schema(args.schema)
    with open(args.graph, encoding="utf-8") as handle:
        store = kg.load_store(handle.read(), namespace=args.namespace)
    closed = kg.materialize(store, schema)
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write(kg.dump_store(closed))
    print(f"triples: {len(closed)} (added {len(closed) - len(store)})")
    return 0


def _cmd_kg_extract(args) -> int:
    classes = load_master_list(args.classes, "object class")
    predicates = load_master_list(args.predicates, "predicate")
    with open(args.graph, encoding="utf-8") as handle:
        store = kg.load_store(handle.read(), namespace=args.namespace)
    if args.schema:
        schema = kg.load_schema(args.schema)
    else:
        schema = kg.default_schema(AnnotationCorpus({}, classes, predicates))
    corpus = kg.extract_annotations(store, schema, classes, predicates)
    save_corpus(corpus, args.out)
    print(f"images: {len(corpus.images)}, relationships: {corpus.vr_count}")
    return 0


def _cmd_diff(args) -> int:
    before = load_corpus(args.a_annotations, args.a_classes, args.a_predicates)
    after = load_corpus(args.b_annotations, args.b_classes, args.b_predicates)
    diff = diff_corpora(before, after)
    if args.format == "structured":
        _emit_structured(
            {
                "images": [
                    {
                        "filename": d.filename,
                        "status": d.status,
                        "changed": d.changed,
                        "added": d.added,
                        "removed": d.removed,
                    }
                    for d in diff.deltas
                ],
                "images_touched": diff.images_touched,
                "vrs_changed": diff.vrs_changed,
                "vrs_added": diff.vrs_added,
                "vrs_removed": diff.vrs_removed,
                "images_added": diff.images_added,
                "images_removed": diff.images_removed,
            }
        )
        return 0
    for delta in diff.deltas:
        if delta.status == "modified":
            print(
                f"modified {delta.filename} changed={delta.changed} "
                f"added={delta.added} removed={delta.removed}"
            )
        else:
            print(f"{delta.status} {delta.filename}")
    print(
        f"total: images_touched={diff.images_touched} changed={diff.vrs_changed} "
        f"added={diff.vrs_added} removed={diff.vrs_removed} "
        f"images_added={diff.images_added} images_removed={diff.images_removed}"
    )
    return 0


# --------------------------------------------------------------------------
# parser assembly
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vrannot",
        description="Visual relationship annotation toolkit: query, lint, "
        "customize, and bridge annotations to a triple graph.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="load a corpus and check its invariants")
    _add_corpus_arguments(p)
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser("stats", help="headline corpus counts")
    _add_corpus_arguments(p)
    _add_format_argument(p)
    p.add_argument(
        "--distribution", choices=analyze.METRICS, help="print a per-image histogram instead"
    )
    p.set_defaults(handler=_cmd_stats)

    p = sub.add_parser("query", help="search images by relationship pattern or VR count")
    _add_corpus_arguments(p)
    _add_format_argument(p)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--pattern", help="'subject, predicate, object' with * wildcards")
    mode.add_argument("--count", help="VR count filter: N, A..B, or A..")
    p.set_defaults(handler=_cmd_query)

    p = sub.add_parser("lint", help="report annotation quality findings")
    _add_corpus_arguments(p)
    _add_format_argument(p)
    p.add_argument("--threshold", type=float, default=0.9, help="near-duplicate box IoU threshold")
    p.add_argument("--strict", action="store_true", help="exit 1 when findings exist")
    p.set_defaults(handler=_cmd_lint)

    p = sub.add_parser("overlay", help="render an SVG box overlay for one image")
    _add_corpus_arguments(p)
    p.add_argument("--image", required=True, help="image filename (corpus key)")
    p.add_argument("--vr", type=int, action="append", help="VR index; repeatable; default all")
    p.add_argument("--out", required=True, help="output SVG path")
    p.set_defaults(handler=_cmd_overlay)

    p = sub.add_parser("apply", help="apply a customization script")
    p.add_argument("script", help="script file")
    _add_corpus_arguments(p)
    p.add_argument("--out", required=True, help="output annotations path")
    p.set_defaults(handler=_cmd_apply)

    p = sub.add_parser("workflow", help="multi-step transformation runs")
    wf = p.add_subparsers(dest="workflow_command", required=True)
    p = wf.add_parser("run", help="run a workflow config file")
    p.add_argument("config", help="config file")
    p.set_defaults(handler=_cmd_workflow_run)

    p = sub.add_parser("kg", help="graph lowering, inference, extraction")
    kgsub = p.add_subparsers(dest="kg_command", required=True)

    p = kgsub.add_parser("lower", help="lower a corpus to a triple dump")
    _add_corpus_arguments(p)
    p.add_argument("--schema", help="axiom file; omitted = designations derived from names")
    p.add_argument("--namespace", default=kg.DEFAULT_NAMESPACE)
    p.add_argument("--image", help="lower only this image")
    p.add_argument("--out", required=True, help="output triple dump path")
    p.set_defaults(handler=_cmd_kg_lower)

    p = kgsub.add_parser("materialize", help="compute the inference closure of a dump")
    p.add_argument("graph", help="input triple dump")
    p.add_argument("--schema", required=True, help="axiom file")
    p.add_argument("--namespace", default=kg.DEFAULT_NAMESPACE)
    p.add_argument("--out", required=True, help="output triple dump path")
    p.set_defaults(handler=_cmd_kg_materialize)

    p = kgsub.add_parser("extract", help="extract annotations from a triple dump")
    p.add_argument("graph", help="input triple dump")
    p.add_argument("--schema", help="axiom file; omitted = designations derived from names")
    p.add_argument("--classes", required=True, help="object-class master list")
    p.add_argument("--predicates", required=True, help="predicate master list")
    p.add_argument("--namespace", default=kg.DEFAULT_NAMESPACE)
    p.add_argument("--out", required=True, help="output annotations path")
    p.set_defaults(handler=_cmd_kg_extract)

    p = sub.add_parser("diff", help="value diff of two corpora")
    p.add_argument("a_annotations", help="left annotations")
    p.add_argument("a_classes", help="left class list")
    p.add_argument("a_predicates", help="left predicate list")
    p.add_argument("b_annotations", help="right annotations")
    p.add_argument("b_classes", help="right class list")
    p.add_argument("b_predicates", help="right predicate list")
    _add_format_argument(p)
    p.set_defaults(handler=_cmd_diff)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except FileMissingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except VrannotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
