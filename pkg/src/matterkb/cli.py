"""Command-line front-end: validate, query, export, replay-check.

Exit codes: 0 success (no violations), 1 violations or replay mismatch found,
2 parse/IO/usage error. Results go to stdout, diagnostics to stderr; output
is byte-deterministic for a given input and command.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import canonical, dsl, provenance
from .errors import DocumentError, EngineError, ScenarioLoadError
from .events import replay
from .model import KnowledgeBase
from .validation import Report, validate_all

OK = 0
VIOLATIONS = 1
USAGE = 2

QUERIES = ("provenance", "history", "world", "cohort", "ancestors", "classify")


class _CliError(Exception):
    def __init__(self, message: str, code: int = USAGE):
        super().__init__(message)
        self.code = code


def load_kb(path_str: str) -> KnowledgeBase:
    """Load a scenario (.mp) or canonical document (.mpkb) into a KB."""
    path = Path(path_str)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise _CliError(f"cannot read '{path_str}': {exc.strerror or exc}") from exc
    if path.suffix == ".mpkb":
        try:
            return canonical.import_document(data.decode("utf-8", errors="strict"))
        except UnicodeDecodeError as exc:
            raise _CliError(f"{path_str}: not valid UTF-8 ({exc.reason})") from exc
        except DocumentError as exc:
            raise _CliError(f"{path_str}: {exc}") from exc
    result = dsl.parse_bytes(data)
    if not result.ok:
        rendered = "\n".join(f"{path_str}:{d.render()}\n  | {d.snippet}" for d in result.diagnostics)
        raise _CliError(rendered)
    try:
        return dsl.load(result.scenario)
    except ScenarioLoadError as exc:
        raise _CliError(f"{path_str}:{exc.line}:{exc.column}: error: {exc.message}") from exc


def parse_time(text: str) -> int:
    raw = text[1:] if text.startswith("t") else text
    if raw.isdigit():
        return int(raw)
    raise _CliError(f"'{text}' is not a time point; write tN with N a non-negative integer")


def render_report(report: Report, fmt: str) -> str:
    if fmt == "canonical":
        records = [
            {
                "rule": v.rule,
                "subjects": list(v.subjects),
                **({"at": v.at} if v.at is not None else {}),
                "message": v.message,
            }
            for v in report.violations
        ]
        return json.dumps(records, indent=2) + "\n"
    lines = []
    for rule, violations in sorted(report.by_rule().items()):
        lines.append(f"{rule} ({len(violations)})")
        for v in violations:
            when = f" at t{v.at}" if v.at is not None else ""
            lines.append(f"  [{', '.join(v.subjects)}]{when}: {v.message}")
    n = len(report.violations)
    lines.append(f"{n} violation" + ("s" if n != 1 else ""))
    return "\n".join(lines) + "\n"


def cmd_validate(args: argparse.Namespace) -> int:
    kb = load_kb(args.file)
    at = parse_time(args.at) if args.at is not None else None
    report = validate_all(kb, at=at)
    sys.stdout.write(render_report(report, args.format))
    return OK if report.ok else VIOLATIONS


def cmd_query(args: argparse.Namespace) -> int:
    kb = load_kb(args.file)
    try:
        text, payload = run_query(kb, args)
    except EngineError as exc:
        raise _CliError(str(exc)) from exc
    if args.format == "canonical":
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    else:
        sys.stdout.write(text)
    return OK


def _need(args: argparse.Namespace, count: int, usage: str) -> list[str]:
    if len(args.args) != count:
        raise _CliError(f"usage: query FILE {usage}")
    return args.args


def run_query(kb: KnowledgeBase, args: argparse.Namespace) -> tuple[str, object]:
    name = args.query
    if name == "provenance":
        (qid,) = _need(args, 1, "provenance QUANTITY [--transitive]")
        donors = sorted(provenance.inherited_from(kb, qid, transitive=args.transitive))
        edges = [
            e for e in provenance.derive_edges(kb)
            if e.inheritor in {qid, *donors} and e.donor in {qid, *donors}
        ]
        payload = {
            "quantity": qid,
            "transitive": args.transitive,
            "donors": donors,
            "edges": [
                {
                    "inheritor": e.inheritor,
                    "donor": e.donor,
                    "event": e.event,
                    "completeInheritance": e.complete_inheritance,
                    "completeDonation": e.complete_donation,
                    "isSubPortion": e.is_sub_portion,
                }
                for e in edges
            ],
        }
        return "".join(f"{d}\n" for d in donors), payload
    if name == "history":
        (oid,) = _need(args, 1, "history OBJECT")
        history = provenance.granule_history(kb, oid)
        lines = []
        for ep in history.episodes:
            span = f"t{ep.start}..t{ep.end}" if ep.end is not None else f"t{ep.start}.."
            out = f" out={ep.out_event}" if ep.out_event is not None else ""
            lines.append(f"{ep.quantity} {span} in={ep.in_event}{out}\n")
        payload = {
            "object": oid,
            "episodes": [
                {
                    "quantity": ep.quantity,
                    "from": ep.start,
                    **({"to": ep.end} if ep.end is not None else {}),
                    "inEvent": ep.in_event,
                    **({"outEvent": ep.out_event} if ep.out_event is not None else {}),
                }
                for ep in history.episodes
            ],
        }
        return "".join(lines), payload
    if name == "world":
        (t_raw,) = _need(args, 1, "world tN")
        t = parse_time(t_raw)
        view = kb.world_at(t)
        lines = [f"world t{t}\n", "objects:\n"]
        lines += [f"  {oid} {status}\n" for oid, status in view.objects]
        lines.append("quantities:\n")
        lines += [f"  {qid} {status}\n" for qid, status in view.quantities]
        lines.append("granuleOf:\n")
        lines += [f"  {o} {q}\n" for o, q in view.granule_of]
        lines.append("adjacency:\n")
        lines += [f"  {a} {b}\n" for a, b in view.adjacency]
        lines.append("subquantityOf:\n")
        lines += [f"  {p} {w}\n" for p, w in view.subquantities]
        payload = {
            "at": t,
            "objects": [{"id": o, "status": s} for o, s in view.objects],
            "quantities": [{"id": q, "status": s} for q, s in view.quantities],
            "granuleOf": [{"object": o, "quantity": q} for o, q in view.granule_of],
            "adjacency": [{"a": a, "b": b} for a, b in view.adjacency],
            "subquantityOf": [{"part": p, "whole": w} for p, w in view.subquantities],
        }
        return "".join(lines), payload
    if name == "cohort":
        (oid,) = _need(args, 1, "cohort OBJECT --at tN")
        if args.at is None:
            raise _CliError("cohort needs --at tN")
        t = parse_time(args.at)
        members = sorted(provenance.cohort_at(kb, oid, t))
        return "".join(f"{m}\n" for m in members), {"object": oid, "at": t, "cohort": members}
    if name == "ancestors":
        q1, q2 = _need(args, 2, "ancestors QUANTITY QUANTITY")
        shared = sorted(provenance.common_ancestors(kb, q1, q2))
        return "".join(f"{q}\n" for q in shared), {"quantities": [q1, q2], "commonAncestors": shared}
    if name == "classify":
        if len(args.args) > 1:
            raise _CliError("usage: query FILE classify [QUANTITY]")
        ids = args.args if args.args else sorted(kb.quantities)
        rows = [(qid, provenance.classify_origin(kb, qid)) for qid in ids]
        text = "".join(f"{qid}: {label}\n" for qid, label in rows)
        return text, {"classification": [{"quantity": q, "origin": label} for q, label in rows]}
    raise _CliError(f"unknown query '{name}'; choose from {', '.join(QUERIES)}")


def cmd_export(args: argparse.Namespace) -> int:
    kb = load_kb(args.file)
    document = canonical.export_document(kb)
    if args.out == "-":
        sys.stdout.write(document)
        return OK
    try:
        Path(args.out).write_text(document, encoding="utf-8")
    except OSError as exc:
        raise _CliError(f"cannot write '{args.out}': {exc.strerror or exc}") from exc
    return OK


def cmd_replay_check(args: argparse.Namespace) -> int:
    kb = load_kb(args.file)
    before = canonical.export_document(kb)
    try:
        rebuilt = replay(kb)
    except EngineError as exc:
        sys.stdout.write(f"replay-check: FAILED ({exc})\n")
        return VIOLATIONS
    after = canonical.export_document(rebuilt)
    if before == after:
        sys.stdout.write(f"replay-check: OK ({len(kb.events)} events, {len(before)} bytes)\n")
        return OK
    sys.stdout.write("replay-check: FAILED (re-applied log exports differently)\n")
    return VIOLATIONS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matterkb",
        description="Temporal knowledge base for portions of matter and their granule-level provenance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="run every axiom check against a scenario or document")
    p_validate.add_argument("file")
    p_validate.add_argument("--format", choices=("text", "canonical"), default="text")
    p_validate.add_argument("--at", metavar="tN", default=None, help="check one world only")
    p_validate.set_defaults(func=cmd_validate)

    p_query = sub.add_parser("query", help="run a provenance or world query")
    p_query.add_argument("file")
    p_query.add_argument("query", choices=QUERIES)
    p_query.add_argument("args", nargs="*")
    p_query.add_argument("--transitive", action="store_true", help="close over chains of transfers")
    p_query.add_argument("--format", choices=("text", "canonical"), default="text")
    p_query.add_argument("--at", metavar="tN", default=None)
    p_query.set_defaults(func=cmd_query)

    p_export = sub.add_parser("export", help="write the canonical document form")
    p_export.add_argument("file")
    p_export.add_argument("out", help="output path, or - for stdout")
    p_export.set_defaults(func=cmd_export)

    p_replay = sub.add_parser("replay-check", help="verify the event log rebuilds the same state")
    p_replay.add_argument("file")
    p_replay.set_defaults(func=cmd_replay_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except _CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


def entry_point() -> None:
    sys.exit(main())
