"""Axiom and constraint checks over a knowledge base; read-only.

Engine-built knowledge bases satisfy most rules by construction; the checks
exist to vet imported documents and to prove that construction keeps the
invariants. Validators never repair anything, they only report.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    KnowledgeBase,
    OBJECT_KIND,
    QUANTITY_KIND,
    QuantityInst,
    connected_components,
)

RULES = (
    "A1_TYPING",
    "A2_SUBQUANTITY_INCLUSION",
    "AA1_GGD",
    "CONNECTIVITY",
    "EXTERNAL_CONNECTION",
    "H1_HISTORY",
    "MAXIMALITY_SAME_KIND",
    "SUPPLEMENTATION_MIN2",
    "SUBQ_KIND_DISTINCT",
)

MIN_GRANULES = 2


@dataclass(frozen=True)
class Violation:
    rule: str
    subjects: tuple[str, ...]
    at: int | None
    message: str


@dataclass(frozen=True)
class Report:
    """All violations, sorted by (rule, subjects, time), plus world summaries."""

    violations: tuple[Violation, ...]
    worlds_checked: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_rule(self) -> dict[str, list[Violation]]:
        grouped: dict[str, list[Violation]] = {}
        for v in self.violations:
            grouped.setdefault(v.rule, []).append(v)
        return grouped

    def world_summary(self) -> list[tuple[int, int]]:
        """(time point, violation count) for each checked world."""
        counts = {t: 0 for t in self.worlds_checked}
        for v in self.violations:
            if v.at is not None and v.at in counts:
                counts[v.at] += 1
        return sorted(counts.items())


def check_typing(kb: KnowledgeBase) -> list[Violation]:
    """Endpoints of every stored relation must have the right meta-kinds."""
    out: list[Violation] = []

    def bad(subjects: tuple[str, ...], message: str, rule: str = "A1_TYPING") -> None:
        out.append(Violation(rule, subjects, None, message))

    for oid, obj in sorted(kb.objects.items()):
        decl = kb.kinds.get(obj.kind)
        if decl is None or decl.meta != OBJECT_KIND:
            bad((oid,), f"object '{oid}' has kind '{obj.kind}', which is not a declared object kind")
    for qid, q in sorted(kb.quantities.items()):
        decl = kb.kinds.get(q.kind)
        if decl is None or decl.meta != QUANTITY_KIND:
            bad((qid,), f"quantity '{qid}' has kind '{q.kind}', which is not a declared quantity kind")
        for g in sorted(q.granules):
            if g not in kb.objects:
                what = "a quantity" if g in kb.quantities else "not a declared object"
                bad((qid, g), f"granule '{g}' of quantity '{qid}' is {what}")
    for decl in sorted(kb.kinds.values(), key=lambda d: d.name):
        for req in sorted(decl.requires):
            target = kb.kinds.get(req)
            if target is None or target.meta != OBJECT_KIND:
                bad((decl.name, req), f"kind '{decl.name}' requires '{req}', which is not a declared object kind")
    for iv in sorted(kb.adjacency, key=lambda i: (i.a, i.b, i.start)):
        for end in (iv.a, iv.b):
            if end not in kb.objects:
                bad((iv.a, iv.b), f"adjacency endpoint '{end}' is not a declared object")
    for s in sorted(kb.subquantities, key=lambda s: (s.part, s.whole)):
        unresolved = [x for x in (s.part, s.whole) if x not in kb.quantities]
        for x in unresolved:
            bad((s.part, s.whole), f"sub-quantity endpoint '{x}' is not a declared quantity")
        if not unresolved and kb.quantities[s.part].kind == kb.quantities[s.whole].kind:
            bad(
                (s.part, s.whole),
                f"sub-quantity '{s.part}' of '{s.whole}' holds between two quantities "
                f"of the same kind '{kb.quantities[s.part].kind}'",
                rule="SUBQ_KIND_DISTINCT",
            )
    return out


def check_supplementation(kb: KnowledgeBase) -> list[Violation]:
    """Every quantity carries at least two distinct granules."""
    out = []
    for qid, q in sorted(kb.quantities.items()):
        if len(q.granules) < MIN_GRANULES:
            out.append(
                Violation(
                    "SUPPLEMENTATION_MIN2",
                    (qid,),
                    None,
                    f"quantity '{qid}' has {len(q.granules)} granule(s); at least {MIN_GRANULES} required",
                )
            )
    return out


def check_subquantity_inclusion(kb: KnowledgeBase) -> list[Violation]:
    """Granules of a sub-quantity must all be granules of its whole.

    Vacuous when the lifetimes never overlap: the inclusion only binds worlds
    where both quantities are live. One violation per missing granule.
    """
    out = []
    for s in sorted(kb.subquantities, key=lambda s: (s.part, s.whole)):
        part = kb.quantities.get(s.part)
        whole = kb.quantities.get(s.whole)
        if part is None or whole is None:
            continue  # typing owns unresolved endpoints
        if not _lifetimes_overlap(part, whole):
            continue
        for g in sorted(part.granules - whole.granules):
            out.append(
                Violation(
                    "A2_SUBQUANTITY_INCLUSION",
                    (s.part, s.whole, g),
                    None,
                    f"granule '{g}' of sub-quantity '{s.part}' is not a granule of whole '{s.whole}'",
                )
            )
    return out


def check_ggd(kb: KnowledgeBase) -> list[Violation]:
    """A quantity of a requiring kind has at least one granule of each required kind."""
    out = []
    for qid, q in sorted(kb.quantities.items()):
        decl = kb.kinds.get(q.kind)
        if decl is None or not decl.requires:
            continue
        present = {kb.objects[g].kind for g in q.granules if g in kb.objects}
        for req in sorted(decl.requires - present):
            out.append(
                Violation(
                    "AA1_GGD",
                    (qid, req),
                    None,
                    f"quantity '{qid}' of kind '{q.kind}' has no granule of required kind '{req}'",
                )
            )
    return out


def check_connectivity(kb: KnowledgeBase, t: int) -> list[Violation]:
    """Each live quantity's granule graph is one piece at ``t``.

    Granules with no adjacent co-granule are reported as EXTERNAL_CONNECTION;
    quantities whose remaining (non-isolated) granules split into several
    components are reported as CONNECTIVITY. Quantities with unresolved or
    sub-minimum granule sets are skipped here: typing and supplementation own
    those defects.
    """
    out = []
    active = set(kb.adjacency_at(t))
    for q in kb.live_quantities_at(t):
        if len(q.granules) < MIN_GRANULES or any(g not in kb.objects for g in q.granules):
            continue
        edges = [(a, b) for a, b in active if a in q.granules and b in q.granules]
        touched = {x for e in edges for x in e}
        for g in sorted(q.granules - touched):
            out.append(
                Violation(
                    "EXTERNAL_CONNECTION",
                    (g, q.id),
                    t,
                    f"granule '{g}' of quantity '{q.id}' is externally connected to no co-granule at t{t}",
                )
            )
        parts = connected_components(touched, edges)
        if len(parts) > 1:
            out.append(
                Violation(
                    "CONNECTIVITY",
                    (q.id,),
                    t,
                    f"granules of quantity '{q.id}' fall apart into {len(parts)} "
                    f"disconnected clusters at t{t}",
                )
            )
    return out


def check_maximality(kb: KnowledgeBase, t: int) -> list[Violation]:
    """No two live quantities of one kind share or touch granules at ``t``."""
    out = []
    active = set(kb.adjacency_at(t))
    live = kb.live_quantities_at(t)
    for i, q1 in enumerate(live):
        for q2 in live[i + 1:]:
            if q1.kind != q2.kind:
                continue
            shared = q1.granules & q2.granules
            if shared:
                out.append(
                    Violation(
                        "MAXIMALITY_SAME_KIND",
                        (q1.id, q2.id),
                        t,
                        f"same-kind quantities '{q1.id}' and '{q2.id}' share granule(s) "
                        f"{', '.join(sorted(shared))} at t{t}",
                    )
                )
                continue
            touching = sorted(
                (a, b)
                for a, b in active
                if (a in q1.granules and b in q2.granules)
                or (a in q2.granules and b in q1.granules)
            )
            if touching:
                a, b = touching[0]
                out.append(
                    Violation(
                        "MAXIMALITY_SAME_KIND",
                        (q1.id, q2.id),
                        t,
                        f"same-kind quantities '{q1.id}' and '{q2.id}' are adjacent "
                        f"({a}-{b}) at t{t}; they should be one quantity",
                    )
                )
    return out


def check_history(kb: KnowledgeBase) -> list[Violation]:
    """The entity store and the event log must tell the same story.

    Recomputes each quantity's lifecycle from the log and reports any
    disagreement: creations without matching events, terminations without a
    donating transfer, granule sets drifting from their creation record.
    """
    out = []

    def bad(subjects: tuple[str, ...], message: str) -> None:
        out.append(Violation("H1_HISTORY", subjects, None, message))

    events_by_id = {}
    last_at = None
    for ev in kb.events:
        if ev.id in events_by_id:
            bad((ev.id,), f"event id '{ev.id}' appears twice in the log")
        events_by_id[ev.id] = ev
        if last_at is not None and ev.at <= last_at:
            bad((ev.id,), f"event '{ev.id}' at t{ev.at} does not follow its predecessor at t{last_at}")
        last_at = ev.at

    created_in: dict[str, tuple[str, int, frozenset[str], str]] = {}
    donated_in: dict[str, list[tuple[str, int]]] = {}
    for ev in kb.events:
        for entry in ev.created:
            if entry.id in created_in:
                bad((entry.id,), f"quantity '{entry.id}' is created by two events")
            created_in[entry.id] = (ev.id, ev.at, entry.granules, entry.kind)
            if entry.id not in kb.quantities:
                bad((entry.id,), f"event '{ev.id}' creates quantity '{entry.id}', which is not in the store")
        for did in sorted(ev.donors):
            donated_in.setdefault(did, []).append((ev.id, ev.at))
            if did not in kb.quantities:
                bad((did,), f"event '{ev.id}' lists donor '{did}', which is not in the store")

    for qid, q in sorted(kb.quantities.items()):
        record = created_in.get(qid)
        if record is None or record[0] != q.creation_event:
            bad((qid,), f"quantity '{qid}' names creation event '{q.creation_event}', "
                        "but the log does not create it there")
        else:
            ev_id, ev_at, granules, kind = record
            if ev_at != q.created_at:
                bad((qid,), f"quantity '{qid}' starts at t{q.created_at} but its creation event is at t{ev_at}")
            if granules != q.granules:
                bad((qid,), f"granule set of quantity '{qid}' disagrees with its creation event")
            if kind != q.kind:
                bad((qid,), f"kind of quantity '{qid}' disagrees with its creation event")
        donations = donated_in.get(qid, [])
        if q.terminated_at is None:
            for ev_id, _ in donations:
                bad((qid,), f"quantity '{qid}' donated in event '{ev_id}' but is not terminated")
        else:
            if q.terminated_at <= q.created_at:
                bad((qid,), f"quantity '{qid}' terminates at t{q.terminated_at}, "
                            f"not after its creation at t{q.created_at}")
            if not any(at == q.terminated_at for _, at in donations):
                bad((qid,), f"quantity '{qid}' is terminated at t{q.terminated_at} "
                            "without a granule transfer event there")
    return out


def validate_all(kb: KnowledgeBase, at: int | None = None) -> Report:
    """Run every rule; world-scoped rules run at each change point.

    With ``at`` given, the world-scoped rules run only at that time point.
    """
    violations: list[Violation] = []
    violations += check_typing(kb)
    violations += check_supplementation(kb)
    violations += check_subquantity_inclusion(kb)
    violations += check_ggd(kb)
    violations += check_history(kb)
    worlds = [at] if at is not None else kb.change_points()
    for t in worlds:
        violations += check_connectivity(kb, t)
        violations += check_maximality(kb, t)
    ordered = sorted(violations, key=lambda v: (v.rule, v.subjects, v.at if v.at is not None else -1))
    return Report(tuple(ordered), tuple(worlds))


def _lifetimes_overlap(a: QuantityInst, b: QuantityInst) -> bool:
    a_end = a.terminated_at if a.terminated_at is not None else float("inf")
    b_end = b.terminated_at if b.terminated_at is not None else float("inf")
    return max(a.created_at, b.created_at) < min(a_end, b_end)
