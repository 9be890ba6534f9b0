"""Append-only event log and the state transitions that move matter.

Events are the sole mutation path for quantities: a creation event brings one
quantity into existence from free objects, a granule transfer terminates its
donor quantities and creates inheritor quantities from their granules. Every
historical relation derived later points back at one of these records.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import (
    DonorNotLive,
    DuplicateGranuleAssignment,
    GranuleNotFree,
    GranuleProvenanceViolation,
    NonMonotonicTime,
    ReplayError,
    TooFewGranules,
    UnknownObject,
    UnknownKind,
)
from .model import KnowledgeBase, OBJECT_KIND, QUANTITY_KIND, QuantityInst

CREATION = "creation"
GRANULE_TRANSFER = "granuleTransfer"

MIN_GRANULES = 2


@dataclass(frozen=True)
class CreatedEntry:
    """Description of one quantity to create: id, kind, and its granule set."""

    id: str
    kind: str
    granules: frozenset[str]

    @staticmethod
    def of(quantity_id: str, kind: str, granules: Iterable[str]) -> "CreatedEntry":
        return CreatedEntry(quantity_id, kind, frozenset(granules))


@dataclass(frozen=True)
class EventRec:
    """One record of the append-only log; timestamps strictly increase."""

    id: str
    at: int
    kind: str
    donors: frozenset[str]
    created: tuple[CreatedEntry, ...]
    discarded: frozenset[str]


@dataclass(frozen=True)
class RoleBinding:
    """Role instantiations of one transfer: donors, inheritors, moved granules."""

    event: str
    donor_roles: frozenset[str]
    inheritor_roles: frozenset[str]
    donated_granules: frozenset[str]


def apply_creation(
    kb: KnowledgeBase,
    entry: CreatedEntry,
    at: int,
    event_id: str | None = None,
) -> EventRec:
    """Create one quantity from free objects; appends a creation event."""
    kb._check_time(at)
    _check_monotonic(kb, at)
    if event_id is None:
        event_id = f"create-{entry.id}"
    kb._check_fresh(event_id)
    kb._check_fresh(entry.id)
    _check_quantity_kind(kb, entry.kind)
    _check_granules_exist(kb, entry.granules, at)
    if len(entry.granules) < MIN_GRANULES:
        raise TooFewGranules(
            f"quantity '{entry.id}' needs at least {MIN_GRANULES} granules, got {len(entry.granules)}"
        )
    for g in sorted(entry.granules):
        holder = _same_kind_holder(kb, g, entry.kind, at, exclude=frozenset())
        if holder is not None:
            raise GranuleNotFree(
                f"object '{g}' is already a granule of live quantity '{holder.id}' of kind '{entry.kind}'"
            )

    event = EventRec(event_id, at, CREATION, frozenset(), (entry,), frozenset())
    kb.events.append(event)
    kb.quantities[entry.id] = QuantityInst(entry.id, entry.kind, at, entry.granules, event_id)
    kb._bump()
    return event


def apply_transfer(
    kb: KnowledgeBase,
    donors: Iterable[str],
    created: Sequence[CreatedEntry],
    at: int,
    discarded: Iterable[str] = (),
    event_id: str | None = None,
) -> EventRec:
    """Terminate the donors and create the inheritors in one event.

    Every granule of every created quantity must come from a donor or be a
    free object; each donor granule lands in at most one created set (or in
    ``discarded``, or is implicitly freed).
    """
    kb._check_time(at)
    _check_monotonic(kb, at)
    donors = frozenset(donors)
    discarded = frozenset(discarded)
    if not donors:
        raise ValueError("a transfer needs at least one donor; use a creation event instead")
    if not created:
        raise ValueError("a transfer needs at least one created quantity")
    if event_id is None:
        event_id = f"e{len(kb.events)}"
    kb._check_fresh(event_id)

    donor_insts = []
    for did in sorted(donors):
        d = kb._quantity(did)
        if d.terminated_at is not None or d.created_at >= at:
            raise DonorNotLive(f"donor '{did}' is not live immediately before t{at}")
        donor_insts.append(d)
    donor_granules = frozenset().union(*(d.granules for d in donor_insts))

    created = tuple(sorted(created, key=lambda e: e.id))
    seen_ids = set()
    for entry in created:
        if entry.id in seen_ids:
            raise DuplicateGranuleAssignment(f"quantity '{entry.id}' created twice in one event")
        seen_ids.add(entry.id)
        kb._check_fresh(entry.id)
        _check_quantity_kind(kb, entry.kind)
        _check_granules_exist(kb, entry.granules, at)
        if len(entry.granules) < MIN_GRANULES:
            raise TooFewGranules(
                f"quantity '{entry.id}' needs at least {MIN_GRANULES} granules, got {len(entry.granules)}"
            )
        if not (entry.granules & donor_granules):
            raise GranuleProvenanceViolation(
                f"created quantity '{entry.id}' inherits no granule from any donor; "
                "unrelated creations belong in a separate creation event"
            )

    assigned: dict[str, str] = {}
    for entry in created:
        for g in sorted(entry.granules):
            if g in assigned:
                raise DuplicateGranuleAssignment(
                    f"granule '{g}' assigned to both '{assigned[g]}' and '{entry.id}'"
                )
            assigned[g] = entry.id
    for g in sorted(discarded):
        if g in assigned:
            raise DuplicateGranuleAssignment(
                f"granule '{g}' both discarded and assigned to '{assigned[g]}'"
            )
        if g not in donor_granules:
            raise GranuleProvenanceViolation(
                f"discarded object '{g}' is not a granule of any donor"
            )

    for entry in created:
        for g in sorted(entry.granules - donor_granules):
            holder = _same_kind_holder(kb, g, entry.kind, at, exclude=donors)
            if holder is not None:
                raise GranuleProvenanceViolation(
                    f"granule '{g}' of '{entry.id}' is neither donated nor free: "
                    f"it belongs to live quantity '{holder.id}'"
                )

    event = EventRec(event_id, at, GRANULE_TRANSFER, donors, created, discarded)
    kb.events.append(event)
    for d in donor_insts:
        d.terminated_at = at
    for entry in created:
        kb.quantities[entry.id] = QuantityInst(entry.id, entry.kind, at, entry.granules, event_id)
    donated = frozenset().union(*(entry.granules & donor_granules for entry in created))
    kb.role_bindings[event_id] = RoleBinding(
        event_id, donors, frozenset(e.id for e in created), donated
    )
    kb._bump()
    return event


def event_log(kb: KnowledgeBase) -> list[EventRec]:
    """The full append-only history, in application order."""
    return list(kb.events)


def apply_event(kb: KnowledgeBase, event: EventRec) -> EventRec:
    """Re-apply a previously recorded event through the normal checks."""
    if event.kind == CREATION:
        if len(event.created) != 1 or event.donors:
            raise ValueError(f"malformed creation event '{event.id}'")
        return apply_creation(kb, event.created[0], event.at, event_id=event.id)
    if event.kind == GRANULE_TRANSFER:
        return apply_transfer(
            kb, event.donors, event.created, event.at,
            discarded=event.discarded, event_id=event.id,
        )
    raise ValueError(f"unknown event kind '{event.kind}'")


def replay(kb: KnowledgeBase) -> KnowledgeBase:
    """Rebuild a knowledge base from declarations plus the event log.

    The result must be structurally identical to the source (checked via
    canonical export in the test suite). Apply errors are wrapped with the
    index of the offending event.
    """
    fresh = KnowledgeBase()
    decls = sorted(kb.kinds.values(), key=lambda d: (d.meta != OBJECT_KIND, d.name))
    for decl in decls:
        fresh.declare_kind(decl)
    for oid, obj in sorted(kb.objects.items()):
        fresh.create_object(oid, obj.kind, obj.created_at)
    for index, event in enumerate(kb.events):
        try:
            apply_event(fresh, event)
        except Exception as exc:
            raise ReplayError(index, exc) from exc
    for iv in sorted(kb.adjacency, key=lambda i: (i.a, i.b, i.start)):
        fresh.assert_adjacency(iv.a, iv.b, iv.start)
        if iv.end is not None:
            fresh.retract_adjacency(iv.a, iv.b, iv.end)
    for s in sorted(kb.subquantities, key=lambda s: (s.part, s.whole)):
        fresh.assert_subquantity(s.part, s.whole)
    return fresh


def _check_monotonic(kb: KnowledgeBase, at: int) -> None:
    if kb.events and at <= kb.events[-1].at:
        raise NonMonotonicTime(
            f"event at t{at} does not follow the last event at t{kb.events[-1].at}"
        )


def _check_quantity_kind(kb: KnowledgeBase, kind: str) -> None:
    decl = kb.kinds.get(kind)
    if decl is None or decl.meta != QUANTITY_KIND:
        raise UnknownKind(f"'{kind}' is not a declared quantity kind")


def _check_granules_exist(kb: KnowledgeBase, granules: frozenset[str], at: int) -> None:
    for g in sorted(granules):
        obj = kb.objects.get(g)
        if obj is None:
            raise UnknownObject(f"unknown object '{g}'")
        if obj.created_at > at:
            raise UnknownObject(f"object '{g}' does not exist at t{at}")


def _same_kind_holder(
    kb: KnowledgeBase, granule: str, kind: str, at: int, exclude: frozenset[str]
) -> QuantityInst | None:
    # Cross-kind sharing is allowed (a sub-quantity holds granules of its
    # whole); only a live same-kind holder makes a granule unavailable.
    for q in kb.live_quantities_at(at):
        if q.id not in exclude and q.kind == kind and granule in q.granules:
            return q
    return None
