"""Historical relations derived from the event log.

Every edge here has a transfer event as its truthmaker. Inheritance edges
always point strictly backward in time (the inheritor is created at the very
tick the donor terminates), so the transitive closures are strict partial
orders by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NotAGranuleAt
from .events import GRANULE_TRANSFER
from .model import KnowledgeBase, connected_components

ORIGINAL_PORTION = "OriginalPortion"
SUB_PORTION = "SubPortion"

PHASE_CONNECTED = "connected"
PHASE_SCATTERED = "scattered"


@dataclass(frozen=True)
class ProvenanceEdge:
    """inheritor inherited granules from donor during event."""

    inheritor: str
    donor: str
    event: str
    complete_inheritance: bool
    complete_donation: bool
    is_sub_portion: bool


@dataclass(frozen=True)
class Episode:
    """One stay of an object inside a quantity: [start, end) plus the moving events."""

    quantity: str
    start: int
    end: int | None
    in_event: str
    out_event: str | None


@dataclass(frozen=True)
class GranuleHistory:
    object: str
    episodes: tuple[Episode, ...]


@dataclass(frozen=True)
class ConstitutionView:
    """The collection of granules constituting a quantity, with its phase at t."""

    collection: str
    quantity: str
    members: frozenset[str]
    phase: str


class _Index:
    """Adjacency lists over the derived edge set, memoized per KB version."""

    def __init__(self, kb: KnowledgeBase):
        self.edges = _derive(kb)
        self.parents: dict[str, set[str]] = {}
        self.children: dict[str, set[str]] = {}
        self.sub_parents: dict[str, set[str]] = {}
        self.sub_children: dict[str, set[str]] = {}
        for e in self.edges:
            self.parents.setdefault(e.inheritor, set()).add(e.donor)
            self.children.setdefault(e.donor, set()).add(e.inheritor)
            if e.is_sub_portion:
                self.sub_parents.setdefault(e.inheritor, set()).add(e.donor)
                self.sub_children.setdefault(e.donor, set()).add(e.inheritor)


def _derive(kb: KnowledgeBase) -> tuple[ProvenanceEdge, ...]:
    edges = []
    for ev in kb.events:
        if ev.kind != GRANULE_TRANSFER:
            continue
        for entry in ev.created:
            for did in sorted(ev.donors):
                donor = kb.quantities.get(did)
                if donor is None:
                    continue
                shared = entry.granules & donor.granules
                if not shared:
                    continue
                subset = entry.granules <= donor.granules
                edges.append(
                    ProvenanceEdge(
                        inheritor=entry.id,
                        donor=did,
                        event=ev.id,
                        complete_inheritance=subset,
                        complete_donation=donor.granules <= entry.granules,
                        is_sub_portion=subset and entry.kind == donor.kind,
                    )
                )
    return tuple(sorted(edges, key=lambda e: (e.inheritor, e.donor)))


def _index(kb: KnowledgeBase) -> _Index:
    cached = getattr(kb, "_provenance_cache", None)
    if cached is not None and cached[0] == kb._version:
        return cached[1]
    idx = _Index(kb)
    kb._provenance_cache = (kb._version, idx)
    return idx


def _reach(start: str, neighbors: dict[str, set[str]]) -> frozenset[str]:
    seen: set[str] = set()
    frontier = [start]
    while frontier:
        node = frontier.pop()
        for nxt in neighbors.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return frozenset(seen)


def derive_edges(kb: KnowledgeBase) -> tuple[ProvenanceEdge, ...]:
    """One edge per (donor, inheritor) pair sharing at least one moved granule."""
    return _index(kb).edges


def inherited_from(kb: KnowledgeBase, quantity_id: str, transitive: bool = False) -> frozenset[str]:
    """Donors the quantity inherited granules from, direct or as a full closure."""
    kb._quantity(quantity_id)
    idx = _index(kb)
    if transitive:
        return _reach(quantity_id, idx.parents)
    return frozenset(idx.parents.get(quantity_id, ()))


def donated_to(kb: KnowledgeBase, quantity_id: str, transitive: bool = False) -> frozenset[str]:
    """Inverse of inherited_from: quantities this one donated granules to."""
    kb._quantity(quantity_id)
    idx = _index(kb)
    if transitive:
        return _reach(quantity_id, idx.children)
    return frozenset(idx.children.get(quantity_id, ()))


def sub_portions_of(kb: KnowledgeBase, quantity_id: str, transitive: bool = False) -> frozenset[str]:
    """Same-kind inheritors whose granules are subsets of this quantity's."""
    kb._quantity(quantity_id)
    idx = _index(kb)
    if transitive:
        return _reach(quantity_id, idx.sub_children)
    return frozenset(idx.sub_children.get(quantity_id, ()))


def sub_portion_parents(kb: KnowledgeBase, quantity_id: str, transitive: bool = False) -> frozenset[str]:
    """Quantities this one is a sub-portion of."""
    kb._quantity(quantity_id)
    idx = _index(kb)
    if transitive:
        return _reach(quantity_id, idx.sub_parents)
    return frozenset(idx.sub_parents.get(quantity_id, ()))


def classify_origin(kb: KnowledgeBase, quantity_id: str) -> str:
    """Every quantity is exactly one of OriginalPortion or SubPortion."""
    kb._quantity(quantity_id)
    idx = _index(kb)
    return SUB_PORTION if idx.sub_parents.get(quantity_id) else ORIGINAL_PORTION


def granule_history(kb: KnowledgeBase, object_id: str) -> GranuleHistory:
    """Chronological episodes of the object's stays inside quantities.

    Consecutive episodes share their out/in event when the granule moved in
    one transfer; a granule freed and later reused leaves a gap.
    """
    kb._object(object_id)
    episodes: list[Episode] = []
    current: Episode | None = None
    for ev in kb.events:
        if current is not None and (current.quantity in ev.donors):
            episodes.append(Episode(current.quantity, current.start, ev.at, current.in_event, ev.id))
            current = None
        entry = next((e for e in ev.created if object_id in e.granules), None)
        if entry is not None:
            if current is not None:
                episodes.append(
                    Episode(current.quantity, current.start, ev.at, current.in_event, ev.id)
                )
            current = Episode(entry.id, ev.at, None, ev.id, None)
    if current is not None:
        episodes.append(current)
    return GranuleHistory(object_id, tuple(episodes))


def cohort_at(kb: KnowledgeBase, object_id: str, t: int) -> frozenset[str]:
    """All co-granules of the object's host quantities at ``t``.

    With nested portions (a sub-quantity inside its whole) an object can have
    more than one live host; the cohort is the union of their granule sets.
    """
    kb._object(object_id)
    holders = kb.holders_of(object_id, t)
    if not holders:
        raise NotAGranuleAt(object_id, t)
    cohort: frozenset[str] = frozenset()
    for q in holders:
        cohort |= q.granules
    return cohort


def common_ancestors(kb: KnowledgeBase, q1: str, q2: str) -> frozenset[str]:
    """Shared provenance: quantities both arguments inherit from.

    Each argument counts as its own ancestor, so if one is an ancestor of the
    other it shows up in the result.
    """
    kb._quantity(q1)
    kb._quantity(q2)
    idx = _index(kb)
    left = _reach(q1, idx.parents) | {q1}
    right = _reach(q2, idx.parents) | {q2}
    return frozenset(left & right)


def constitution_view(kb: KnowledgeBase, quantity_id: str, t: int) -> ConstitutionView:
    """The constituting collection of a quantity and its phase at ``t``.

    The member set is the quantity's (immutable) granule set; the phase is
    computed from the adjacency active at ``t``, so after termination the
    former members may report as scattered.
    """
    q = kb._quantity(quantity_id)
    members = q.granules
    edges = [(a, b) for a, b in kb.adjacency_at(t) if a in members and b in members]
    parts = connected_components(members, edges)
    phase = PHASE_CONNECTED if len(parts) <= 1 else PHASE_SCATTERED
    return ConstitutionView(f"collection-of-{quantity_id}", quantity_id, members, phase)
