"""Entity store and temporal model.

Time is a dimensionless non-negative integer tick. A quantity is live on the
half-open interval [created_at, terminated_at); a missing terminated_at means
the quantity is still live. Terminated entities are never deleted: they stay
in the store with historical status and keep answering queries about the past.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable

from .errors import (
    DuplicateId,
    DuplicateKind,
    NoLifetimeOverlap,
    NotLiveAt,
    OverlappingInterval,
    SameKindSubQuantity,
    SelfAdjacency,
    UnknownAdjacency,
    UnknownGranuleKind,
    UnknownKind,
    UnknownObject,
    UnknownQuantity,
)

if TYPE_CHECKING:
    from .events import EventRec, RoleBinding

QUANTITY_KIND = "quantityKind"
OBJECT_KIND = "objectKind"

STATUS_LIVE = "live"
STATUS_TERMINATED = "terminated"
STATUS_NOT_YET_CREATED = "not-yet-created"


@dataclass(frozen=True)
class KindDecl:
    """A declared type: either a kind of quantity or a kind of object.

    ``requires`` lists object kinds of which every instance quantity must have
    at least one granule; it is only meaningful for quantity kinds.
    """

    name: str
    meta: str
    requires: frozenset[str] = frozenset()


@dataclass(frozen=True)
class ObjectInst:
    id: str
    kind: str
    created_at: int


@dataclass
class QuantityInst:
    """An individual portion of matter.

    The granule set is fixed at creation; any change of parts is modelled as
    termination plus creation of new quantities.
    """

    id: str
    kind: str
    created_at: int
    granules: frozenset[str]
    creation_event: str
    terminated_at: int | None = None

    def live_at(self, t: int) -> bool:
        return self.created_at <= t and (self.terminated_at is None or t < self.terminated_at)

    def status_at(self, t: int) -> str:
        if t < self.created_at:
            return STATUS_NOT_YET_CREATED
        if self.terminated_at is not None and t >= self.terminated_at:
            return STATUS_TERMINATED
        return STATUS_LIVE


@dataclass
class AdjacencyInterval:
    """A symmetric external-connection edge, active over [start, end).

    Endpoints are stored normalized (a < b). ``end`` is None while the edge
    is open-ended.
    """

    a: str
    b: str
    start: int
    end: int | None = None

    def active_at(self, t: int) -> bool:
        return self.start <= t and (self.end is None or t < self.end)


@dataclass(frozen=True)
class SubQuantityAssertion:
    part: str
    whole: str


@dataclass(frozen=True)
class WorldView:
    """Immutable snapshot of one world (time slice); structurally comparable.

    Every known entity appears with its status; past entities are kept with
    historical status rather than dropped.
    """

    at: int
    objects: tuple[tuple[str, str], ...]
    quantities: tuple[tuple[str, str], ...]
    granule_of: tuple[tuple[str, str], ...]
    adjacency: tuple[tuple[str, str], ...]
    subquantities: tuple[tuple[str, str], ...]


def connected_components(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> list[frozenset[str]]:
    """Union-find over ``nodes``; edges with endpoints outside are ignored."""
    parent = {n: n for n in nodes}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        if a in parent and b in parent:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
    groups: dict[str, set[str]] = {}
    for n in parent:
        groups.setdefault(find(n), set()).add(n)
    return [frozenset(g) for g in groups.values()]


@dataclass
class KnowledgeBase:
    """Typed entity store plus the append-only event log.

    All mutation goes through the kernel methods here and the event engine;
    world views are immutable snapshots safe to share across readers.
    """

    kinds: dict[str, KindDecl] = field(default_factory=dict)
    objects: dict[str, ObjectInst] = field(default_factory=dict)
    quantities: dict[str, QuantityInst] = field(default_factory=dict)
    adjacency: list[AdjacencyInterval] = field(default_factory=list)
    subquantities: set[SubQuantityAssertion] = field(default_factory=set)
    events: list["EventRec"] = field(default_factory=list)
    role_bindings: dict[str, "RoleBinding"] = field(default_factory=dict)
    _version: int = 0

    # -- declarations ------------------------------------------------------

    def declare_kind(self, decl: KindDecl) -> KindDecl:
        """Register a kind declaration; requirements must already resolve."""
        if decl.name in self.kinds:
            raise DuplicateKind(f"kind '{decl.name}' already declared")
        if decl.meta not in (QUANTITY_KIND, OBJECT_KIND):
            raise ValueError(f"unknown meta '{decl.meta}' for kind '{decl.name}'")
        if decl.meta == OBJECT_KIND and decl.requires:
            raise ValueError(f"object kind '{decl.name}' cannot require granule kinds")
        for req in sorted(decl.requires):
            target = self.kinds.get(req)
            if target is None or target.meta != OBJECT_KIND:
                raise UnknownGranuleKind(
                    f"kind '{decl.name}' requires '{req}', which is not a declared object kind"
                )
        self.kinds[decl.name] = decl
        self._bump()
        return decl

    def declare_object_kind(self, name: str) -> KindDecl:
        return self.declare_kind(KindDecl(name, OBJECT_KIND))

    def declare_quantity_kind(self, name: str, requires: Iterable[str] = ()) -> KindDecl:
        return self.declare_kind(KindDecl(name, QUANTITY_KIND, frozenset(requires)))

    def create_object(self, object_id: str, kind: str, at: int) -> ObjectInst:
        """Bring an object into existence from ``at`` onward."""
        self._check_time(at)
        self._check_fresh(object_id)
        decl = self.kinds.get(kind)
        if decl is None or decl.meta != OBJECT_KIND:
            raise UnknownKind(f"'{kind}' is not a declared object kind")
        obj = ObjectInst(object_id, kind, at)
        self.objects[object_id] = obj
        self._bump()
        return obj

    # -- adjacency ---------------------------------------------------------

    def assert_adjacency(self, a: str, b: str, start: int) -> None:
        """Open a symmetric adjacency edge active from ``start``."""
        self._check_time(start)
        if a == b:
            raise SelfAdjacency(f"object '{a}' cannot be adjacent to itself")
        for oid in (a, b):
            obj = self.objects.get(oid)
            if obj is None:
                raise UnknownObject(f"unknown object '{oid}'")
            if obj.created_at > start:
                raise UnknownObject(f"object '{oid}' does not exist at t{start}")
        a, b = sorted((a, b))
        for iv in self.adjacency:
            # a new interval is open-ended, so it overlaps anything not closed by start
            if (iv.a, iv.b) == (a, b) and (iv.end is None or iv.end > start):
                raise OverlappingInterval(
                    f"adjacency {a}-{b} from t{start} would overlap the interval "
                    f"starting at t{iv.start}"
                )
        self.adjacency.append(AdjacencyInterval(a, b, start))
        self._bump()

    def retract_adjacency(self, a: str, b: str, end: int) -> None:
        """Close the open adjacency interval for the pair at ``end``."""
        self._check_time(end)
        for oid in (a, b):
            if oid not in self.objects:
                raise UnknownObject(f"unknown object '{oid}'")
        a, b = sorted((a, b))
        for iv in self.adjacency:
            if (iv.a, iv.b) == (a, b) and iv.end is None and iv.start < end:
                iv.end = end
                self._bump()
                return
        raise UnknownAdjacency(f"no open adjacency {a}-{b} active before t{end}")

    def adjacent_at(self, a: str, b: str, t: int) -> bool:
        a, b = sorted((a, b))
        return any((iv.a, iv.b) == (a, b) and iv.active_at(t) for iv in self.adjacency)

    def adjacency_at(self, t: int) -> list[tuple[str, str]]:
        """Normalized pairs active at ``t``, sorted and deduplicated."""
        return sorted({(iv.a, iv.b) for iv in self.adjacency if iv.active_at(t)})

    # -- sub-quantity assertions --------------------------------------------

    def assert_subquantity(self, part: str, whole: str) -> None:
        """Assert that ``part`` is a sub-quantity of ``whole`` (idempotent)."""
        p = self._quantity(part)
        w = self._quantity(whole)
        if p.kind == w.kind:
            raise SameKindSubQuantity(
                f"sub-quantity requires distinct kinds; '{part}' and '{whole}' are both '{p.kind}'"
            )
        p_end = p.terminated_at if p.terminated_at is not None else float("inf")
        w_end = w.terminated_at if w.terminated_at is not None else float("inf")
        if max(p.created_at, w.created_at) >= min(p_end, w_end):
            raise NoLifetimeOverlap(f"lifetimes of '{part}' and '{whole}' do not overlap")
        self.subquantities.add(SubQuantityAssertion(part, whole))
        self._bump()

    # -- reads ---------------------------------------------------------------

    def granules_of(self, quantity_id: str, t: int) -> frozenset[str]:
        """The fixed granule set of a quantity, readable while it is live."""
        q = self._quantity(quantity_id)
        if not q.live_at(t):
            raise NotLiveAt(quantity_id, t)
        return q.granules

    def granule_types(self, quantity_id: str) -> frozenset[str]:
        """Object kinds instantiated by at least one granule of the quantity."""
        q = self._quantity(quantity_id)
        kinds = {self.objects[g].kind for g in q.granules if g in self.objects}
        return frozenset(kinds)

    def live_quantities_at(self, t: int) -> list[QuantityInst]:
        return [q for _, q in sorted(self.quantities.items()) if q.live_at(t)]

    def holders_of(self, object_id: str, t: int) -> list[QuantityInst]:
        """Quantities live at ``t`` that have the object as a granule."""
        return [q for q in self.live_quantities_at(t) if object_id in q.granules]

    def world_at(self, t: int) -> WorldView:
        """Deterministic snapshot of the world at ``t``; pure."""
        self._check_time(t)
        objects = tuple(
            (oid, STATUS_LIVE if o.created_at <= t else STATUS_NOT_YET_CREATED)
            for oid, o in sorted(self.objects.items())
        )
        quantities = tuple((qid, q.status_at(t)) for qid, q in sorted(self.quantities.items()))
        granule_of = tuple(
            sorted((g, q.id) for q in self.quantities.values() if q.live_at(t) for g in q.granules)
        )
        subq = tuple(
            sorted(
                (s.part, s.whole)
                for s in self.subquantities
                if s.part in self.quantities
                and s.whole in self.quantities
                and self.quantities[s.part].live_at(t)
                and self.quantities[s.whole].live_at(t)
            )
        )
        return WorldView(
            at=t,
            objects=objects,
            quantities=quantities,
            granule_of=granule_of,
            adjacency=tuple(self.adjacency_at(t)),
            subquantities=subq,
        )

    def change_points(self) -> list[int]:
        """Sorted distinct time points at which any stored state changes."""
        points: set[int] = set()
        for ev in self.events:
            points.add(ev.at)
        for iv in self.adjacency:
            points.add(iv.start)
            if iv.end is not None:
                points.add(iv.end)
        for o in self.objects.values():
            points.add(o.created_at)
        for q in self.quantities.values():
            points.add(q.created_at)
            if q.terminated_at is not None:
                points.add(q.terminated_at)
        return sorted(points)

    # -- internals -----------------------------------------------------------

    def _quantity(self, quantity_id: str) -> QuantityInst:
        q = self.quantities.get(quantity_id)
        if q is None:
            raise UnknownQuantity(f"unknown quantity '{quantity_id}'")
        return q

    def _object(self, object_id: str) -> ObjectInst:
        o = self.objects.get(object_id)
        if o is None:
            raise UnknownObject(f"unknown object '{object_id}'")
        return o

    def _check_fresh(self, entity_id: str) -> None:
        if entity_id in self.objects or entity_id in self.quantities or any(
            ev.id == entity_id for ev in self.events
        ):
            raise DuplicateId(f"id '{entity_id}' is already in use")

    @staticmethod
    def _check_time(t: int) -> None:
        if not isinstance(t, int) or isinstance(t, bool) or t < 0:
            raise ValueError(f"time points are non-negative integers, got {t!r}")

    def _bump(self) -> None:
        self._version += 1
