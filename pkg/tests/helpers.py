"""Shared test machinery: a generator of random valid knowledge bases,
independent graph/closure oracles, and the seeded-fault fixture corpus."""

from __future__ import annotations

import random

from matterkb import (
    CreatedEntry,
    KindDecl,
    KnowledgeBase,
    apply_creation,
    apply_transfer,
    kb_to_doc,
)
from matterkb.canonical import doc_to_kb
from matterkb.model import OBJECT_KIND, QUANTITY_KIND, ObjectInst, QuantityInst

TOP_KINDS = ("RockA", "RockB", "Mud")
SUB_KIND = "Brine"
MAX_EVENTS = 8
MAX_OBJECTS = 20


class _Gen:
    """Random event-log builder that keeps every axiom satisfied.

    Validity strategy: granule sets are clique-connected when a quantity is
    created, entangled quantities (a sub-quantity and its whole) are never
    donors, and after every event any adjacency edge crossing two live
    same-kind quantities is retracted.
    """

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.kb = KnowledgeBase()
        self.kb.declare_object_kind("Grain")
        for kind in TOP_KINDS:
            self.kb.declare_quantity_kind(kind, ["Grain"])
        self.kb.declare_quantity_kind(SUB_KIND, [])
        self.next_object = 0
        self.next_quantity = 0
        self.free: set[str] = set()
        self.entangled: set[str] = set()
        self.subquantity_pairs: list[tuple[str, str]] = []

    def run(self, n_events: int) -> KnowledgeBase:
        t = 0
        for _ in range(n_events):
            if self.step(t):
                t += 1
        return self.kb

    # -- actions -------------------------------------------------------------

    def step(self, t: int) -> bool:
        donors_possible = bool(self.donor_candidates())
        hosts_possible = bool(self.host_candidates())
        budget = MAX_OBJECTS - self.next_object
        moves = []
        if budget >= 2:
            moves += ["create"] * 4
        if donors_possible:
            moves += ["transfer"] * 4
        if hosts_possible:
            moves += ["sub"] * 3
        if not moves:
            return False
        move = self.rng.choice(moves)
        if move == "create":
            self.do_create(t)
        elif move == "transfer":
            self.do_transfer(t)
        else:
            self.do_sub(t)
        self.cut_same_kind_crossings(t)
        return True

    def do_create(self, t: int) -> None:
        budget = MAX_OBJECTS - self.next_object
        m = self.rng.randint(2, min(4, budget))
        granules = [self.new_object(t) for _ in range(m)]
        qid = self.new_quantity_id()
        kind = self.rng.choice(TOP_KINDS)
        apply_creation(self.kb, CreatedEntry.of(qid, kind, granules), t)
        self.clique(granules, t)

    def do_transfer(self, t: int) -> None:
        candidates = self.donor_candidates()
        n_donors = self.rng.randint(1, min(2, len(candidates)))
        donors = self.rng.sample(candidates, n_donors)
        pool = sorted(set().union(*(self.kb.quantities[d].granules for d in donors)))
        self.rng.shuffle(pool)
        groups: list[list[str]] = []
        if len(pool) >= 4 and self.rng.random() < 0.6:
            s1 = self.rng.randint(2, len(pool) - 2)
            s2 = self.rng.randint(2, len(pool) - s1)
            groups = [pool[:s1], pool[s1:s1 + s2]]
            leftovers = pool[s1 + s2:]
        else:
            s1 = self.rng.randint(2, len(pool))
            groups = [pool[:s1]]
            leftovers = pool[s1:]
        if self.free and self.rng.random() < 0.3:
            extra = self.rng.choice(sorted(self.free))
            self.free.discard(extra)
            self.rng.choice(groups).append(extra)
        discarded = [g for g in leftovers if self.rng.random() < 0.5]
        created = [
            CreatedEntry.of(self.new_quantity_id(), self.rng.choice(TOP_KINDS), group)
            for group in groups
        ]
        apply_transfer(self.kb, donors, created, t, discarded=discarded)
        self.free.update(leftovers)
        for entry in created:
            self.clique(sorted(entry.granules), t)

    def do_sub(self, t: int) -> None:
        host = self.rng.choice(self.host_candidates())
        granules = sorted(self.kb.quantities[host].granules)
        size = self.rng.randint(2, len(granules))
        members = self.rng.sample(granules, size)
        sub = self.new_quantity_id()
        apply_creation(self.kb, CreatedEntry.of(sub, SUB_KIND, members), t)
        self.kb.assert_subquantity(sub, host)
        self.entangled.update((sub, host))
        self.subquantity_pairs.append((sub, host))

    # -- support ---------------------------------------------------------------

    def donor_candidates(self) -> list[str]:
        return [q.id for q in self.kb.live_quantities_at(10**9) if q.id not in self.entangled]

    def host_candidates(self) -> list[str]:
        return [
            q.id
            for q in self.kb.live_quantities_at(10**9)
            if q.id not in self.entangled and q.kind != SUB_KIND and len(q.granules) >= 2
        ]

    def new_object(self, t: int) -> str:
        oid = f"g{self.next_object}"
        self.next_object += 1
        self.kb.create_object(oid, "Grain", t)
        return oid

    def new_quantity_id(self) -> str:
        qid = f"q{self.next_quantity}"
        self.next_quantity += 1
        return qid

    def clique(self, ids: list[str], t: int) -> None:
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                if not self.kb.adjacent_at(a, b, t):
                    self.kb.assert_adjacency(*sorted((a, b)), t)

    def cut_same_kind_crossings(self, t: int) -> None:
        live = self.kb.live_quantities_at(t)
        active = self.kb.adjacency_at(t)
        for i, q1 in enumerate(live):
            for q2 in live[i + 1:]:
                if q1.kind != q2.kind:
                    continue
                for a, b in active:
                    crosses = (a in q1.granules and b in q2.granules) or (
                        a in q2.granules and b in q1.granules
                    )
                    if crosses and self.kb.adjacent_at(a, b, t):
                        self.kb.retract_adjacency(a, b, t)


def build_random_kb(seed: int) -> KnowledgeBase:
    rng = random.Random(seed)
    gen = _Gen(rng)
    kb = gen.run(rng.randint(1, MAX_EVENTS))
    kb.subquantity_pairs = list(gen.subquantity_pairs)  # stashed for tests
    return kb


# -- independent oracles -------------------------------------------------------


def bfs_component(start: str, adjacency: dict[str, set[str]]) -> set[str]:
    seen = {start}
    queue = [start]
    while queue:
        node = queue.pop(0)
        for nxt in adjacency.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def _adjacency_map(edges: list[tuple[str, str]]) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {}
    for a, b in edges:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    return adj


def oracle_connectivity(granules: set[str], edges: list[tuple[str, str]]) -> tuple[set[str], bool]:
    """(isolated granules, True when the non-isolated part splits) via BFS."""
    internal = [(a, b) for a, b in edges if a in granules and b in granules]
    adj = _adjacency_map(internal)
    isolated = {g for g in granules if not adj.get(g)}
    rest = granules - isolated
    if not rest:
        return isolated, False
    component = bfs_component(next(iter(sorted(rest))), adj)
    return isolated, not rest <= component


def oracle_maximality(
    q1: str, g1: set[str], q2: str, g2: set[str], edges: list[tuple[str, str]]
) -> bool:
    """True when a merged granule graph joins both quantity nodes."""
    merged = [(q1, g) for g in g1] + [(q2, g) for g in g2]
    nodes = g1 | g2
    merged += [(a, b) for a, b in edges if a in nodes and b in nodes]
    return q2 in bfs_component(q1, _adjacency_map(merged))


def oracle_ancestors(parents: dict[str, set[str]], start: str) -> set[str]:
    """Closure by brute-force enumeration of all simple paths."""
    found: set[str] = set()

    def walk(node: str, path: frozenset[str]) -> None:
        for parent in parents.get(node, ()):
            if parent in path:
                continue
            found.add(parent)
            walk(parent, path | {parent})

    walk(start, frozenset([start]))
    return found


# -- seeded-fault fixtures -------------------------------------------------------


def _perturb(kb: KnowledgeBase, mutate) -> KnowledgeBase:
    doc = kb_to_doc(kb)
    mutate(doc)
    return doc_to_kb(doc)


def _two_rock_base() -> KnowledgeBase:
    kb = KnowledgeBase()
    kb.declare_object_kind("Grain")
    kb.declare_quantity_kind("RockA", ["Grain"])
    kb.declare_quantity_kind("RockB", [])
    for i in range(1, 5):
        kb.create_object(f"g{i}", "Grain", 0)
    apply_creation(kb, CreatedEntry.of("qa", "RockA", ["g1", "g2"]), 0)
    apply_creation(kb, CreatedEntry.of("qb", "RockB", ["g3", "g4"]), 1)
    kb.assert_adjacency("g1", "g2", 0)
    kb.assert_adjacency("g3", "g4", 1)
    return kb


def fixture_a1_typing() -> KnowledgeBase:
    def mutate(doc):
        quantity = next(q for q in doc["quantities"] if q["id"] == "qa")
        quantity["granules"] = ["g1", "qb"]
        event = next(e for e in doc["events"] if e["id"] == "create-qa")
        event["created"][0]["granules"] = ["g1", "qb"]

    return _perturb(_two_rock_base(), mutate)


def fixture_supplementation() -> KnowledgeBase:
    def mutate(doc):
        quantity = next(q for q in doc["quantities"] if q["id"] == "qa")
        quantity["granules"] = ["g1"]
        event = next(e for e in doc["events"] if e["id"] == "create-qa")
        event["created"][0]["granules"] = ["g1"]

    return _perturb(_two_rock_base(), mutate)


def fixture_a2_inclusion() -> KnowledgeBase:
    kb = KnowledgeBase()
    kb.declare_object_kind("Molecule")
    kb.declare_quantity_kind("Wine", [])
    kb.declare_quantity_kind("Alcohol", [])
    for i in range(1, 4):
        kb.create_object(f"m{i}", "Molecule", 0)
    apply_creation(kb, CreatedEntry.of("wine", "Wine", ["m1", "m2", "m3"]), 0)
    apply_creation(kb, CreatedEntry.of("alcohol", "Alcohol", ["m1", "m2"]), 1)
    kb.assert_subquantity("alcohol", "wine")
    for a, b in (("m1", "m2"), ("m1", "m3"), ("m2", "m3")):
        kb.assert_adjacency(a, b, 0)

    def mutate(doc):
        quantity = next(q for q in doc["quantities"] if q["id"] == "wine")
        quantity["granules"] = ["m1", "m3"]
        event = next(e for e in doc["events"] if e["id"] == "create-wine")
        event["created"][0]["granules"] = ["m1", "m3"]

    return _perturb(kb, mutate)


def fixture_ggd() -> KnowledgeBase:
    kb = KnowledgeBase()
    kb.declare_object_kind("Grain")
    kb.declare_object_kind("Salt")
    kb.declare_quantity_kind("SaltWater", ["Salt"])
    kb.create_object("g1", "Grain", 0)
    kb.create_object("g2", "Grain", 0)
    apply_creation(kb, CreatedEntry.of("sw", "SaltWater", ["g1", "g2"]), 0)
    kb.assert_adjacency("g1", "g2", 0)
    return kb


def fixture_connectivity() -> KnowledgeBase:
    kb = KnowledgeBase()
    kb.declare_object_kind("Grain")
    kb.declare_quantity_kind("Rock", [])
    for i in range(1, 5):
        kb.create_object(f"g{i}", "Grain", 0)
    apply_creation(kb, CreatedEntry.of("q", "Rock", ["g1", "g2", "g3", "g4"]), 0)
    kb.assert_adjacency("g1", "g2", 0)
    kb.assert_adjacency("g3", "g4", 0)
    return kb


def fixture_external_connection() -> KnowledgeBase:
    kb = KnowledgeBase()
    kb.declare_object_kind("Grain")
    kb.declare_quantity_kind("Rock", [])
    for i in range(1, 4):
        kb.create_object(f"g{i}", "Grain", 0)
    apply_creation(kb, CreatedEntry.of("q", "Rock", ["g1", "g2", "g3"]), 0)
    kb.assert_adjacency("g1", "g2", 0)
    return kb


def fixture_maximality() -> KnowledgeBase:
    kb = KnowledgeBase()
    kb.declare_object_kind("Grain")
    kb.declare_quantity_kind("Rock", [])
    for i in range(1, 5):
        kb.create_object(f"g{i}", "Grain", 0)
    apply_creation(kb, CreatedEntry.of("q1", "Rock", ["g1", "g2"]), 0)
    apply_creation(kb, CreatedEntry.of("q2", "Rock", ["g3", "g4"]), 1)
    kb.assert_adjacency("g1", "g2", 0)
    kb.assert_adjacency("g3", "g4", 1)
    kb.assert_adjacency("g2", "g3", 1)
    return kb


def fixture_h1_history() -> KnowledgeBase:
    def mutate(doc):
        quantity = next(q for q in doc["quantities"] if q["id"] == "qa")
        quantity["terminated_at"] = 5

    return _perturb(_two_rock_base(), mutate)


def fixture_subq_kind_distinct() -> KnowledgeBase:
    kb = KnowledgeBase()
    kb.declare_object_kind("Grain")
    kb.declare_quantity_kind("Rock", [])
    for i in range(1, 5):
        kb.create_object(f"g{i}", "Grain", 0)
    apply_creation(kb, CreatedEntry.of("qa", "Rock", ["g1", "g2", "g3", "g4"]), 0)
    for i, a in enumerate(["g1", "g2", "g3", "g4"]):
        for b in ["g1", "g2", "g3", "g4"][i + 1:]:
            kb.assert_adjacency(a, b, 0)
    apply_transfer(
        kb,
        ["qa"],
        [CreatedEntry.of("qc", "Rock", ["g1", "g2"]), CreatedEntry.of("qd", "Rock", ["g3", "g4"])],
        1,
        event_id="split",
    )
    for a, b in (("g1", "g3"), ("g1", "g4"), ("g2", "g3"), ("g2", "g4")):
        kb.retract_adjacency(a, b, 1)

    def mutate(doc):
        doc["subquantities"].append({"part": "qc", "whole": "qa"})

    return _perturb(kb, mutate)


FAULT_FIXTURES = {
    "A1_TYPING": fixture_a1_typing,
    "SUPPLEMENTATION_MIN2": fixture_supplementation,
    "A2_SUBQUANTITY_INCLUSION": fixture_a2_inclusion,
    "AA1_GGD": fixture_ggd,
    "CONNECTIVITY": fixture_connectivity,
    "EXTERNAL_CONNECTION": fixture_external_connection,
    "MAXIMALITY_SAME_KIND": fixture_maximality,
    "H1_HISTORY": fixture_h1_history,
    "SUBQ_KIND_DISTINCT": fixture_subq_kind_distinct,
}


def single_quantity_graph_kb(n: int, edges: list[tuple[str, str]]) -> KnowledgeBase:
    """A bare KB with one quantity over n granules and the given edges."""
    kb = KnowledgeBase()
    kb.kinds["Grain"] = KindDecl("Grain", OBJECT_KIND)
    kb.kinds["Rock"] = KindDecl("Rock", QUANTITY_KIND, frozenset())
    ids = [f"n{i}" for i in range(n)]
    for oid in ids:
        kb.objects[oid] = ObjectInst(oid, "Grain", 0)
    kb.quantities["q"] = QuantityInst("q", "Rock", 0, frozenset(ids), "e-q")
    for a, b in edges:
        kb.assert_adjacency(a, b, 0)
    return kb


def two_quantity_graph_kb(
    g1: list[str], g2: list[str], edges: list[tuple[str, str]], same_kind: bool = True
) -> KnowledgeBase:
    kb = KnowledgeBase()
    kb.kinds["Grain"] = KindDecl("Grain", OBJECT_KIND)
    kb.kinds["Rock"] = KindDecl("Rock", QUANTITY_KIND, frozenset())
    kb.kinds["Mud"] = KindDecl("Mud", QUANTITY_KIND, frozenset())
    for oid in g1 + g2:
        kb.objects[oid] = ObjectInst(oid, "Grain", 0)
    kb.quantities["qx"] = QuantityInst("qx", "Rock", 0, frozenset(g1), "e-qx")
    kb.quantities["qy"] = QuantityInst(
        "qy", "Rock" if same_kind else "Mud", 0, frozenset(g2), "e-qy"
    )
    for a, b in edges:
        kb.assert_adjacency(a, b, 0)
    return kb
