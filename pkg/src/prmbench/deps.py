"""Probabilistic dependency structure over a relational schema.

The structure is built in two phases. First a DAG is laid over the
attributes: one independent sub-DAG per class, then inter-class edges drawn
between attributes of different classes, each accepted only if the combined
graph stays acyclic and enough are kept to tie every class component into
one weakly connected whole. Second, each inter-class dependency is annotated
with a slot chain drawn from all schema paths between the two classes, with
weights that decay in chain length, plus an aggregator when the chain is
multi-valued.

Slot chains compose reference slots (owner to referenced class) and inverse
slots (referenced back to owners, one-to-many). A chain is multi-valued as
soon as it crosses one inverse slot. Chains are simplified by repeatedly
dropping a trailing (inverse(s), s) pair, and chain enumeration deduplicates
candidates by their simplified form, keeping the shorter representative.
"""

from __future__ import annotations

import itertools
import logging
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from .dag import Dag, generate_random_dag
from .schema import GenerationPolicy, ReferenceSlot, RelationalSchema, poisson_inverse

__all__ = [
    "AGGREGATORS",
    "AttributeNode",
    "Cpd",
    "Dependency",
    "DependencyStructure",
    "GenerationError",
    "Prm",
    "Slot",
    "SlotChain",
    "assign_slot_chains",
    "canonical_parent_order",
    "draw_slot_chain",
    "enumerate_slot_chains",
    "generate_cpds",
    "generate_dependency_structure",
    "simplify_slot_chain",
    "slot_chain_weights",
]

log = logging.getLogger(__name__)

AGGREGATORS: tuple[str, ...] = ("MODE",)


class GenerationError(RuntimeError):
    """Structure generation could not satisfy its postconditions."""


@dataclass(frozen=True)
class Slot:
    """One traversal step: a reference slot taken forward or inverted."""

    base: ReferenceSlot
    inverted: bool = False

    @property
    def start_class(self) -> int:
        return self.base.referenced_class if self.inverted else self.base.owner_class

    @property
    def end_class(self) -> int:
        return self.base.owner_class if self.inverted else self.base.referenced_class

    @property
    def token(self) -> str:
        return ("~" + self.base.name) if self.inverted else self.base.name


@dataclass(frozen=True)
class SlotChain:
    """A composable sequence of slots; empty chains stay within one class."""

    source_class: int
    slots: tuple[Slot, ...] = ()

    def __post_init__(self):
        at = self.source_class
        for slot in self.slots:
            if slot.start_class != at:
                raise ValueError(
                    f"slot {slot.token} starts at class {slot.start_class}, "
                    f"expected {at}"
                )
            at = slot.end_class

    @property
    def length(self) -> int:
        return len(self.slots)

    @property
    def end_class(self) -> int:
        return self.slots[-1].end_class if self.slots else self.source_class

    @property
    def is_multi_valued(self) -> bool:
        # Forward slots are to-one; any inverse step fans out.
        return any(s.inverted for s in self.slots)

    @property
    def text(self) -> str:
        return "/".join(s.token for s in self.slots)


@dataclass(frozen=True)
class AttributeNode:
    class_index: int
    attribute_index: int


@dataclass(frozen=True)
class Dependency:
    """child depends on parent, reached through slot_chain from child's class."""

    child: AttributeNode
    parent: AttributeNode
    slot_chain: SlotChain | None = None
    aggregator: str | None = None


@dataclass(frozen=True)
class DependencyStructure:
    dependencies: tuple[Dependency, ...]
    attr_counts: tuple[int, ...]
    k_max: int | None = None

    def attribute_dag(self) -> Dag:
        """Flat attribute-level DAG (edges parent -> child)."""
        offsets = [0]
        for c in self.attr_counts:
            offsets.append(offsets[-1] + c)

        def flat(node: AttributeNode) -> int:
            return offsets[node.class_index] + node.attribute_index

        edges = frozenset(
            (flat(d.parent), flat(d.child)) for d in self.dependencies
        )
        return Dag(max(offsets[-1], 1), edges)

    def parents_of(self, node: AttributeNode) -> tuple[Dependency, ...]:
        return canonical_parent_order(
            d for d in self.dependencies if d.child == node
        )


def canonical_parent_order(deps) -> tuple[Dependency, ...]:
    """Stable parent ordering shared by CPDs, grounding, and scoring."""

    def key(d: Dependency):
        chain = d.slot_chain
        return (
            d.parent.class_index,
            d.parent.attribute_index,
            chain.length if chain is not None else -1,
            chain.text if chain is not None else "",
        )

    return tuple(sorted(deps, key=key))


@dataclass(frozen=True)
class Cpd:
    """Categorical CPD table: parent state configuration -> child distribution."""

    child: AttributeNode
    parent_order: tuple[Dependency, ...]
    table: dict[tuple[int, ...], tuple[float, ...]]


@dataclass(frozen=True)
class Prm:
    schema: RelationalSchema
    structure: DependencyStructure
    cpds: tuple[Cpd, ...]
    k_max: int

    def __post_init__(self):
        expected = [
            AttributeNode(ci, ai)
            for ci, cls in enumerate(self.schema.classes)
            for ai in range(len(cls.attributes))
        ]
        got = [c.child for c in self.cpds]
        if got != expected:
            raise ValueError("exactly one CPD per descriptive attribute required")
        for cpd in self.cpds:
            if cpd.parent_order != self.structure.parents_of(cpd.child):
                raise ValueError(
                    f"CPD parent order out of sync for {cpd.child}"
                )

    def cpd_for(self, node: AttributeNode) -> Cpd:
        return self._cpd_index[node]

    @property
    def _cpd_index(self) -> dict[AttributeNode, Cpd]:
        idx = self.__dict__.get("_cpd_index_cache")
        if idx is None:
            idx = {c.child: c for c in self.cpds}
            self.__dict__["_cpd_index_cache"] = idx
        return idx


# --- structure generation ---------------------------------------------------

_MAX_CONNECT_RETRIES = 500
_MAX_PAIR_TRIES = 100


def _flat_offsets(attr_counts):
    offsets = [0]
    for c in attr_counts:
        offsets.append(offsets[-1] + c)
    return offsets


def _reaches_flat(adj: list[int], src: int, dst: int) -> bool:
    dst_bit = 1 << dst
    seen = 0
    frontier = adj[src]
    while frontier:
        if frontier & dst_bit:
            return True
        seen |= frontier
        nxt = 0
        m = frontier
        while m:
            b = m & -m
            m ^= b
            nxt |= adj[b.bit_length() - 1]
        frontier = nxt & ~seen
    return False


def generate_dependency_structure(
    schema: RelationalSchema,
    policy: GenerationPolicy | None = None,
    rng: np.random.Generator | None = None,
) -> DependencyStructure:
    """Build the attribute DAG: per-class sub-DAGs plus inter-class edges.

    Chains are left unassigned (``slot_chain is None``); call
    :func:`assign_slot_chains` next. The inter-class edge count is drawn
    from ``1 + Poisson(N-1)``; the whole inter-class phase is redrawn until
    the class components end up weakly connected.
    """
    policy = policy or GenerationPolicy()
    rng = policy.resolve_rng(rng)
    n_classes = len(schema.classes)
    attr_counts = tuple(len(c.attributes) for c in schema.classes)
    offsets = _flat_offsets(attr_counts)
    total = offsets[-1]

    intra: list[Dependency] = []
    adj_intra = [0] * total  # flat children bitmasks, edge parent -> child
    for ci, count in enumerate(attr_counts):
        sub = generate_random_dag(count, policy.dag_policy, rng)
        for a, b in sub.sorted_edges:
            intra.append(
                Dependency(
                    child=AttributeNode(ci, b),
                    parent=AttributeNode(ci, a),
                )
            )
            adj_intra[offsets[ci] + a] |= 1 << (offsets[ci] + b)

    inter: list[Dependency] = []
    if n_classes > 1:
        class_of = [ci for ci, c in enumerate(attr_counts) for _ in range(c)]
        for _retry in range(_MAX_CONNECT_RETRIES):
            adj = adj_intra.copy()
            candidates: list[tuple[int, int]] = []
            target = 1 + poisson_inverse(n_classes - 1, rng)
            for _ in range(target):
                for _try in range(_MAX_PAIR_TRIES):
                    child = int(rng.integers(total))
                    parent = int(rng.integers(total))
                    if class_of[child] == class_of[parent]:
                        continue
                    if adj[parent] >> child & 1:
                        continue
                    if _reaches_flat(adj, child, parent):
                        continue  # parent -> child would close a cycle
                    adj[parent] |= 1 << child
                    candidates.append((parent, child))
                    break
            linked: dict[int, int] = {i: i for i in range(n_classes)}

            def find(x: int) -> int:
                while linked[x] != x:
                    linked[x] = linked[linked[x]]
                    x = linked[x]
                return x

            for p, c in candidates:
                linked[find(class_of[p])] = find(class_of[c])
            if len({find(i) for i in range(n_classes)}) == 1:
                break
        else:
            raise GenerationError(
                "could not connect class components with inter-class "
                f"dependencies after {_MAX_CONNECT_RETRIES} attempts"
            )
        for p, c in candidates:
            pc, pa = class_of[p], p - offsets[class_of[p]]
            cc, ca = class_of[c], c - offsets[class_of[c]]
            inter.append(
                Dependency(child=AttributeNode(cc, ca), parent=AttributeNode(pc, pa))
            )

    return DependencyStructure(
        dependencies=tuple(intra + inter), attr_counts=attr_counts
    )


# --- slot chains -------------------------------------------------------------


def simplify_slot_chain(chain: SlotChain) -> SlotChain:
    """Drop trailing (inverse(s), s) pairs until none remains.

    A trailing pair that leaves a class through an inverse slot and comes
    straight back through the same slot resolves to the same object set, so
    the shorter chain is the canonical representative.
    """
    slots = list(chain.slots)
    while (
        len(slots) >= 2
        and slots[-2].inverted
        and not slots[-1].inverted
        and slots[-2].base == slots[-1].base
    ):
        del slots[-2:]
    return SlotChain(chain.source_class, tuple(slots))


def _slot_steps(schema: RelationalSchema) -> list[tuple[Slot, ...]]:
    """Per class, the outgoing traversal steps in a deterministic order."""
    steps: list[list[Slot]] = [[] for _ in schema.classes]
    for cls in schema.classes:
        for slot in cls.reference_slots:
            steps[slot.owner_class].append(Slot(slot, inverted=False))
            steps[slot.referenced_class].append(Slot(slot, inverted=True))
    return [tuple(s) for s in steps]


def enumerate_slot_chains(
    schema: RelationalSchema, from_class: int, to_class: int, k_max: int
) -> tuple[SlotChain, ...]:
    """All chains of length 0..k_max from one class to another.

    Breadth-first over the slot graph; the result is deduplicated by
    simplified form (keeping the shorter representative) and ordered by
    (length, text) so downstream draws are reproducible.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    n = len(schema.classes)
    if not (0 <= from_class < n and 0 <= to_class < n):
        raise ValueError("class index out of range")

    steps = _slot_steps(schema)
    found: dict[str, SlotChain] = {}
    frontier: list[tuple[int, tuple[Slot, ...]]] = [(from_class, ())]
    for length in range(k_max + 1):
        for at, path in frontier:
            if at == to_class:
                chain = simplify_slot_chain(SlotChain(from_class, path))
                found.setdefault(chain.text, chain)
        if length == k_max:
            break
        frontier = [
            (slot.end_class, path + (slot,))
            for at, path in frontier
            for slot in steps[at]
        ]
    return tuple(sorted(found.values(), key=lambda c: (c.length, c.text)))


def slot_chain_weights(chains) -> np.ndarray:
    """Normalized weights exp(-l / occ(l)) over candidate chains of length l."""
    chains = list(chains)
    if not chains:
        raise ValueError("no candidate slot chains")
    occ = Counter(c.length for c in chains)
    raw = np.array([np.exp(-c.length / occ[c.length]) for c in chains])
    return raw / raw.sum()


def draw_slot_chain(chains, rng: np.random.Generator) -> SlotChain:
    chains = list(chains)
    weights = slot_chain_weights(chains)
    idx = int(np.searchsorted(np.cumsum(weights), rng.random(), side="right"))
    return chains[min(idx, len(chains) - 1)]


def assign_slot_chains(
    schema: RelationalSchema,
    structure: DependencyStructure,
    k_max: int,
    rng: np.random.Generator | None = None,
    aggregators: tuple[str, ...] = AGGREGATORS,
) -> DependencyStructure:
    """Annotate every dependency with a slot chain and, if needed, an aggregator.

    The effective horizon is ``max(k_max, N - 1)`` so classes joined only by
    a long referential path are still reachable. Intra-class dependencies
    bind the empty chain directly; inter-class ones draw from the weighted
    candidate list. A dependency whose classes admit no chain within the
    horizon is dropped with a logged diagnostic (unreachable for connected
    schemas at the default horizon).
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    if not aggregators:
        raise ValueError("aggregator list must not be empty")
    rng = rng if rng is not None else np.random.default_rng()
    k_eff = max(k_max, len(schema.classes) - 1)

    cand_cache: dict[tuple[int, int], tuple[SlotChain, ...]] = {}
    assigned: list[Dependency] = []
    for dep in structure.dependencies:
        if dep.child.class_index == dep.parent.class_index:
            assigned.append(
                replace(dep, slot_chain=SlotChain(dep.child.class_index), aggregator=None)
            )
            continue
        endpoints = (dep.child.class_index, dep.parent.class_index)
        cands = cand_cache.get(endpoints)
        if cands is None:
            cands = enumerate_slot_chains(schema, *endpoints, k_eff)
            cand_cache[endpoints] = cands
        if not cands:
            log.warning(
                "dropping dependency %s <- %s: no slot chain within k_max=%d",
                dep.child, dep.parent, k_eff,
            )
            continue
        chain = draw_slot_chain(cands, rng)
        aggregator = None
        if chain.is_multi_valued:
            aggregator = aggregators[int(rng.integers(len(aggregators)))]
        assigned.append(replace(dep, slot_chain=chain, aggregator=aggregator))
    return replace(structure, dependencies=tuple(assigned), k_max=k_eff)


# --- CPDs --------------------------------------------------------------------


def generate_cpds(
    schema: RelationalSchema,
    structure: DependencyStructure,
    dirichlet_alpha: float = 1.0,
    rng: np.random.Generator | None = None,
) -> Prm:
    """Draw one symmetric-Dirichlet row per parent configuration."""
    if dirichlet_alpha <= 0:
        raise ValueError("dirichlet_alpha must be positive")
    if structure.k_max is None or any(
        d.slot_chain is None for d in structure.dependencies
    ):
        raise ValueError("assign slot chains before generating CPDs")
    rng = rng if rng is not None else np.random.default_rng()

    cpds: list[Cpd] = []
    for ci, cls in enumerate(schema.classes):
        for ai, attr in enumerate(cls.attributes):
            node = AttributeNode(ci, ai)
            parents = structure.parents_of(node)
            sizes = [
                len(schema.attribute(d.parent.class_index, d.parent.attribute_index).domain)
                for d in parents
            ]
            alphas = np.full(len(attr.domain), dirichlet_alpha)
            table = {
                config: tuple(float(x) for x in rng.dirichlet(alphas))
                for config in itertools.product(*(range(s) for s in sizes))
            }
            cpds.append(Cpd(child=node, parent_order=parents, table=table))
    return Prm(
        schema=schema, structure=structure, cpds=tuple(cpds), k_max=structure.k_max
    )
