"""Grounding a PRM over a skeleton and forward-sampling a dataset.

The ground network has one node per (object, descriptive attribute). Each
PRM dependency is instantiated per object by resolving its slot chain on the
skeleton: single-valued chains contribute one parent node, multi-valued ones
contribute an aggregate over however many nodes the chain reaches (possibly
none; an empty aggregate reads as state 0). Sampling walks the node-level
topological order and draws each node from its CPD row, so the dataset
realizes both the referential structure and the probabilistic one.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .deps import Prm, SlotChain
from .schema import RelationalSchema, ReferenceSlot
from .skeleton import ObjectRef, RelationalSkeleton

__all__ = [
    "AggregateParent",
    "Dataset",
    "ClassTable",
    "GbnNode",
    "GroundBayesianNetwork",
    "GroundingError",
    "aggregate_mode",
    "forward_sample",
    "ground",
    "resolve_slot_chain",
    "skeleton_from_dataset",
]


class GroundingError(RuntimeError):
    """An internal invariant failed while grounding (should be unreachable)."""


def resolve_slot_chain(
    sk: RelationalSkeleton, start: ObjectRef, chain: SlotChain
) -> frozenset[ObjectRef]:
    """Objects reached from ``start`` by walking the chain; set semantics."""
    if start.class_index != chain.source_class:
        raise ValueError(
            f"start object of class {start.class_index} does not match "
            f"chain source {chain.source_class}"
        )
    current = {start}
    for slot in chain.slots:
        if slot.inverted:
            cls = slot.base.owner_class
            current = {
                ObjectRef(cls, owner_id)
                for obj in current
                for owner_id in sk.referrers(slot.base, obj.object_id)
            }
        else:
            current = {sk.target_of(obj, slot.base) for obj in current}
    return frozenset(current)


def aggregate_mode(values, domain_size: int) -> int:
    """Most frequent state; ties break to the lowest index, empty input to 0."""
    if domain_size < 2:
        raise ValueError("domain_size must be >= 2")
    counts = [0] * domain_size
    for v in values:
        counts[v] += 1
    best = 0
    for i in range(1, domain_size):
        if counts[i] > counts[best]:
            best = i
    return best


_AGGREGATE_FUNCS = {"MODE": aggregate_mode}


@dataclass(frozen=True)
class AggregateParent:
    aggregator: str
    contributing: tuple[int, ...]  # node ids, possibly empty
    domain_size: int


@dataclass(frozen=True)
class GbnNode:
    object: ObjectRef
    attribute_index: int
    # One entry per CPD parent slot, aligned with the CPD's parent order:
    # either a plain node id or an aggregate over several node ids.
    parents: tuple[int | AggregateParent, ...]


@dataclass(frozen=True)
class GroundBayesianNetwork:
    prm: Prm
    skeleton: RelationalSkeleton
    nodes: tuple[GbnNode, ...]
    order: tuple[int, ...]  # cached topological order over node ids

    def node_id(self, obj: ObjectRef, attribute_index: int) -> int:
        return self._offsets[obj.class_index] + obj.object_id * self._attr_counts[
            obj.class_index
        ] + attribute_index

    @cached_property
    def _attr_counts(self) -> tuple[int, ...]:
        return tuple(len(c.attributes) for c in self.prm.schema.classes)

    @cached_property
    def _offsets(self) -> tuple[int, ...]:
        offsets = [0]
        for ci, count in enumerate(self.skeleton.object_counts):
            offsets.append(offsets[-1] + count * self._attr_counts[ci])
        return tuple(offsets)


def ground(prm: Prm, sk: RelationalSkeleton) -> GroundBayesianNetwork:
    """Instantiate the PRM per object; verifies the node graph is acyclic."""
    schema = prm.schema
    attr_counts = [len(c.attributes) for c in schema.classes]
    offsets = [0]
    for ci, count in enumerate(sk.object_counts):
        offsets.append(offsets[-1] + count * attr_counts[ci])

    def node_id(ci: int, oid: int, ai: int) -> int:
        return offsets[ci] + oid * attr_counts[ci] + ai

    parents_by_attr: dict[tuple[int, int], tuple] = {}
    for cpd in prm.cpds:
        parents_by_attr[(cpd.child.class_index, cpd.child.attribute_index)] = (
            cpd.parent_order
        )

    nodes: list[GbnNode] = []
    for ci in range(len(schema.classes)):
        for oid in range(sk.object_counts[ci]):
            obj = ObjectRef(ci, oid)
            resolved_cache: dict[str, frozenset[ObjectRef]] = {}
            for ai in range(attr_counts[ci]):
                entries: list[int | AggregateParent] = []
                for dep in parents_by_attr[(ci, ai)]:
                    chain = dep.slot_chain
                    key = chain.text
                    targets = resolved_cache.get(key)
                    if targets is None:
                        targets = resolve_slot_chain(sk, obj, chain)
                        resolved_cache[key] = targets
                    pa, pi = dep.parent.class_index, dep.parent.attribute_index
                    ids = sorted(node_id(pa, t.object_id, pi) for t in targets)
                    if chain.is_multi_valued:
                        domain = len(schema.attribute(pa, pi).domain)
                        entries.append(
                            AggregateParent(dep.aggregator, tuple(ids), domain)
                        )
                    else:
                        if len(ids) != 1:
                            raise GroundingError(
                                f"single-valued chain {chain.text!r} resolved to "
                                f"{len(ids)} objects"
                            )
                        entries.append(ids[0])
                nodes.append(GbnNode(obj, ai, tuple(entries)))

    order = _node_topological_order(nodes)
    return GroundBayesianNetwork(prm=prm, skeleton=sk, nodes=tuple(nodes), order=order)


def _node_topological_order(nodes) -> tuple[int, ...]:
    n = len(nodes)
    indeg = [0] * n
    children: list[list[int]] = [[] for _ in range(n)]
    for nid, node in enumerate(nodes):
        for entry in node.parents:
            if isinstance(entry, AggregateParent):
                for pid in entry.contributing:
                    children[pid].append(nid)
                    indeg[nid] += 1
            else:
                children[entry].append(nid)
                indeg[nid] += 1
    ready = deque(i for i in range(n) if indeg[i] == 0)
    order: list[int] = []
    while ready:
        u = ready.popleft()
        order.append(u)
        for v in children[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)
    if len(order) != n:
        raise GroundingError("ground network contains a directed cycle")
    return tuple(order)


@dataclass(frozen=True)
class ClassTable:
    """Sampled tuples of one class: ids, foreign keys, attribute states."""

    class_index: int
    row_count: int
    fk_values: dict[str, tuple[int, ...]]  # slot name -> target id per row
    attr_values: tuple[tuple[int, ...], ...]  # per attribute, state per row


@dataclass(frozen=True)
class Dataset:
    schema: RelationalSchema
    tables: tuple[ClassTable, ...]

    @property
    def total_rows(self) -> int:
        return sum(t.row_count for t in self.tables)


def forward_sample(
    gbn: GroundBayesianNetwork, rng: np.random.Generator | None = None
) -> Dataset:
    """Sample every node in topological order, then package per-class tables."""
    rng = rng if rng is not None else np.random.default_rng()
    prm = gbn.prm
    schema = prm.schema
    nodes = gbn.nodes
    states = [0] * len(nodes)

    cpd_by_attr = {
        (c.child.class_index, c.child.attribute_index): c for c in prm.cpds
    }
    for nid in gbn.order:
        node = nodes[nid]
        cpd = cpd_by_attr[(node.object.class_index, node.attribute_index)]
        config = []
        for entry in node.parents:
            if isinstance(entry, AggregateParent):
                func = _AGGREGATE_FUNCS[entry.aggregator]
                config.append(
                    func((states[p] for p in entry.contributing), entry.domain_size)
                )
            else:
                config.append(states[entry])
        probs = cpd.table[tuple(config)]
        u = rng.random()
        acc = 0.0
        state = len(probs) - 1
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                state = i
                break
        states[nid] = state

    sk = gbn.skeleton
    tables = []
    for ci, cls in enumerate(schema.classes):
        count = sk.object_counts[ci]
        fk_values = {
            slot.name: tuple(
                sk.target_of(ObjectRef(ci, oid), slot).object_id
                for oid in range(count)
            )
            for slot in cls.reference_slots
        }
        attr_values = tuple(
            tuple(
                states[gbn.node_id(ObjectRef(ci, oid), ai)] for oid in range(count)
            )
            for ai in range(len(cls.attributes))
        )
        tables.append(
            ClassTable(
                class_index=ci,
                row_count=count,
                fk_values=fk_values,
                attr_values=attr_values,
            )
        )
    return Dataset(schema=schema, tables=tuple(tables))


def skeleton_from_dataset(dataset: Dataset) -> RelationalSkeleton:
    """Rebuild the link structure carried by a dataset's foreign keys."""
    schema = dataset.schema
    links: dict[tuple[ObjectRef, ReferenceSlot], ObjectRef] = {}
    for table in dataset.tables:
        cls = schema.classes[table.class_index]
        for slot in cls.reference_slots:
            targets = table.fk_values[slot.name]
            for oid, tid in enumerate(targets):
                links[(ObjectRef(table.class_index, oid), slot)] = ObjectRef(
                    slot.referenced_class, tid
                )
    return RelationalSkeleton(
        object_counts=tuple(t.row_count for t in dataset.tables),
        links=links,
    )
