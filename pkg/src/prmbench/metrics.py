"""Structure scoring and dataset diagnostics.

The score is a relational Bayesian-Dirichlet marginal likelihood with a
slot-chain-length penalty: per attribute family and parent configuration,
log DM({C[v,u]}, {alpha[v,u]}) summed, minus the total chain length of the
family's parents once per configuration. DM is the Dirichlet-multinomial
ratio Gamma(sum a) / Gamma(sum a+C) * prod Gamma(a+C) / Gamma(a), evaluated
in log space throughout. The per-configuration penalty follows the score
definition literally; ``penalty_per_config=False`` switches to charging each
family's chains once, the convention elsewhere in the literature.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass

from scipy.special import gammaln

from .deps import AttributeNode, DependencyStructure, Prm
from .gbn import Dataset, aggregate_mode, resolve_slot_chain, skeleton_from_dataset
from .skeleton import ObjectRef, RelationalSkeleton

__all__ = [
    "ContingencyCounts",
    "DirichletPrior",
    "count_contingencies",
    "marginal_report",
    "rbd_family_scores",
    "rbd_score",
    "render_report",
]


@dataclass(frozen=True)
class DirichletPrior:
    """Symmetric pseudo-count per cell."""

    alpha: float = 1.0


@dataclass(frozen=True)
class ContingencyCounts:
    """Per attribute family: parent configuration -> per-state counts."""

    families: dict[AttributeNode, dict[tuple[int, ...], list[int]]]

    def family(self, node: AttributeNode) -> dict[tuple[int, ...], list[int]]:
        return self.families[node]


def _parent_value(dataset, skeleton, dep, obj):
    """Evaluate one parent of ``obj`` on the sampled data."""
    targets = resolve_slot_chain(skeleton, obj, dep.slot_chain)
    column = dataset.tables[dep.parent.class_index].attr_values[
        dep.parent.attribute_index
    ]
    if dep.slot_chain.is_multi_valued:
        domain = len(
            dataset.schema.attribute(
                dep.parent.class_index, dep.parent.attribute_index
            ).domain
        )
        return aggregate_mode((column[t.object_id] for t in targets), domain)
    (target,) = targets
    return column[target.object_id]


def count_contingencies(
    dataset: Dataset,
    skeleton: RelationalSkeleton,
    structure: DependencyStructure,
) -> ContingencyCounts:
    """Tally child states against evaluated parent configurations.

    Every configuration in the full parent product appears, so zero rows are
    explicit and the score's configuration sums are well defined.
    """
    schema = dataset.schema
    if tuple(len(c.attributes) for c in schema.classes) != structure.attr_counts:
        raise ValueError("dataset schema does not match the dependency structure")
    families: dict[AttributeNode, dict[tuple[int, ...], list[int]]] = {}
    for ci, cls in enumerate(schema.classes):
        table = dataset.tables[ci]
        for ai, attr in enumerate(cls.attributes):
            node = AttributeNode(ci, ai)
            parents = structure.parents_of(node)
            sizes = [
                len(schema.attribute(d.parent.class_index, d.parent.attribute_index).domain)
                for d in parents
            ]
            counts = {
                config: [0] * len(attr.domain)
                for config in itertools.product(*(range(s) for s in sizes))
            }
            child_col = table.attr_values[ai]
            for oid in range(table.row_count):
                obj = ObjectRef(ci, oid)
                config = tuple(
                    _parent_value(dataset, skeleton, d, obj) for d in parents
                )
                counts[config][child_col[oid]] += 1
            families[node] = counts
    return ContingencyCounts(families)


def rbd_family_scores(
    structure: DependencyStructure,
    counts: ContingencyCounts,
    prior: DirichletPrior | None = None,
    penalty_per_config: bool = True,
) -> dict[AttributeNode, float]:
    """Per-family score terms; the total score is their sum."""
    prior = prior or DirichletPrior()
    if prior.alpha <= 0:
        raise ValueError("prior pseudo-counts must be positive")
    a = prior.alpha
    scores: dict[AttributeNode, float] = {}
    for node, table in counts.families.items():
        chain_total = sum(
            d.slot_chain.length for d in structure.parents_of(node)
        )
        total = 0.0
        for row in table.values():
            k = len(row)
            n = sum(row)
            log_dm = gammaln(k * a) - gammaln(k * a + n)
            for c in row:
                log_dm += gammaln(a + c) - gammaln(a)
            total += float(log_dm)
            if penalty_per_config:
                total -= chain_total
        if not penalty_per_config:
            total -= chain_total
        scores[node] = total
    return scores


def rbd_score(
    structure: DependencyStructure,
    counts: ContingencyCounts,
    prior: DirichletPrior | None = None,
    penalty_per_config: bool = True,
) -> float:
    return sum(
        rbd_family_scores(structure, counts, prior, penalty_per_config).values()
    )


def marginal_report(dataset: Dataset, prm: Prm) -> dict[str, float | int]:
    """Diagnostics: parentless-marginal L1 gaps, indegree stats, empty aggregates."""
    schema = dataset.schema
    out: dict[str, float | int] = {"rows.total": dataset.total_rows}
    skeleton = skeleton_from_dataset(dataset)

    for cpd in prm.cpds:
        ci, ai = cpd.child.class_index, cpd.child.attribute_index
        cls = schema.classes[ci]
        name = f"{cls.name}.{cls.attributes[ai].name}"
        table = dataset.tables[ci]
        out[f"rows.{cls.name}"] = table.row_count
        if cpd.parent_order:
            continue
        domain = len(cls.attributes[ai].domain)
        row = cpd.table[()]
        n = table.row_count
        if n == 0:
            continue
        freq = Counter(table.attr_values[ai])
        l1 = sum(abs(freq.get(v, 0) / n - row[v]) for v in range(domain))
        out[f"marginal_l1.{name}"] = round(l1, 6)

    for ci, cls in enumerate(schema.classes):
        indeg = Counter()
        for (owner, slot), target in skeleton.links.items():
            if target.class_index == ci:
                indeg[target.object_id] += 1
        if indeg:
            out[f"indegree_max.{cls.name}"] = max(indeg.values())
            out[f"indegree_mean.{cls.name}"] = round(
                sum(indeg.values()) / dataset.tables[ci].row_count, 6
            )

    empty_aggregates = 0
    for dep in prm.structure.dependencies:
        if dep.slot_chain is None or not dep.slot_chain.is_multi_valued:
            continue
        ci = dep.child.class_index
        for oid in range(dataset.tables[ci].row_count):
            if not resolve_slot_chain(skeleton, ObjectRef(ci, oid), dep.slot_chain):
                empty_aggregates += 1
    out["empty_aggregate_events"] = empty_aggregates
    return out


def render_report(report: dict[str, float | int]) -> str:
    """Key = value lines, sorted, one per diagnostic."""
    return "\n".join(f"{k} = {report[k]}" for k in sorted(report)) + "\n"
