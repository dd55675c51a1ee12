"""Operator priorities: merging per-DSL partial orders into one total order."""

from dataclasses import dataclass
from typing import (
    Dict,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

import networkx as nx

from .exceptions import (
    CtxValueError,
    PriorityCycleError,
)
from .syntax import (
    PriorityDecl,
    QName,
)


BOTTOM = QName(("__bottom__",))

PriorityEdge = Tuple[QName, QName]


@dataclass(frozen=True)
class PriorityOrder:
    """Total order over priority names. ``rank[BOTTOM]`` is 0."""

    rank: Mapping[QName, int]

    def rank_of(self, name: QName) -> int:
        try:
            return self.rank[name]
        except KeyError:
            raise CtxValueError(f"unknown operator priority {name}")

    def min_rank(self, owner: Optional[QName], annotation: Optional[QName]) -> int:
        """Lowest rank an operand slot admits.

        An annotated slot ``[q]`` admits rank(q) and above; an unannotated slot of an operator with
        priority p admits ranks strictly above p; an operator without priority imposes no bound.
        Priorities of DSLs outside this order (operators in effect without an import) count as none.
        """
        if annotation is not None and annotation in self.rank:
            return self.rank[annotation]
        if annotation is None and owner is not None and owner in self.rank:
            return self.rank[owner] + 1
        return 0

    def admits(self, min_rank: int, candidate: Optional[QName]) -> bool:
        """Unranked candidates (no declared priority, or one outside this order) are admitted everywhere."""
        return candidate is None or candidate not in self.rank or self.rank[candidate] >= min_rank


EMPTY_ORDER = PriorityOrder({BOTTOM: 0})


def priority_graph(
    dsl_priorities: Sequence[Tuple[str, PriorityDecl]],
    import_constraints: Sequence[PriorityEdge] = (),
) -> "nx.DiGraph":
    """Build the priority graph. Every node records its (import index, declaration index)."""
    graph = nx.DiGraph()
    graph.add_node(BOTTOM, order=(-1, -1))
    for i, (owner, decl) in enumerate(dsl_priorities):
        for j, name in enumerate(decl.names):
            node = QName((owner, name))
            if node not in graph:
                graph.add_node(node, order=(i, j))
                graph.add_edge(BOTTOM, node)

    def add_edge(lo: QName, hi: QName) -> None:
        for end in (lo, hi):
            if end not in graph:
                raise CtxValueError(f"unknown operator priority {end}")
        graph.add_edge(lo, hi)

    for owner, decl in dsl_priorities:
        for lo, hi in decl.constraints:
            add_edge(lo.qualify(owner), hi.qualify(owner))
    for lo, hi in import_constraints:
        add_edge(lo, hi)
    return graph


def merge(
    dsl_priorities: Sequence[Tuple[str, PriorityDecl]],
    import_constraints: Sequence[PriorityEdge] = (),
) -> PriorityOrder:
    """Merge the priorities of the imported DSLs and the import-site constraints.

    Args:
        dsl_priorities: ``(owning class, PriorityDecl)`` pairs in import order
        import_constraints: qualified ``(lo, hi)`` pairs from import declarations

    Returns:
        PriorityOrder: a linear extension of every declared edge; ties are broken by import order,
        then declaration order

    Raises:
        PriorityCycleError: if the constraints are cyclic
        CtxValueError: if a constraint names an unknown priority
    """
    graph = priority_graph(dsl_priorities, import_constraints)
    try:
        cycle = nx.find_cycle(graph)
    except nx.NetworkXNoCycle:
        cycle = []
    if cycle:
        names = [str(lo) for lo, _ in cycle]
        raise PriorityCycleError(names + [names[0]])

    orders = nx.get_node_attributes(graph, "order")
    ranked = nx.lexicographical_topological_sort(graph, key=lambda node: orders[node])
    rank: Dict[QName, int] = {node: i for i, node in enumerate(ranked)}
    return PriorityOrder(rank)


def operand_admits(
    order: PriorityOrder,
    slot: Tuple[Optional[QName], Optional[QName]],
    candidate_priority: Optional[QName],
) -> bool:
    """Decide whether an operator of ``candidate_priority`` may fill an operand slot.

    Args:
        order: merged priority order
        slot: ``(operator priority, operand annotation)`` of the slot's owner
        candidate_priority: priority of the candidate operator, or None when it has none
    """
    owner, annotation = slot
    return order.admits(order.min_rank(owner, annotation), candidate_priority)
