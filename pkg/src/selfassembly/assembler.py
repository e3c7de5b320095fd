"""The assembly engine.

Assembly proceeds in three stages:

1. :func:`build_binding_graph` floods requests from the starting services
   along the template's type pairs, recording every allowed binding and
   measuring each traversed link, as if every constraint asked for all
   available targets.
2. :func:`enumerate_candidates` applies the structural constraints: for one
   starting service it enumerates every subgraph in which each included
   node picks exactly the required number of its targets (all of them for
   an ALL constraint), and sorts the candidates by worst-path time.
3. :func:`select_assembly` walks combinations of one candidate per start
   (an odometer over the sorted lists, rightmost start varying fastest) and
   commits the first whose deduplicated union keeps every service's
   distinct inbound bindings within its threshold.

The search is exhaustive but capped: it settles for the first feasible
combination rather than a globally optimal one, which the ascending sort
keeps near-optimal in practice.
"""
from __future__ import annotations

import math
from collections import Counter, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations, product
from typing import Iterable, Mapping, Sequence

from .errors import (
    CombinationBudgetExceeded,
    DomainError,
    Infeasible,
    InsufficientServices,
    NoStartingService,
    TemplateInvalid,
)
from .model import (
    AllServices,
    ApplicationTemplate,
    AssemblyGraph,
    Constraint,
    QoSMatrix,
    ServiceDescriptor,
    service_map,
    validate_template,
    worst_path_time,
)
from .netsim import Simulator

DEFAULT_COMBINATION_BUDGET = 10_000_000


def count_combinations(n: int, k: Constraint) -> int:
    """Number of ways to pick ``k`` of ``n`` available targets.

    ``ALL`` admits exactly one choice.  Raises :class:`DomainError` outside
    ``0 <= k <= n``.
    """
    if isinstance(k, AllServices):
        return 1
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    if k < 0 or k > n:
        raise DomainError(f"k must satisfy 0 <= k <= n, got k={k}, n={n}")
    return math.comb(n, k)


@dataclass(frozen=True, slots=True)
class CandidateSubgraph:
    """One structurally compliant subgraph for a start, with its cost.

    ``edges`` is kept as a sorted tuple (the tie-break key for equal
    costs); ``rank`` is the position after sorting all candidates of the
    same start by ascending cost.
    """

    start_id: str
    edges: tuple[tuple[str, str], ...]
    cost: float
    rank: int

    @property
    def nodes(self) -> frozenset[str]:
        out = {self.start_id}
        for a, b in self.edges:
            out.add(a)
            out.add(b)
        return frozenset(out)

    @property
    def graph(self) -> AssemblyGraph:
        return AssemblyGraph(self.nodes, frozenset(self.edges))


@dataclass(frozen=True)
class AssemblyResult:
    """Committed assembly: the deduplicated union of one chosen candidate
    per starting service."""

    assembly: AssemblyGraph
    chosen: dict[str, CandidateSubgraph]
    combinations_tested: int
    per_service_load: dict[str, int]


def build_binding_graph(
    services: Iterable[ServiceDescriptor],
    template: ApplicationTemplate,
    net: Simulator,
) -> tuple[AssemblyGraph, QoSMatrix]:
    """Flood the template from the starting services and measure links.

    Starting services contact every visible target of the paired type;
    each contacted service measures the link from its sender and floods
    onward for its own type pairs.  The result contains one directed edge
    per allowed binding and one link measurement per edge.
    """
    report = validate_template(template)
    if not report.ok:
        raise TemplateInvalid(report)
    svc = sorted(service_map(services).values(), key=lambda s: s.id)
    by_type: dict[str, list[ServiceDescriptor]] = {}
    for descriptor in svc:
        by_type.setdefault(descriptor.type, []).append(descriptor)

    start_type = template.starting_type()
    starts = by_type.get(start_type, [])
    if not starts:
        raise NoStartingService(f"no live service of starting type {start_type!r}")

    reached = {s.id for s in starts}
    queue = deque(starts)
    edges: list[tuple[str, str]] = []
    links = QoSMatrix()
    while queue:
        sender = queue.popleft()
        specs = template.out_edges(sender.type)
        if not specs:
            continue
        visible = net.visible_peers(sender.id)
        for to_type, _constraint in specs:
            for target in by_type.get(to_type, []):
                if target.id not in visible:
                    continue
                edges.append((sender.id, target.id))
                links.set(sender.id, target.id, net.measure_link(sender.id, target.id))
                if target.id not in reached:
                    reached.add(target.id)
                    queue.append(target)
    return AssemblyGraph(frozenset(reached), frozenset(edges)), links


def enumerate_candidates(
    graph: AssemblyGraph,
    links: QoSMatrix,
    template: ApplicationTemplate,
    start_id: str,
    services: Mapping[str, ServiceDescriptor] | Iterable[ServiceDescriptor],
) -> list[CandidateSubgraph]:
    """Every constraint-compliant subgraph reachable from one start,
    sorted by ascending worst-path time.

    Each included node picks exactly the constrained number of its targets
    per type pair (all of them for ALL); a node reached through several
    binders appears once and its own picks are made once.  Ties in cost
    are ordered by the sorted edge list, so the result is stable across
    runs.  Raises :class:`InsufficientServices` when an included node has
    fewer reachable targets than its constraint requires.
    """
    svc = service_map(services)
    if start_id not in graph.nodes:
        raise ValueError(f"start {start_id!r} is not a node of the binding graph")
    if svc[start_id].type != template.starting_type():
        raise ValueError(f"service {start_id!r} is not of the starting type")

    # Successors of each node grouped by target type, sorted for determinism.
    succ_by_type: dict[str, dict[str, list[str]]] = {}
    for a, b in graph.edges:
        succ_by_type.setdefault(a, {}).setdefault(svc[b].type, []).append(b)
    for groups in succ_by_type.values():
        for targets in groups.values():
            targets.sort()

    shared_edge = {edge: edge for edge in graph.edges}
    type_order = template.topological_types()
    out_specs = {t: template.out_edges(t) for t in type_order}

    included: dict[str, list[str]] = {t: [] for t in type_order}
    included[svc[start_id].type].append(start_id)
    included_set = {start_id}
    edge_acc: list[tuple[str, str]] = []
    raw: list[tuple[float, tuple[tuple[str, str], ...]]] = []

    def materialize() -> None:
        edge_tuple = tuple(sorted(edge_acc))
        candidate = AssemblyGraph(frozenset(included_set), frozenset(edge_tuple))
        cost = worst_path_time(candidate, start_id, svc, links)
        raw.append((cost, edge_tuple))

    def expand(position: int) -> None:
        if position == len(type_order):
            materialize()
            return
        binder_type = type_order[position]
        binders = included[binder_type]
        specs = out_specs[binder_type]
        if not binders or not specs:
            expand(position + 1)
            return

        choice_meta: list[tuple[str, str]] = []  # (binder node, target type)
        choice_pools = []
        for to_type, constraint in specs:
            for node in binders:
                available = succ_by_type.get(node, {}).get(to_type, [])
                if isinstance(constraint, AllServices):
                    pool: Sequence[tuple[str, ...]] = (tuple(available),)
                else:
                    if len(available) < constraint:
                        raise InsufficientServices(to_type, constraint, len(available))
                    pool = tuple(combinations(available, constraint))
                choice_meta.append((node, to_type))
                choice_pools.append(pool)

        for assignment in product(*choice_pools):
            marks: dict[str, int] = {}
            edge_mark = len(edge_acc)
            for (node, to_type), chosen in zip(choice_meta, assignment):
                bucket = included[to_type]
                if to_type not in marks:
                    marks[to_type] = len(bucket)
                for target in chosen:
                    edge_acc.append(shared_edge[(node, target)])
                    if target not in included_set:
                        included_set.add(target)
                        bucket.append(target)
            expand(position + 1)
            del edge_acc[edge_mark:]
            for to_type, length in marks.items():
                bucket = included[to_type]
                for target in bucket[length:]:
                    included_set.discard(target)
                del bucket[length:]

    expand(0)
    raw.sort(key=lambda item: (item[0], item[1]))
    return [
        CandidateSubgraph(start_id, edges, cost, rank)
        for rank, (cost, edges) in enumerate(raw)
    ]


def select_assembly(
    per_start: Mapping[str, Sequence[CandidateSubgraph]],
    services: Mapping[str, ServiceDescriptor] | Iterable[ServiceDescriptor],
    *,
    budget: int = DEFAULT_COMBINATION_BUDGET,
) -> AssemblyResult:
    """First feasible combination of one candidate per starting service.

    Combinations are visited as a lexicographic odometer over the
    ascending-sorted candidate lists (starts in id order, rightmost
    varying fastest), so the all-minimum combination is tested first.  A
    combination is feasible when, in the union graph with duplicate edges
    collapsed, every service's distinct inbound edge count stays within
    its threshold.

    Raises :class:`Infeasible` after exhausting every combination and
    :class:`CombinationBudgetExceeded` if ``budget`` combinations were
    tested without an answer.
    """
    if not per_start:
        raise ValueError("no starting services to combine")
    start_ids = sorted(per_start)
    pools: list[Sequence[CandidateSubgraph]] = []
    for sid in start_ids:
        candidates = per_start[sid]
        if not candidates:
            raise ValueError(f"start {sid!r} has an empty candidate list")
        pools.append(tuple(candidates))

    thresholds = {s.id: s.threshold for s in service_map(services).values()}
    tested = 0
    for combo in product(*pools):
        tested += 1
        if tested > budget:
            raise CombinationBudgetExceeded(budget)
        union_edges: set[tuple[str, str]] = set()
        for candidate in combo:
            union_edges.update(candidate.edges)
        loads = Counter(target for _, target in union_edges)
        if all(count <= thresholds[node] for node, count in loads.items()):
            nodes = set(start_ids)
            for a, b in union_edges:
                nodes.add(a)
                nodes.add(b)
            assembly = AssemblyGraph(frozenset(nodes), frozenset(union_edges))
            per_load = {node: loads.get(node, 0) for node in nodes}
            return AssemblyResult(assembly, dict(zip(start_ids, combo)), tested, per_load)
    raise Infeasible(tested)


def assemble(
    services: Iterable[ServiceDescriptor],
    template: ApplicationTemplate,
    net: Simulator,
    *,
    budget: int = DEFAULT_COMBINATION_BUDGET,
    parallel: bool = False,
) -> AssemblyResult:
    """Run the full pipeline: flood and measure, enumerate per start,
    commit the first feasible combination.

    With ``parallel=True`` the per-start enumeration runs on a thread
    pool; results merge in start-id order, so the outcome is identical to
    the sequential run.
    """
    services = list(services)
    graph, links = build_binding_graph(services, template, net)
    svc = service_map(services)
    start_type = template.starting_type()
    start_ids = sorted(sid for sid in graph.nodes if svc[sid].type == start_type)

    if parallel and len(start_ids) > 1:
        with ThreadPoolExecutor() as pool:
            lists = list(
                pool.map(
                    lambda sid: enumerate_candidates(graph, links, template, sid, svc),
                    start_ids,
                )
            )
        per_start = dict(zip(start_ids, lists))
    else:
        per_start = {
            sid: enumerate_candidates(graph, links, template, sid, svc)
            for sid in start_ids
        }
    return select_assembly(per_start, services, budget=budget)
