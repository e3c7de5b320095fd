import pytest

from selfassembly import (
    ALL,
    ApplicationTemplate,
    CombinationBudgetExceeded,
    DomainError,
    Infeasible,
    InsufficientServices,
    NoStartingService,
    ServiceDescriptor,
    TemplateInvalid,
    assemble,
    build_binding_graph,
    count_combinations,
    enumerate_candidates,
    select_assembly,
    service_map,
)
from selfassembly.oracle import binomial_table, check_assembly, exhaustive_worst_path

from conftest import make_net, seven_services, seven_template


# ---------------------------------------------------------------- combinations


def test_count_combinations_small():
    assert count_combinations(3, 2) == 3


def test_count_combinations_all_is_one_choice():
    assert count_combinations(17, ALL) == 1
    assert count_combinations(0, ALL) == 1


def test_count_combinations_cross_checked_against_triangle():
    # Frozen from the addition-only triangle.
    triangle = binomial_table(20)
    assert triangle[20][10] == 184756
    assert count_combinations(20, 10) == 184756


def test_count_combinations_domain():
    with pytest.raises(DomainError):
        count_combinations(3, 4)
    with pytest.raises(DomainError):
        count_combinations(3, -1)
    with pytest.raises(DomainError):
        count_combinations(-1, 0)


# --------------------------------------------------------------- binding graph


def test_binding_graph_worked_example_shape(example7_net):
    services, template, net = example7_net
    graph, links = build_binding_graph(services, template, net)
    assert len(graph.nodes) == 7
    assert len(graph.edges) == 12  # 3x3 fan-out plus 3 into the sink
    assert len(links) == 12
    a_to_b = [e for e in graph.edges if e[0].startswith("A")]
    b_to_c = [e for e in graph.edges if e[0].startswith("B")]
    assert len(a_to_b) == 9 and len(b_to_c) == 3
    for edge in graph.edges:
        assert edge in links


def test_binding_graph_single_pair():
    services = [ServiceDescriptor("A1", "tA", 1.0, 1), ServiceDescriptor("B1", "tB", 1.0, 1)]
    template = ApplicationTemplate((("tA", "tB"),), (1,))
    graph, links = build_binding_graph(services, template, make_net(services))
    assert graph.edges == {("A1", "B1")}
    assert links.get("A1", "B1") == 0.0


def test_binding_graph_without_recipients():
    services = [s for s in seven_services() if s.type != "tB"]
    graph, links = build_binding_graph(services, seven_template(), make_net(services))
    assert graph.nodes == {"A1", "A2", "A3"}  # the sink type is never reached
    assert graph.edges == frozenset()
    assert len(links) == 0


def test_binding_graph_requires_starting_services():
    services = [s for s in seven_services() if s.type != "tA"]
    with pytest.raises(NoStartingService):
        build_binding_graph(services, seven_template(), make_net(services))


def test_binding_graph_rejects_invalid_template():
    services = seven_services()
    bad = ApplicationTemplate((("tA", "tB"), ("tB", "tA")), (1, 1))
    with pytest.raises(TemplateInvalid):
        build_binding_graph(services, bad, make_net(services))


# ------------------------------------------------------------------ candidates


def _enumerate_for(start_id, example7_net):
    services, template, net = example7_net
    graph, links = build_binding_graph(services, template, net)
    return enumerate_candidates(graph, links, template, start_id, service_map(services))


def test_candidates_worked_example_counts(example7_net):
    for start in ("A1", "A2", "A3"):
        assert len(_enumerate_for(start, example7_net)) == 3  # choose 2 of 3


def test_candidates_zero_latency_costs_sorted(example7_net):
    # Frozen from the path-enumeration reference with all link times zero:
    # {B1,B2} -> 9, {B1,B3} -> 10, {B2,B3} -> 10 (ties by edge list).
    candidates = _enumerate_for("A1", example7_net)
    assert [c.cost for c in candidates] == [9.0, 10.0, 10.0]
    assert candidates[0].edges == (
        ("A1", "B1"),
        ("A1", "B2"),
        ("B1", "C1"),
        ("B2", "C1"),
    )
    assert candidates[1].edges == (
        ("A1", "B1"),
        ("A1", "B3"),
        ("B1", "C1"),
        ("B3", "C1"),
    )
    assert candidates[2].edges == (
        ("A1", "B2"),
        ("A1", "B3"),
        ("B2", "C1"),
        ("B3", "C1"),
    )
    assert [c.rank for c in candidates] == [0, 1, 2]


def test_candidate_costs_match_path_enumeration(example7_net):
    services, template, net = example7_net
    graph, links = build_binding_graph(services, template, net)
    svc = service_map(services)
    for start in ("A1", "A2", "A3"):
        for candidate in enumerate_candidates(graph, links, template, start, svc):
            assert candidate.cost == exhaustive_worst_path(candidate.graph, start, svc, links)


def test_candidates_all_constraint_leaves_no_choice(example7):
    services, _ = example7
    template = ApplicationTemplate((("tA", "tB"), ("tB", "tC")), (ALL, 1))
    net = make_net(services)
    graph, links = build_binding_graph(services, template, net)
    candidates = enumerate_candidates(graph, links, template, "A1", service_map(services))
    assert len(candidates) == 1
    assert {e for e in candidates[0].edges if e[0] == "A1"} == {
        ("A1", "B1"),
        ("A1", "B2"),
        ("A1", "B3"),
    }


def test_candidates_insufficient_targets(example7):
    services, _ = example7
    template = ApplicationTemplate((("tA", "tB"), ("tB", "tC")), (2, 1))
    shrunk = [s for s in services if s.id not in ("B2", "B3")]
    net = make_net(shrunk)
    graph, links = build_binding_graph(shrunk, template, net)
    with pytest.raises(InsufficientServices) as info:
        enumerate_candidates(graph, links, template, "A1", service_map(shrunk))
    assert info.value.needed == 2
    assert info.value.available == 1


def test_candidates_sorted_and_deterministic(example7):
    services, template = example7
    table = {}
    value = 0.25
    for a in ("A1", "A2", "A3"):
        for b in ("B1", "B2", "B3"):
            table[(a, b)] = value
            value += 0.25
    for b in ("B1", "B2", "B3"):
        table[(b, "C1")] = value
        value += 0.25
    from selfassembly import MatrixLatency

    def run():
        net = make_net(services, MatrixLatency(table))
        graph, links = build_binding_graph(services, template, net)
        return enumerate_candidates(graph, links, template, "A1", service_map(services))

    first, second = run(), run()
    assert first == second
    costs = [c.cost for c in first]
    assert costs == sorted(costs)


# -------------------------------------------------------------------- selection


def test_select_worked_example_loads(example7_net):
    services, template, net = example7_net
    result = assemble(services, template, net)
    # Oracle-confirmed witness bounds: B1<=2, B2<=3, B3<=1, C1<=3.
    assert result.per_service_load["B1"] <= 2
    assert result.per_service_load["B2"] <= 3
    assert result.per_service_load["B3"] <= 1
    assert result.per_service_load["C1"] <= 3
    assert check_assembly(result, services, template) == []


def test_select_first_combination_when_no_contention(example7):
    services, template = example7
    relaxed = [
        ServiceDescriptor(s.id, s.type, s.qos_nominal, 10) for s in services
    ]
    net = make_net(relaxed)
    result = assemble(relaxed, template, net)
    assert result.combinations_tested == 1
    for start, candidate in result.chosen.items():
        assert candidate.rank == 0


def test_select_infeasible_when_sink_threshold_too_low(example7):
    services, template = example7
    squeezed = [
        ServiceDescriptor(s.id, s.type, s.qos_nominal, 2 if s.id == "C1" else s.threshold)
        for s in services
    ]
    net = make_net(squeezed)
    with pytest.raises(Infeasible) as info:
        assemble(squeezed, template, net)
    assert info.value.combinations_tested == 27  # exhausted 3^3 combinations


def test_select_budget_cap(example7_net):
    services, template, net = example7_net
    with pytest.raises(CombinationBudgetExceeded):
        assemble(services, template, net, budget=1)


def test_select_odometer_order(example7_net):
    # With zero links the per-start lists are identical; the third
    # combination (rightmost start advanced twice) is the first feasible.
    services, template, net = example7_net
    result = assemble(services, template, net)
    assert result.combinations_tested == 3
    assert result.chosen["A1"].rank == 0
    assert result.chosen["A2"].rank == 0
    assert result.chosen["A3"].rank == 2


def test_select_requires_candidates():
    with pytest.raises(ValueError):
        select_assembly({}, seven_services())
    with pytest.raises(ValueError):
        select_assembly({"A1": []}, seven_services())


# -------------------------------------------------------------------- assemble


def test_assemble_empty_service_set():
    with pytest.raises(NoStartingService):
        assemble([], seven_template(), make_net([]))


def test_assemble_union_deduplicates_edges(example7_net):
    services, template, net = example7_net
    result = assemble(services, template, net)
    union = set()
    for candidate in result.chosen.values():
        union.update(candidate.edges)
    assert result.assembly.edges == frozenset(union)


def test_assemble_parallel_matches_sequential(example7):
    services, template = example7
    sequential = assemble(services, template, make_net(services))
    parallel = assemble(services, template, make_net(services), parallel=True)
    assert parallel.assembly == sequential.assembly
    assert parallel.combinations_tested == sequential.combinations_tested


def test_candidate_count_matches_binomial_products(example7_net):
    services, template, net = example7_net
    graph, links = build_binding_graph(services, template, net)
    svc = service_map(services)
    per_start = enumerate_candidates(graph, links, template, "A1", svc)
    # One choice point: pick 2 of 3 targets; every picked target then has
    # a forced single pick.
    assert len(per_start) == count_combinations(3, 2) * count_combinations(1, 1) ** 2
