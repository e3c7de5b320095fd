import json

import pytest

from selfassembly import (
    ApplicationTemplate,
    ContractCause,
    ContractNotification,
    ContractStatus,
    ScenarioEvent,
    ServiceDescriptor,
    Simulator,
    UniformLatency,
    assemble,
    check_contract,
    inflight_load,
    run_scenario,
    timeline_jsonl,
)

from conftest import make_net


B1 = ServiceDescriptor("B1", "tB", 2.0, 2)


# ----------------------------------------------------------------- contracts


def test_contract_boundary_is_compliant():
    note = check_contract(B1, observed_response_ms=2.0, inflight=2)
    assert note.status is ContractStatus.IN_CONTRACT
    assert note.cause is None


def test_contract_threshold_exceeded_wins_over_timing():
    note = check_contract(B1, observed_response_ms=2.0, inflight=3)
    assert note.status is ContractStatus.OUT_CONTRACT
    assert note.cause is ContractCause.THRESHOLD_EXCEEDED


def test_contract_response_time_exceeded():
    note = check_contract(B1, observed_response_ms=5.0, inflight=1)
    assert note.status is ContractStatus.OUT_CONTRACT
    assert note.cause is ContractCause.RESPONSE_TIME_EXCEEDED


def test_contract_tolerance_scales_the_bound():
    assert check_contract(B1, 2.2, 1, tolerance=0.1).status is ContractStatus.IN_CONTRACT
    assert check_contract(B1, 2.21, 1, tolerance=0.1).status is ContractStatus.OUT_CONTRACT


def test_contract_rejects_negative_inputs():
    with pytest.raises(ValueError):
        check_contract(B1, -1.0, 0)
    with pytest.raises(ValueError):
        check_contract(B1, 1.0, -1)


def test_notification_invariants():
    with pytest.raises(ValueError):
        ContractNotification("B1", 0.0, ContractStatus.OUT_CONTRACT, None)
    with pytest.raises(ValueError):
        ContractNotification("B1", 0.0, ContractStatus.IN_CONTRACT, ContractCause.INJECTED)


# ------------------------------------------------------------------- loads


def test_inflight_load_matches_commit(example7_net):
    services, template, net = example7_net
    result = assemble(services, template, net)
    assert inflight_load(result) == result.per_service_load


def test_inflight_load_single_chain():
    services = [
        ServiceDescriptor("A", "tA", 1.0, 1),
        ServiceDescriptor("B", "tB", 1.0, 1),
        ServiceDescriptor("C", "tC", 1.0, 1),
    ]
    template = ApplicationTemplate((("tA", "tB"), ("tB", "tC")), (1, 1))
    result = assemble(services, template, make_net(services))
    assert inflight_load(result) == {"A": 0, "B": 1, "C": 1}


# ------------------------------------------------------------------ scenarios


def test_stable_without_events(example7):
    services, template = example7
    timeline = run_scenario(services, template, [], Simulator(UniformLatency(0.0)))
    assert len(timeline) == 1
    assert timeline[0].trigger == "initial"
    assert timeline[0].feasible


def test_self_healing_cycle(example7):
    # Removing the used B3 leaves five binding slots for six required
    # picks (2+3 < 3*2): infeasible until a fourth B appears.
    services, template = example7
    b4 = ServiceDescriptor("B4", "tB", 1.0, 3)
    events = [
        ScenarioEvent.disappears(100.0, "B3"),
        ScenarioEvent.appears(200.0, b4),
    ]
    timeline = run_scenario(services, template, events, Simulator(UniformLatency(0.0)))
    assert [entry.trigger for entry in timeline] == [
        "initial",
        "service_disappears:B3",
        "service_appears:B4",
    ]
    assert timeline[0].feasible
    assert not timeline[1].feasible
    assert timeline[2].feasible
    assert "B3" not in timeline[2].result.assembly.nodes
    assert [entry.at for entry in timeline] == [0.0, 100.0, 200.0]


def test_unused_service_disappearance_triggers_nothing(example7):
    # With relaxed thresholds the first combination wins and B3 is unused.
    services, template = example7
    relaxed = [ServiceDescriptor(s.id, s.type, s.qos_nominal, 10) for s in services]
    events = [ScenarioEvent.disappears(50.0, "B3")]
    timeline = run_scenario(relaxed, template, events, Simulator(UniformLatency(0.0)))
    assert len(timeline) == 1
    assert "B3" not in timeline[0].result.assembly.nodes


def test_appearance_always_triggers(example7):
    services, template = example7
    b4 = ServiceDescriptor("B4", "tB", 0.5, 3)
    events = [ScenarioEvent.appears(10.0, b4)]
    timeline = run_scenario(services, template, events, Simulator(UniformLatency(0.0)))
    assert len(timeline) == 2
    assert timeline[1].trigger == "service_appears:B4"


def test_out_contract_on_unused_service_is_ignored(example7):
    services, template = example7
    relaxed = [ServiceDescriptor(s.id, s.type, s.qos_nominal, 10) for s in services]
    events = [ScenarioEvent.inject_out_contract(30.0, "B3")]
    net = Simulator(UniformLatency(0.0))
    timeline = run_scenario(relaxed, template, events, net)
    assert len(timeline) == 1
    flagged = [rec for rec in net.trace_records() if rec["kind"] == "out_contract"]
    assert len(flagged) == 1
    assert flagged[0]["detail"]["cause"] == "Injected"


def test_out_contract_on_used_service_excludes_it_once(example7):
    services, template = example7
    relaxed = [ServiceDescriptor(s.id, s.type, s.qos_nominal, 10) for s in services]
    net = Simulator(UniformLatency(0.0))
    first = assemble(relaxed, template, make_net(relaxed))
    used_b = sorted(n for n in first.assembly.nodes if n.startswith("B"))[0]
    events = [ScenarioEvent.inject_out_contract(30.0, used_b)]
    timeline = run_scenario(relaxed, template, events, net)
    assert len(timeline) == 2
    assert timeline[1].trigger == f"out_contract:{used_b}"
    assert used_b not in timeline[1].result.assembly.nodes


def test_link_degrade_triggers_only_when_used(example7):
    services, template = example7
    relaxed = [ServiceDescriptor(s.id, s.type, s.qos_nominal, 10) for s in services]
    first = assemble(relaxed, template, make_net(relaxed))
    used_edge = sorted(first.assembly.edges)[0]
    unused_edge = ("A1", "B3") if ("A1", "B3") not in first.assembly.edges else ("A1", "B2")
    events = [
        ScenarioEvent.link_degrades(10.0, *unused_edge, 50.0),
        ScenarioEvent.link_degrades(20.0, *used_edge, 99.0),
    ]
    timeline = run_scenario(relaxed, template, events, Simulator(UniformLatency(0.0)))
    assert len(timeline) == 2
    assert timeline[1].trigger == f"link_degrades:{used_edge[0]}->{used_edge[1]}"


def test_events_must_be_sorted(example7):
    services, template = example7
    events = [
        ScenarioEvent.disappears(100.0, "B3"),
        ScenarioEvent.disappears(50.0, "B2"),
    ]
    with pytest.raises(ValueError):
        run_scenario(services, template, events, Simulator(UniformLatency(0.0)))


def test_timeline_log_shape(example7):
    services, template = example7
    events = [ScenarioEvent.disappears(100.0, "B3")]
    timeline = run_scenario(services, template, events, Simulator(UniformLatency(0.0)))
    lines = timeline_jsonl(timeline).strip().split("\n")
    assert len(lines) == len(timeline)
    for line in lines:
        record = json.loads(line)
        assert set(record) == {
            "t",
            "trigger",
            "feasible",
            "n_nodes",
            "n_edges",
            "combinations_tested",
        }


def test_event_factory_validation():
    with pytest.raises(ValueError):
        ScenarioEvent.link_degrades(0.0, "", "B1", 1.0)
    with pytest.raises(ValueError):
        ScenarioEvent.disappears(0.0, "")
