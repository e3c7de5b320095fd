import csv
import json
import re


from selfassembly.cli import main
from selfassembly.scenario import (
    Scenario,
    generate_one_layer,
    serialize_scenario,
    write_scenario,
)
from selfassembly import ServiceDescriptor, UniformLatency
from selfassembly.runtime import ScenarioEvent

from conftest import seven_services, seven_template


def _write_example7(path, events=(), c1_threshold=3):
    services = [
        ServiceDescriptor(s.id, s.type, s.qos_nominal, c1_threshold if s.id == "C1" else s.threshold)
        for s in seven_services()
    ]
    scenario = Scenario(services, seven_template(), UniformLatency(0.0), list(events))
    write_scenario(scenario, path)
    return path


def _check_dot(text: str) -> None:
    """Minimal DOT well-formedness: a digraph block of node and edge
    statements with quoted identifiers."""
    lines = [line.strip() for line in text.strip().splitlines()]
    assert lines[0] == "digraph assembly {"
    assert lines[-1] == "}"
    node_re = re.compile(r'^"[^"]+" \[label="[^"]*"\];$')
    edge_re = re.compile(r'^"[^"]+" -> "[^"]+" \[label="[^"]*"\];$')
    for line in lines[1:-1]:
        assert node_re.match(line) or edge_re.match(line), line


def test_assemble_writes_dot_and_json(tmp_path, capsys):
    scenario_path = _write_example7(tmp_path / "example7.json")
    dot_path = tmp_path / "out.dot"
    json_path = tmp_path / "out.json"
    code = main(
        [
            "assemble",
            "--scenario",
            str(scenario_path),
            "--dot",
            str(dot_path),
            "--json",
            str(json_path),
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "n_services=7" in out
    assert "peak_candidate_count=9" in out

    dot_text = dot_path.read_text()
    _check_dot(dot_text)
    assert dot_text.count("->") == 9  # committed assembly, not the full fan-out

    doc = json.loads(json_path.read_text())
    assert set(doc) == {
        "nodes",
        "edges",
        "chosen",
        "loads",
        "combinations_tested",
        "total_cost_per_start",
    }
    assert len(doc["nodes"]) == 7
    assert set(doc["chosen"]) == {"A1", "A2", "A3"}


def test_assemble_parse_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["assemble", "--scenario", str(bad)]) == 1


def test_assemble_missing_file_exit_code(tmp_path):
    assert main(["assemble", "--scenario", str(tmp_path / "absent.json")]) == 1


def test_assemble_infeasible_exit_code(tmp_path):
    scenario_path = _write_example7(tmp_path / "squeezed.json", c1_threshold=2)
    assert main(["assemble", "--scenario", str(scenario_path)]) == 2


def test_assemble_budget_exit_code(tmp_path):
    scenario_path = _write_example7(tmp_path / "example7.json")
    assert main(["assemble", "--scenario", str(scenario_path), "--budget", "1"]) == 3


def test_assemble_parallel_flag(tmp_path, capsys):
    scenario_path = _write_example7(tmp_path / "example7.json")
    assert main(["assemble", "--scenario", str(scenario_path), "--parallel"]) == 0
    assert "combinations_tested=3" in capsys.readouterr().out


def test_simulate_timeline(tmp_path):
    events = [
        ScenarioEvent.disappears(100.0, "B3"),
        ScenarioEvent.appears(200.0, ServiceDescriptor("B4", "tB", 1.0, 3)),
    ]
    scenario_path = _write_example7(tmp_path / "healing.json", events=events)
    timeline_path = tmp_path / "timeline.ndjson"
    code = main(
        ["simulate", "--scenario", str(scenario_path), "--timeline", str(timeline_path)]
    )
    assert code == 0
    lines = timeline_path.read_text().strip().splitlines()
    records = [json.loads(line) for line in lines]
    assert [r["feasible"] for r in records] == [True, False, True]
    assert records[1]["trigger"] == "service_disappears:B3"


def test_simulate_final_infeasible_exit_code(tmp_path):
    events = [ScenarioEvent.disappears(100.0, "B3")]
    scenario_path = _write_example7(tmp_path / "broken.json", events=events)
    assert main(["simulate", "--scenario", str(scenario_path)]) == 2


def test_bench_one_layer_row(tmp_path):
    csv_path = tmp_path / "bench.csv"
    code = main(
        [
            "bench",
            "one-layer",
            "--n",
            "1000",
            "--k",
            "2",
            "--seed",
            "3",
            "--csv",
            str(csv_path),
        ]
    )
    assert code == 0
    with open(csv_path, newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert rows[0]["layout"] == "one-layer"
    assert int(rows[0]["candidates"]) == 499500  # 1000 choose 2, from the counting oracle
    assert float(rows[0]["wall_ms"]) > 0
    assert int(rows[0]["mem_estimate"]) > 0


def test_bench_requires_n(capsys):
    assert main(["bench", "one-layer"]) == 1


def test_verify_small_run(capsys):
    code = main(["verify", "--random", "25", "--seed", "7", "--max-services", "10"])
    assert code == 0
    out = capsys.readouterr().out
    assert "mismatches=0" in out


def test_generate_writes_canonical_file(tmp_path):
    out = tmp_path / "layout.json"
    code = main(
        ["generate", "one-layer", "--n", "10", "--k", "half", "--seed", "4", "--out", str(out)]
    )
    assert code == 0
    assert out.read_text() == serialize_scenario(generate_one_layer(10, "half", 4))


def test_generate_medical_file(tmp_path):
    out = tmp_path / "medical.json"
    assert main(["generate", "medical", "--seed", "1", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["services"]) == 26


def test_unknown_command_exit_code():
    assert main(["frobnicate"]) == 1
