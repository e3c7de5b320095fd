"""Scenario documents: strict JSON schema, canonical serialization, layout
generators, and seeded random instances for oracle cross-checking.

A scenario bundles the live service set, the application template, the
link latency model, and an optional list of timed events.  Parsing is
strict: unknown keys are rejected at every level so typos surface early.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Any

from .errors import ScenarioFormatError
from .model import (
    ALL,
    AllServices,
    ApplicationTemplate,
    Constraint,
    QoSMatrix,
    ServiceDescriptor,
)
from .netsim import (
    LatencyModel,
    MatrixLatency,
    SeededLatency,
    Simulator,
    UniformLatency,
)
from .runtime import EventKind, ScenarioEvent


@dataclass
class Scenario:
    services: list[ServiceDescriptor]
    template: ApplicationTemplate
    links: LatencyModel
    events: list[ScenarioEvent] = field(default_factory=list)


# --------------------------------------------------------------------- parsing


def _check_keys(obj: dict, required: set[str], optional: set[str], where: str) -> None:
    keys = set(obj)
    missing = required - keys
    if missing:
        raise ScenarioFormatError(f"{where}: missing key(s) {sorted(missing)}")
    unknown = keys - required - optional
    if unknown:
        raise ScenarioFormatError(f"{where}: unknown key(s) {sorted(unknown)}")


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioFormatError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _parse_service(obj: Any, where: str) -> ServiceDescriptor:
    if not isinstance(obj, dict):
        raise ScenarioFormatError(f"{where}: expected an object")
    _check_keys(obj, {"id", "type", "qos_ms", "threshold"}, set(), where)
    if not isinstance(obj["id"], str) or not isinstance(obj["type"], str):
        raise ScenarioFormatError(f"{where}: id and type must be strings")
    if isinstance(obj["threshold"], bool) or not isinstance(obj["threshold"], int):
        raise ScenarioFormatError(f"{where}: threshold must be an integer")
    try:
        return ServiceDescriptor(
            obj["id"], obj["type"], _number(obj["qos_ms"], where), obj["threshold"]
        )
    except ValueError as exc:
        raise ScenarioFormatError(f"{where}: {exc}") from None


def _parse_constraint(value: Any, where: str) -> Constraint:
    if value == "ALL":
        return ALL
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ScenarioFormatError(
            f"{where}: constraint must be a positive integer or \"ALL\", got {value!r}"
        )
    return value


def _parse_template(obj: Any) -> ApplicationTemplate:
    where = "template"
    if not isinstance(obj, dict):
        raise ScenarioFormatError(f"{where}: expected an object")
    _check_keys(obj, {"body", "constraints"}, set(), where)
    body = obj["body"]
    if not isinstance(body, list):
        raise ScenarioFormatError(f"{where}.body: expected a list")
    pairs = []
    for idx, pair in enumerate(body):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(t, str) for t in pair)
        ):
            raise ScenarioFormatError(f"{where}.body[{idx}]: expected [from_type, to_type]")
        pairs.append((pair[0], pair[1]))
    constraints = obj["constraints"]
    if not isinstance(constraints, list):
        raise ScenarioFormatError(f"{where}.constraints: expected a list")
    parsed = [
        _parse_constraint(value, f"{where}.constraints[{idx}]")
        for idx, value in enumerate(constraints)
    ]
    return ApplicationTemplate(tuple(pairs), tuple(parsed))


def _parse_links(obj: Any) -> LatencyModel:
    where = "links"
    if not isinstance(obj, dict):
        raise ScenarioFormatError(f"{where}: expected an object")
    kind = obj.get("kind")
    if kind == "uniform":
        _check_keys(obj, {"kind", "base_ms"}, set(), where)
        return UniformLatency(_number(obj["base_ms"], where))
    if kind == "matrix":
        _check_keys(obj, {"kind", "entries"}, set(), where)
        entries = obj["entries"]
        if not isinstance(entries, list):
            raise ScenarioFormatError(f"{where}.entries: expected a list")
        table: dict[tuple[str, str], float] = {}
        for idx, row in enumerate(entries):
            if (
                not isinstance(row, list)
                or len(row) != 3
                or not isinstance(row[0], str)
                or not isinstance(row[1], str)
            ):
                raise ScenarioFormatError(
                    f"{where}.entries[{idx}]: expected [from_id, to_id, ms]"
                )
            pair = (row[0], row[1])
            if pair in table:
                raise ScenarioFormatError(f"{where}.entries[{idx}]: duplicate pair {pair}")
            table[pair] = _number(row[2], f"{where}.entries[{idx}]")
        return MatrixLatency(table)
    if kind == "seeded":
        _check_keys(obj, {"kind", "base_ms", "jitter_ms", "seed"}, set(), where)
        if isinstance(obj["seed"], bool) or not isinstance(obj["seed"], int):
            raise ScenarioFormatError(f"{where}.seed: expected an integer")
        return SeededLatency(
            _number(obj["base_ms"], where), _number(obj["jitter_ms"], where), obj["seed"]
        )
    raise ScenarioFormatError(
        f"{where}.kind: expected \"uniform\", \"matrix\" or \"seeded\", got {kind!r}"
    )


_EVENT_KEYS = {
    "service_appears": ({"at_ms", "kind", "service"}, set()),
    "service_disappears": ({"at_ms", "kind", "id"}, set()),
    "link_degrades": ({"at_ms", "kind", "from", "to", "new_ms"}, set()),
    "inject_out_contract": ({"at_ms", "kind", "id"}, set()),
}


def _parse_event(obj: Any, where: str) -> ScenarioEvent:
    if not isinstance(obj, dict):
        raise ScenarioFormatError(f"{where}: expected an object")
    kind = obj.get("kind")
    if kind not in _EVENT_KEYS:
        raise ScenarioFormatError(f"{where}.kind: unknown event kind {kind!r}")
    required, optional = _EVENT_KEYS[kind]
    _check_keys(obj, required, optional, where)
    at = _number(obj["at_ms"], f"{where}.at_ms")
    if kind == "service_appears":
        return ScenarioEvent.appears(at, _parse_service(obj["service"], f"{where}.service"))
    if kind == "service_disappears":
        if not isinstance(obj["id"], str):
            raise ScenarioFormatError(f"{where}.id: expected a string")
        return ScenarioEvent.disappears(at, obj["id"])
    if kind == "link_degrades":
        if not isinstance(obj["from"], str) or not isinstance(obj["to"], str):
            raise ScenarioFormatError(f"{where}: from and to must be strings")
        return ScenarioEvent.link_degrades(
            at, obj["from"], obj["to"], _number(obj["new_ms"], f"{where}.new_ms")
        )
    if not isinstance(obj["id"], str):
        raise ScenarioFormatError(f"{where}.id: expected a string")
    return ScenarioEvent.inject_out_contract(at, obj["id"])


def parse_scenario(document: str | dict) -> Scenario:
    """Parse a scenario document (JSON text or an already-decoded object);
    unknown keys are rejected."""
    if isinstance(document, str):
        try:
            obj = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScenarioFormatError(f"not valid JSON: {exc}") from None
    else:
        obj = document
    if not isinstance(obj, dict):
        raise ScenarioFormatError("top level: expected an object")
    _check_keys(obj, {"services", "template", "links"}, {"events"}, "top level")
    raw_services = obj["services"]
    if not isinstance(raw_services, list):
        raise ScenarioFormatError("services: expected a list")
    services = [
        _parse_service(entry, f"services[{idx}]") for idx, entry in enumerate(raw_services)
    ]
    ids = [s.id for s in services]
    if len(set(ids)) != len(ids):
        raise ScenarioFormatError("services: duplicate ids")
    template = _parse_template(obj["template"])
    links = _parse_links(obj["links"])
    events = []
    if "events" in obj:
        if not isinstance(obj["events"], list):
            raise ScenarioFormatError("events: expected a list")
        events = [
            _parse_event(entry, f"events[{idx}]") for idx, entry in enumerate(obj["events"])
        ]
        for earlier, later in zip(events, events[1:]):
            if later.at < earlier.at:
                raise ScenarioFormatError("events: not sorted by at_ms")
    return Scenario(services, template, links, events)


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_scenario(handle.read())


# ----------------------------------------------------------------- serializing


def _service_obj(svc: ServiceDescriptor) -> dict:
    return {"id": svc.id, "type": svc.type, "qos_ms": svc.qos_nominal, "threshold": svc.threshold}


def _links_obj(links: LatencyModel) -> dict:
    if isinstance(links, UniformLatency):
        return {"kind": "uniform", "base_ms": links.base_ms}
    if isinstance(links, MatrixLatency):
        entries = [[a, b, ms] for (a, b), ms in sorted(links.entries.items())]
        return {"kind": "matrix", "entries": entries}
    if isinstance(links, SeededLatency):
        return {
            "kind": "seeded",
            "base_ms": links.base_ms,
            "jitter_ms": links.jitter_ms,
            "seed": links.seed,
        }
    raise TypeError(f"unknown latency model {links!r}")


def _event_obj(event: ScenarioEvent) -> dict:
    if event.kind is EventKind.SERVICE_APPEARS:
        assert event.service is not None
        return {"at_ms": event.at, "kind": event.kind.value, "service": _service_obj(event.service)}
    if event.kind is EventKind.SERVICE_DISAPPEARS:
        return {"at_ms": event.at, "kind": event.kind.value, "id": event.service_id}
    if event.kind is EventKind.LINK_DEGRADES:
        return {
            "at_ms": event.at,
            "kind": event.kind.value,
            "from": event.link_from,
            "to": event.link_to,
            "new_ms": event.new_ms,
        }
    return {"at_ms": event.at, "kind": event.kind.value, "id": event.service_id}


def scenario_to_obj(scenario: Scenario) -> dict:
    return {
        "services": [_service_obj(s) for s in sorted(scenario.services, key=lambda s: s.id)],
        "template": {
            "body": [[a, b] for a, b in scenario.template.body],
            "constraints": [
                "ALL" if isinstance(c, AllServices) else c
                for c in scenario.template.constraints
            ],
        },
        "links": _links_obj(scenario.links),
        "events": [_event_obj(e) for e in scenario.events],
    }


def serialize_scenario(scenario: Scenario) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(scenario_to_obj(scenario), indent=2, sort_keys=True) + "\n"


def write_scenario(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize_scenario(scenario))


def build_simulator(scenario: Scenario, *, trace: bool = True) -> Simulator:
    """A fresh simulator with every scenario service announced at time zero."""
    net = Simulator(scenario.links, trace=trace)
    for descriptor in sorted(scenario.services, key=lambda s: s.id):
        net.announce(descriptor, at=0.0)
    return net


# ------------------------------------------------------------------ generators
#
# "Random" parameters are drawn from one seeded generator in a fixed order,
# so the same flags and seed always produce byte-identical files: processing
# times uniform in [1, 10] ms, thresholds uniform integers in
# [1, max(2, n_services // 2)], link times uniform in [0.1, 5] ms.


def _draw_qos(rng: random.Random) -> float:
    return rng.uniform(1.0, 10.0)


def _draw_threshold(rng: random.Random, n_services: int) -> int:
    return rng.randint(1, max(2, n_services // 2))


def _draw_link(rng: random.Random) -> float:
    return rng.uniform(0.1, 5.0)


def resolve_layer_constraint(k: int | AllServices | str, available: int) -> Constraint:
    """Map a generator constraint spec (int, ALL, or ``"half"``) onto a
    concrete constraint for a layer with ``available`` targets."""
    if isinstance(k, AllServices):
        return ALL
    if isinstance(k, str):
        word = k.lower()
        if word == "all":
            return ALL
        if word == "half":
            return max(1, available // 2)
        raise ValueError(f"unknown constraint spec {k!r}")
    if k < 1:
        raise ValueError("integer constraint must be >= 1")
    return min(k, available)


def generate_one_layer(n: int, k: int | AllServices | str, seed: int) -> Scenario:
    """One starting service fanning out to ``n`` targets of a second type."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(seed)
    n_services = n + 1
    services = [ServiceDescriptor("A1", "tA", _draw_qos(rng), _draw_threshold(rng, n_services))]
    for i in range(1, n + 1):
        services.append(
            ServiceDescriptor(f"B{i}", "tB", _draw_qos(rng), _draw_threshold(rng, n_services))
        )
    table = {("A1", f"B{i}"): _draw_link(rng) for i in range(1, n + 1)}
    template = ApplicationTemplate(
        (("tA", "tB"),), (resolve_layer_constraint(k, n),)
    )
    return Scenario(services, template, MatrixLatency(table), [])


def generate_pyramidal(top_width: int, k: int | AllServices | str, seed: int) -> Scenario:
    """Layers of decreasing width (``top_width`` down to 1), one type per
    layer, each layer binding into the next."""
    if top_width < 2:
        raise ValueError("top_width must be >= 2")
    rng = random.Random(seed)
    widths = list(range(top_width, 0, -1))
    n_services = sum(widths)
    services: list[ServiceDescriptor] = []
    ids_by_layer: list[list[str]] = []
    for layer, width in enumerate(widths, start=1):
        ids = [f"L{layer}N{i}" for i in range(1, width + 1)]
        ids_by_layer.append(ids)
        for sid in ids:
            services.append(
                ServiceDescriptor(sid, f"t{layer}", _draw_qos(rng), _draw_threshold(rng, n_services))
            )
    body = []
    constraints = []
    for layer in range(len(widths) - 1):
        body.append((f"t{layer + 1}", f"t{layer + 2}"))
        constraints.append(resolve_layer_constraint(k, widths[layer + 1]))
    table: dict[tuple[str, str], float] = {}
    for layer in range(len(widths) - 1):
        for a in ids_by_layer[layer]:
            for b in ids_by_layer[layer + 1]:
                table[(a, b)] = _draw_link(rng)
    template = ApplicationTemplate(tuple(body), tuple(constraints))
    return Scenario(services, template, MatrixLatency(table), [])


def generate_medical(seed: int) -> Scenario:
    """The monitoring layout: 10 wearable sensors, 9 gateways, 5 hospitals
    and 2 rescue teams; each sensor binds one gateway, each used gateway
    notifies one hospital and one rescue team.

    Gateways accept 10 simultaneous sensors; hospital and rescue-team
    thresholds are pinned at 9 (one slot per gateway) so the layout is
    feasible for every seed.
    """
    rng = random.Random(seed)
    services: list[ServiceDescriptor] = []
    sensors = [f"A{i}" for i in range(1, 11)]
    gateways = [f"B{i}" for i in range(1, 10)]
    hospitals = [f"C{i}" for i in range(1, 6)]
    rescues = [f"D{i}" for i in range(1, 3)]
    for sid in sensors:
        services.append(ServiceDescriptor(sid, "tA", _draw_qos(rng), 1))
    for sid in gateways:
        services.append(ServiceDescriptor(sid, "tB", _draw_qos(rng), 10))
    for sid in hospitals:
        services.append(ServiceDescriptor(sid, "tC", _draw_qos(rng), 9))
    for sid in rescues:
        services.append(ServiceDescriptor(sid, "tD", _draw_qos(rng), 9))
    table: dict[tuple[str, str], float] = {}
    for a in sensors:
        for b in gateways:
            table[(a, b)] = _draw_link(rng)
    for b in gateways:
        for c in hospitals:
            table[(b, c)] = _draw_link(rng)
    for b in gateways:
        for d in rescues:
            table[(b, d)] = _draw_link(rng)
    template = ApplicationTemplate(
        (("tA", "tB"), ("tB", "tC"), ("tB", "tD")), (1, 1, 1)
    )
    return Scenario(services, template, MatrixLatency(table), [])


# -------------------------------------------------------- random test instances
#
# Small seeded instances for oracle cross-checks.  Values are quarter-integer
# (dyadic) so path sums are exact in floating point regardless of the order
# of addition; shapes and constraint mixes are chosen to keep the exhaustive
# search small while still hitting feasible and infeasible cases.


def _dyadic(rng: random.Random, low_quarters: int, high_quarters: int) -> float:
    return rng.randint(low_quarters, high_quarters) / 4.0


def generate_random_instance(
    seed: int, max_services: int = 12
) -> tuple[list[ServiceDescriptor], ApplicationTemplate, QoSMatrix]:
    """One small random instance: services, template, and a full link
    matrix over the template's type pairs."""
    rng = random.Random(seed)
    while True:
        layers = rng.choice([2, 2, 3, 3, 3])
        branch = layers == 3 and rng.random() < 0.25
        widths = [rng.randint(1, 3)]
        remaining = max_services - widths[0]
        body_shape: list[tuple[int, int]] = []  # (from layer index, to layer index)
        n_layers = layers + (1 if branch else 0)
        for _ in range(n_layers - 1):
            upper = max(1, min(4, remaining - (n_layers - 1 - len(widths))))
            widths.append(rng.randint(1, upper))
            remaining -= widths[-1]
        for i in range(layers - 1):
            body_shape.append((i, i + 1))
        if branch:
            body_shape.append((1, layers))

        constraints: list[Constraint] = []
        for _, to_layer in body_shape:
            if rng.random() < 0.3:
                constraints.append(ALL)
            else:
                constraints.append(rng.randint(1, widths[to_layer]))

        # Keep the exhaustive search small: candidate counts multiply over
        # binder nodes per edge, then over starts.  Non-start layers use
        # their full width as the binder count, an upper bound.
        per_start = 1
        for (from_layer, to_layer), constraint in zip(body_shape, constraints):
            n_choices = (
                1
                if isinstance(constraint, AllServices)
                else _binom(widths[to_layer], constraint)
            )
            binders = 1 if from_layer == 0 else widths[from_layer]
            per_start *= n_choices ** binders
        total = per_start ** widths[0]
        if total > 4000 or per_start > 200:
            continue

        types = [f"t{i + 1}" for i in range(n_layers)]
        services: list[ServiceDescriptor] = []
        for layer, width in enumerate(widths):
            for i in range(1, width + 1):
                services.append(
                    ServiceDescriptor(
                        f"S{layer + 1}x{i}",
                        types[layer],
                        _dyadic(rng, 4, 40),
                        rng.randint(1, 3),
                    )
                )
        body = tuple((types[a], types[b]) for a, b in body_shape)
        template = ApplicationTemplate(body, tuple(constraints))

        links = QoSMatrix()
        by_layer = [
            [s.id for s in services if s.type == types[layer]] for layer in range(n_layers)
        ]
        for a_layer, b_layer in body_shape:
            for a in by_layer[a_layer]:
                for b in by_layer[b_layer]:
                    links.set(a, b, _dyadic(rng, 1, 20))
        return services, template, links


def _binom(n: int, k: int) -> int:
    if k > n:
        return 10 ** 9  # forces a resample; the instance is unsatisfiable anyway
    out = 1
    for i in range(k):
        out = out * (n - i) // (i + 1)
    return out
