"""The self-maintenance loop: contract checking and re-assembly on churn.

A committed assembly stays in place until an event invalidates it or could
improve it; the reaction is always a full re-run of the assembly pipeline
on the current live set (an atomic swap, never an in-place patch).  An
infeasible re-run leaves the system without a committed assembly, waiting
for a restorative event.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .assembler import DEFAULT_COMBINATION_BUDGET, AssemblyResult, assemble
from .errors import (
    CombinationBudgetExceeded,
    Infeasible,
    InsufficientServices,
    NoStartingService,
    TemplateInvalid,
)
from .model import ApplicationTemplate, ServiceDescriptor, validate_template
from .netsim import Simulator


class ContractStatus(Enum):
    IN_CONTRACT = "InContract"
    OUT_CONTRACT = "OutContract"


class ContractCause(Enum):
    RESPONSE_TIME_EXCEEDED = "ResponseTimeExceeded"
    THRESHOLD_EXCEEDED = "ThresholdExceeded"
    INJECTED = "Injected"


@dataclass(frozen=True)
class ContractNotification:
    """Emitted by a service's own monitor: behavior conforms to the
    contract or does not, with the cause when it does not."""

    service_id: str
    at: float
    status: ContractStatus
    cause: ContractCause | None = None

    def __post_init__(self) -> None:
        if self.status is ContractStatus.OUT_CONTRACT and self.cause is None:
            raise ValueError("an OutContract notification requires a cause")
        if self.status is ContractStatus.IN_CONTRACT and self.cause is not None:
            raise ValueError("an InContract notification carries no cause")


def check_contract(
    service: ServiceDescriptor,
    observed_response_ms: float,
    inflight: int,
    *,
    tolerance: float = 0.0,
    at: float = 0.0,
) -> ContractNotification:
    """Compare observed behavior against the service's own contract.

    Load is checked first: more simultaneous bindings than the threshold
    breaks the contract regardless of timing.  Otherwise the observed
    response time must stay within the nominal value (scaled by
    ``1 + tolerance``; the default is strict).  Boundary values comply.
    """
    if observed_response_ms < 0:
        raise ValueError("observed_response_ms must be >= 0")
    if inflight < 0:
        raise ValueError("inflight must be >= 0")
    if inflight > service.threshold:
        return ContractNotification(
            service.id, at, ContractStatus.OUT_CONTRACT, ContractCause.THRESHOLD_EXCEEDED
        )
    if observed_response_ms > service.qos_nominal * (1.0 + tolerance):
        return ContractNotification(
            service.id, at, ContractStatus.OUT_CONTRACT, ContractCause.RESPONSE_TIME_EXCEEDED
        )
    return ContractNotification(service.id, at, ContractStatus.IN_CONTRACT)


class EventKind(Enum):
    SERVICE_APPEARS = "service_appears"
    SERVICE_DISAPPEARS = "service_disappears"
    LINK_DEGRADES = "link_degrades"
    INJECT_OUT_CONTRACT = "inject_out_contract"


@dataclass(frozen=True)
class ScenarioEvent:
    """One timed change to the world; build via the factory methods."""

    at: float
    kind: EventKind
    service: ServiceDescriptor | None = None
    service_id: str | None = None
    link_from: str | None = None
    link_to: str | None = None
    new_ms: float | None = None

    def __post_init__(self) -> None:
        if self.kind is EventKind.SERVICE_APPEARS and self.service is None:
            raise ValueError("service_appears needs a descriptor")
        if self.kind in (EventKind.SERVICE_DISAPPEARS, EventKind.INJECT_OUT_CONTRACT):
            if not self.service_id:
                raise ValueError(f"{self.kind.value} needs a service id")
        if self.kind is EventKind.LINK_DEGRADES:
            if not self.link_from or not self.link_to or self.new_ms is None:
                raise ValueError("link_degrades needs from, to, and new_ms")

    @classmethod
    def appears(cls, at: float, service: ServiceDescriptor) -> "ScenarioEvent":
        return cls(at, EventKind.SERVICE_APPEARS, service=service)

    @classmethod
    def disappears(cls, at: float, service_id: str) -> "ScenarioEvent":
        return cls(at, EventKind.SERVICE_DISAPPEARS, service_id=service_id)

    @classmethod
    def link_degrades(
        cls, at: float, link_from: str, link_to: str, new_ms: float
    ) -> "ScenarioEvent":
        return cls(
            at,
            EventKind.LINK_DEGRADES,
            link_from=link_from,
            link_to=link_to,
            new_ms=new_ms,
        )

    @classmethod
    def inject_out_contract(cls, at: float, service_id: str) -> "ScenarioEvent":
        return cls(at, EventKind.INJECT_OUT_CONTRACT, service_id=service_id)


@dataclass(frozen=True)
class TimelineEntry:
    """One (re-)assembly attempt: when, why, and what came of it."""

    at: float
    trigger: str
    result: AssemblyResult | None
    reason: str | None = None
    combinations_tested: int = 0

    @property
    def feasible(self) -> bool:
        return self.result is not None

    def to_json_obj(self) -> dict:
        result = self.result
        return {
            "t": self.at,
            "trigger": self.trigger,
            "feasible": result is not None,
            "n_nodes": len(result.assembly.nodes) if result else 0,
            "n_edges": len(result.assembly.edges) if result else 0,
            "combinations_tested": self.combinations_tested,
        }


def timeline_jsonl(timeline: Iterable[TimelineEntry]) -> str:
    lines = [json.dumps(entry.to_json_obj(), sort_keys=True) for entry in timeline]
    return "\n".join(lines) + ("\n" if lines else "")


def inflight_load(result: AssemblyResult) -> dict[str, int]:
    """Distinct inbound bindings per service of a committed assembly,
    recounted from the graph itself (zero for pure binders)."""
    return result.assembly.in_degrees()


def run_scenario(
    initial_services: Iterable[ServiceDescriptor],
    template: ApplicationTemplate,
    events: Iterable[ScenarioEvent],
    net: Simulator,
    *,
    budget: int = DEFAULT_COMBINATION_BUDGET,
) -> list[TimelineEntry]:
    """Assemble at time zero, then replay events and re-assemble when one
    touches the committed assembly.

    Appearances always trigger a re-run (a new service may be better);
    disappearances, link degradations, and contract violations only when
    the affected service or link is part of the committed assembly.  A
    service reported out of contract is left out of the re-run it
    triggers, but stays available afterwards.  Infeasible re-runs are
    recorded and the loop continues.
    """
    events = list(events)
    for earlier, later in zip(events, events[1:]):
        if later.at < earlier.at:
            raise ValueError("events must be sorted by time")
    report = validate_template(template)
    if not report.ok:
        raise TemplateInvalid(report)

    live: dict[str, ServiceDescriptor] = {}
    for descriptor in sorted(initial_services, key=lambda s: s.id):
        if descriptor.id in live:
            raise ValueError(f"duplicate service id {descriptor.id!r}")
        if not net.is_live(descriptor.id):
            net.announce(descriptor)
        live[descriptor.id] = descriptor

    timeline: list[TimelineEntry] = []
    committed: AssemblyResult | None = None

    def attempt(at: float, trigger: str, exclude: str | None = None) -> None:
        nonlocal committed
        pool = [d for d in live.values() if d.id != exclude]
        try:
            result = assemble(pool, template, net, budget=budget)
            committed = result
            entry = TimelineEntry(at, trigger, result, None, result.combinations_tested)
        except Infeasible as exc:
            committed = None
            entry = TimelineEntry(at, trigger, None, str(exc), exc.combinations_tested)
        except (InsufficientServices, NoStartingService, CombinationBudgetExceeded) as exc:
            committed = None
            entry = TimelineEntry(at, trigger, None, str(exc), 0)
        timeline.append(entry)
        net.log_event(
            "reassembly",
            None,
            None,
            t=at,
            trigger=trigger,
            feasible=entry.feasible,
        )

    attempt(0.0, "initial")

    for event in events:
        if event.at > net.clock:
            net.advance(event.at)
        if event.kind is EventKind.SERVICE_APPEARS:
            descriptor = event.service
            assert descriptor is not None
            net.announce(descriptor, at=event.at)
            live[descriptor.id] = descriptor
            attempt(event.at, f"service_appears:{descriptor.id}")
        elif event.kind is EventKind.SERVICE_DISAPPEARS:
            sid = event.service_id
            assert sid is not None
            if sid not in live:
                raise ValueError(f"event at t={event.at} removes unknown service {sid!r}")
            used = committed is not None and sid in committed.assembly.nodes
            net.withdraw(sid, at=event.at)
            del live[sid]
            if used:
                attempt(event.at, f"service_disappears:{sid}")
        elif event.kind is EventKind.LINK_DEGRADES:
            assert event.link_from is not None and event.link_to is not None
            assert event.new_ms is not None
            net.degrade_link(event.link_from, event.link_to, event.new_ms)
            used = (
                committed is not None
                and (event.link_from, event.link_to) in committed.assembly.edges
            )
            if used:
                attempt(event.at, f"link_degrades:{event.link_from}->{event.link_to}")
        elif event.kind is EventKind.INJECT_OUT_CONTRACT:
            sid = event.service_id
            assert sid is not None
            if sid not in live:
                raise ValueError(f"event at t={event.at} flags unknown service {sid!r}")
            notification = ContractNotification(
                sid, event.at, ContractStatus.OUT_CONTRACT, ContractCause.INJECTED
            )
            net.log_event(
                "out_contract",
                sid,
                None,
                t=event.at,
                status=notification.status.value,
                cause=notification.cause.value,
            )
            used = committed is not None and sid in committed.assembly.nodes
            if used:
                attempt(event.at, f"out_contract:{sid}", exclude=sid)
    return timeline
