"""Deterministic discrete-event simulation of the peer network.

The simulator keeps a logically centralized registry of live peers with
per-peer views, a pending-message queue delivered in (receive time,
insertion order), and a configurable link latency model.  Link quality is
measured from the timestamps a message carries: the sender stamps the
moment it leaves, the receiver stamps the moment it arrives, and the link
time is their difference.

All mutation happens through method calls on a single thread; snapshots
handed to callers (records, messages, trace lines) are immutable values.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from heapq import heappop, heappush
from typing import Iterable, Mapping

from .errors import DuplicateId, LatencyUndefined, PeerUnknown
from .model import ServiceDescriptor


@dataclass(frozen=True)
class DiscoveryRecord:
    """Self-description a peer broadcasts: its service plus free-form
    attributes (e.g. ``required_memory``)."""

    service: ServiceDescriptor
    announced_at: float = 0.0
    attributes: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        attrs = self.attributes
        if isinstance(attrs, Mapping):
            attrs = tuple(sorted((str(k), str(v)) for k, v in attrs.items()))
        else:
            attrs = tuple(sorted((str(k), str(v)) for k, v in attrs))
        keys = [k for k, _ in attrs]
        if any(not k for k in keys):
            raise ValueError("attribute keys must be non-empty")
        if len(set(keys)) != len(keys):
            raise ValueError("attribute keys must be unique")
        object.__setattr__(self, "attributes", attrs)

    @property
    def id(self) -> str:
        return self.service.id


class MessageKind(Enum):
    PROBE = "probe"
    PROBE_REPLY = "probe_reply"
    REQUEST = "request"
    RESPONSE = "response"
    ANNOUNCE = "announce"
    WITHDRAW = "withdraw"


@dataclass(frozen=True)
class TimestampedMessage:
    """A message stamped on departure (``t_sent``) and arrival (``t_received``)."""

    from_id: str
    to_id: str
    kind: MessageKind
    t_sent: float
    t_received: float
    payload: bytes = b""

    def __post_init__(self) -> None:
        if self.t_received < self.t_sent:
            raise ValueError("t_received must be >= t_sent")


@dataclass(frozen=True)
class UniformLatency:
    """Every link takes exactly ``base_ms``."""

    base_ms: float

    def __post_init__(self) -> None:
        if self.base_ms < 0:
            raise ValueError("base_ms must be >= 0")

    def sample(self, from_id: str, to_id: str) -> float:
        return self.base_ms


class MatrixLatency:
    """Per-pair latencies from an explicit table."""

    def __init__(self, entries: Mapping[tuple[str, str], float]):
        table: dict[tuple[str, str], float] = {}
        for (a, b), value in entries.items():
            value = float(value)
            if value < 0:
                raise ValueError(f"latency for ({a!r}, {b!r}) must be >= 0")
            table[(a, b)] = value
        self.entries = table

    def sample(self, from_id: str, to_id: str) -> float:
        try:
            return self.entries[(from_id, to_id)]
        except KeyError:
            raise LatencyUndefined(from_id, to_id) from None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MatrixLatency):
            return NotImplemented
        return self.entries == other.entries

    def __repr__(self) -> str:
        return f"MatrixLatency({len(self.entries)} entries)"


class SeededLatency:
    """``base_ms`` plus reproducible jitter drawn from a seeded generator.

    Identical seeds reproduce identical sample sequences; samples are
    clamped at zero so latencies stay non-negative.
    """

    def __init__(self, base_ms: float, jitter_ms: float, seed: int):
        if base_ms < 0:
            raise ValueError("base_ms must be >= 0")
        if jitter_ms < 0:
            raise ValueError("jitter_ms must be >= 0")
        self.base_ms = float(base_ms)
        self.jitter_ms = float(jitter_ms)
        self.seed = int(seed)
        self._rng = random.Random(self.seed)

    def sample(self, from_id: str, to_id: str) -> float:
        value = self.base_ms + self._rng.uniform(-self.jitter_ms, self.jitter_ms)
        return max(0.0, value)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SeededLatency):
            return NotImplemented
        return (self.base_ms, self.jitter_ms, self.seed) == (
            other.base_ms,
            other.jitter_ms,
            other.seed,
        )

    def __repr__(self) -> str:
        return f"SeededLatency(base_ms={self.base_ms}, jitter_ms={self.jitter_ms}, seed={self.seed})"


LatencyModel = UniformLatency | MatrixLatency | SeededLatency


class Simulator:
    """Single-threaded peer-network simulator with one logical clock.

    * ``announce``/``withdraw`` maintain the registry of live peers;
      announcements become visible to views after ``announce_latency_ms``.
    * ``send``/``advance`` move timestamped messages; delivery order is
      (receive time, insertion order) and messages to withdrawn peers are
      dropped.
    * ``measure_link`` stamps a message across a link and returns the
      receive/send timestamp difference, which equals the modeled latency
      by construction.
    * ``set_partitions`` optionally restricts which peers can see each
      other (range modeling); by default every live peer sees every other.

    Every action appends one record to the event trace, so identical
    scenarios with identical seeds serialize to byte-identical logs.
    """

    def __init__(
        self,
        latency: LatencyModel | None = None,
        *,
        announce_latency_ms: float = 0.0,
        trace: bool = True,
    ):
        if announce_latency_ms < 0:
            raise ValueError("announce_latency_ms must be >= 0")
        self.clock = 0.0
        self.latency = latency if latency is not None else UniformLatency(0.0)
        self.announce_latency_ms = float(announce_latency_ms)
        self._records: dict[str, DiscoveryRecord] = {}
        self._visible_from: dict[str, float] = {}
        self._pending: list[tuple[float, int, TimestampedMessage]] = []
        self._sequence = 0
        self._groups: dict[str, int] | None = None
        self._overrides: dict[tuple[str, str], float] = {}
        self._trace_enabled = trace
        self._trace: list[dict] = []

    # ------------------------------------------------------------------ registry

    def announce(
        self,
        service: ServiceDescriptor | DiscoveryRecord,
        at: float | None = None,
        attributes: Mapping[str, str] | Iterable[tuple[str, str]] = (),
    ) -> DiscoveryRecord:
        """Register a peer's self-description; visible after the
        configured propagation latency."""
        if isinstance(service, DiscoveryRecord):
            record = service
        else:
            when = self.clock if at is None else float(at)
            record = DiscoveryRecord(service, when, tuple(dict(attributes).items()))
        if record.id in self._records:
            raise DuplicateId(f"service {record.id!r} is already announced")
        self._records[record.id] = record
        self._visible_from[record.id] = record.announced_at + self.announce_latency_ms
        self.log_event(
            "announce",
            record.id,
            None,
            t=record.announced_at,
            type=record.service.type,
            qos_ms=record.service.qos_nominal,
            threshold=record.service.threshold,
        )
        return record

    def withdraw(self, service_id: str, at: float | None = None) -> None:
        """Remove a peer; it disappears from every later view and any
        message still in flight to it is dropped on delivery."""
        if service_id not in self._records:
            raise PeerUnknown(f"service {service_id!r} is not live")
        del self._records[service_id]
        del self._visible_from[service_id]
        self.log_event("withdraw", service_id, None, t=self.clock if at is None else float(at))

    def is_live(self, service_id: str) -> bool:
        return service_id in self._records

    def live_services(self, at: float | None = None) -> list[ServiceDescriptor]:
        """Descriptors of all peers visible at ``at`` (default: now), by id."""
        when = self.clock if at is None else float(at)
        out = [
            rec.service
            for sid, rec in self._records.items()
            if self._visible_from[sid] <= when
        ]
        out.sort(key=lambda s: s.id)
        return out

    def surrounding_services(
        self, observer_id: str, at: float | None = None
    ) -> list[DiscoveryRecord]:
        """Every live record the observer can currently see, excluding its
        own; sorted by id."""
        if observer_id not in self._records:
            raise PeerUnknown(f"observer {observer_id!r} is not live")
        when = self.clock if at is None else float(at)
        out = [
            rec
            for sid, rec in self._records.items()
            if sid != observer_id
            and self._visible_from[sid] <= when
            and self._can_see(observer_id, sid)
        ]
        out.sort(key=lambda r: r.id)
        return out

    def visible_peers(self, observer_id: str, at: float | None = None) -> set[str]:
        return {rec.id for rec in self.surrounding_services(observer_id, at)}

    def set_partitions(self, groups: Iterable[Iterable[str]] | None) -> None:
        """Restrict visibility to peers sharing a group; peers assigned to
        no group see nothing.  ``None`` restores full visibility."""
        if groups is None:
            self._groups = None
            return
        assignment: dict[str, int] = {}
        for index, group in enumerate(groups):
            for sid in group:
                assignment[sid] = index
        self._groups = assignment

    def _can_see(self, observer_id: str, target_id: str) -> bool:
        if self._groups is None:
            return True
        a = self._groups.get(observer_id)
        b = self._groups.get(target_id)
        return a is not None and a == b

    # ------------------------------------------------------------------ links

    def degrade_link(self, from_id: str, to_id: str, new_ms: float) -> None:
        """Override one directed link's latency from now on."""
        new_ms = float(new_ms)
        if new_ms < 0:
            raise ValueError("link latency must be >= 0")
        self._overrides[(from_id, to_id)] = new_ms
        self.log_event("link_degrade", from_id, to_id, new_ms=new_ms)

    def link_latency(
        self, from_id: str, to_id: str, model: LatencyModel | None = None
    ) -> float:
        override = self._overrides.get((from_id, to_id))
        if override is not None:
            return override
        chosen = model if model is not None else self.latency
        return chosen.sample(from_id, to_id)

    def measure_link(
        self,
        from_id: str,
        to_id: str,
        at: float | None = None,
        model: LatencyModel | None = None,
    ) -> float:
        """Measured transfer time of one directed link.

        Simulates a stamped message: it leaves ``from_id`` at ``t_sent``
        and reaches ``to_id`` at ``t_sent`` plus the modeled latency; the
        returned value is the timestamp difference.
        """
        for sid in (from_id, to_id):
            if sid not in self._records:
                raise PeerUnknown(f"service {sid!r} is not live")
        t_sent = self.clock if at is None else float(at)
        link_ms = self.link_latency(from_id, to_id, model)
        self.log_event(
            "measure",
            from_id,
            to_id,
            t=t_sent,
            t_sent=t_sent,
            t_received=t_sent + link_ms,
            link_ms=link_ms,
        )
        return link_ms

    # ------------------------------------------------------------------ messages

    def send(
        self,
        from_id: str,
        to_id: str,
        kind: MessageKind = MessageKind.REQUEST,
        payload: bytes = b"",
        at: float | None = None,
    ) -> TimestampedMessage:
        """Queue a message for delivery after the modeled link latency."""
        for sid in (from_id, to_id):
            if sid not in self._records:
                raise PeerUnknown(f"service {sid!r} is not live")
        t_sent = self.clock if at is None else float(at)
        message = TimestampedMessage(
            from_id, to_id, kind, t_sent, t_sent + self.link_latency(from_id, to_id), payload
        )
        heappush(self._pending, (message.t_received, self._sequence, message))
        self._sequence += 1
        self.log_event(
            "send",
            from_id,
            to_id,
            t=t_sent,
            message=kind.value,
            t_received=message.t_received,
        )
        return message

    def advance(self, until: float) -> list[TimestampedMessage]:
        """Deliver everything due by ``until`` and move the clock there.

        Delivery order is (receive time, insertion order); the clock never
        moves backwards.
        """
        until = float(until)
        if until < self.clock:
            raise ValueError(f"cannot advance clock backwards ({until} < {self.clock})")
        delivered: list[TimestampedMessage] = []
        while self._pending and self._pending[0][0] <= until:
            _, _, message = heappop(self._pending)
            if message.to_id not in self._records:
                self.log_event(
                    "drop",
                    message.from_id,
                    message.to_id,
                    t=message.t_received,
                    message=message.kind.value,
                )
                continue
            delivered.append(message)
            self.log_event(
                "deliver",
                message.from_id,
                message.to_id,
                t=message.t_received,
                message=message.kind.value,
            )
        self.clock = until
        return delivered

    # ------------------------------------------------------------------ trace

    def log_event(
        self,
        kind: str,
        from_id: str | None = None,
        to_id: str | None = None,
        t: float | None = None,
        **detail,
    ) -> None:
        if not self._trace_enabled:
            return
        self._trace.append(
            {
                "t": self.clock if t is None else t,
                "kind": kind,
                "from": from_id,
                "to": to_id,
                "detail": detail,
            }
        )

    def trace_records(self) -> list[dict]:
        return list(self._trace)

    def trace_jsonl(self) -> str:
        """The event trace as line-delimited JSON (one record per line)."""
        lines = [json.dumps(rec, sort_keys=True) for rec in self._trace]
        return "\n".join(lines) + ("\n" if lines else "")

    def write_trace(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.trace_jsonl())
