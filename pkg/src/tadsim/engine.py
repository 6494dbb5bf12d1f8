"""Deterministic discrete-event core.

Simulated time is an integer count of nanoseconds. Events are ordered by
``(time, seq)`` where ``seq`` is a global insertion counter, so runs replay
exactly. The channel is an ideal shared medium: a packet reaches a listener
iff the listener's radio was in RX for the whole airtime and no other
transmission audible at a common listener overlapped it.
"""

from __future__ import annotations

import heapq
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any

from .energy import OFF, RX, SLEEP, SWITCHING, TX, EnergyLedger, PowerProfile
from .errors import SimulationFault

log = logging.getLogger(__name__)

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000

TIMER = "timer"
DELIVERY = "delivery"
RADIO_SWITCH_DONE = "radio_switch_done"
TX_DONE = "tx_done"
UPPER_DATA = "upper_data"

BROADCAST = -1

WB = "WB"
DATA = "DATA"
ACK = "ACK"
PREAMBLE = "PREAMBLE"
HEADER = "HEADER"


def ms(value: float) -> int:
    return round(value * NS_PER_MS)


@dataclass
class PhyConfig:
    """Packet sizes (bytes), bitrate and radio timing."""

    bitrate: float = 250_000.0
    wb_bytes: int = 8
    data_bytes: int = 16
    ack_bytes: int = 8
    header_bytes: int = 8
    propagation_ns: int = 1 * NS_PER_US
    switch_ns: int = 200 * NS_PER_US

    def airtime_ns(self, nbytes: int) -> int:
        return round(nbytes * 8 / self.bitrate * NS_PER_S)

    def airtime(self, kind: str) -> int:
        size = {WB: self.wb_bytes, DATA: self.data_bytes, ACK: self.ack_bytes, HEADER: self.header_bytes}[kind]
        return self.airtime_ns(size)


@dataclass
class Packet:
    kind: str
    source: int
    destination: int
    airtime: int
    target: int | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.airtime <= 0:
            raise SimulationFault(f"packet airtime must be positive, got {self.airtime}")
        if self.kind == WB and self.target is None:
            raise SimulationFault("wake-up beacon without a target id")


class SimEvent:
    __slots__ = ("time", "seq", "kind", "target", "payload", "cancelled")

    def __init__(self, time, seq, kind, target, payload):
        self.time = time
        self.seq = seq
        self.kind = kind
        self.target = target
        self.payload = payload
        self.cancelled = False

    def __repr__(self):
        return f"SimEvent(t={self.time}, seq={self.seq}, {self.kind}, node={self.target})"


class Radio:
    """Transceiver state with residency bookkeeping.

    Entering RX or TX goes through SWITCHING for ``switch_ns``; dropping to
    SLEEP or OFF is immediate.
    """

    def __init__(self, node: Node, ledger: EnergyLedger, switch_ns: int, initial: str = SLEEP):
        self.node = node
        self.ledger = ledger
        self.switch_ns = switch_ns
        self.state = initial
        self.since = 0
        self.switch_target: str | None = None
        self._switch_event: SimEvent | None = None

    def _enter(self, state: str) -> None:
        now = self.node.sim.now
        self.ledger.accrue(self.state, now - self.since)
        self.state = state
        self.since = now

    def switch(self, target: str) -> bool:
        """Request ``target``; return True if already there (no callback follows)."""
        if target not in (OFF, SLEEP, RX, TX):
            raise SimulationFault(f"cannot switch radio to {target}")
        if self.state == SWITCHING:
            if target == self.switch_target:
                return False
            self._switch_event.cancelled = True
            self._switch_event = None
            self.switch_target = None
        elif self.state == target:
            return True
        if target in (SLEEP, OFF):
            self._enter(target)
            return True
        self._enter(SWITCHING)
        self.switch_target = target
        self._switch_event = self.node.sim.after(self.switch_ns, RADIO_SWITCH_DONE, self.node.id, target)
        return False

    def complete_switch(self, target: str) -> None:
        if self.state != SWITCHING or self.switch_target != target:
            raise SimulationFault(f"node {self.node.id}: stray switch completion to {target}")
        self.switch_target = None
        self._switch_event = None
        self._enter(target)

    def settle(self, now: int) -> None:
        """Accrue residency up to ``now`` without changing state."""
        self.ledger.accrue(self.state, now - self.since)
        self.since = now


class _Flight:
    __slots__ = ("packet", "start", "end", "listeners", "corrupted")

    def __init__(self, packet, start, end, listeners):
        self.packet = packet
        self.start = start
        self.end = end
        self.listeners = listeners
        self.corrupted = False


class Channel:
    def __init__(self, sim: Simulator, propagation_ns: int):
        self.sim = sim
        self.propagation_ns = propagation_ns
        self.adjacency: dict[int, frozenset[int]] = {}
        self.in_flight: list[_Flight] = []
        self.counters = Counter(transmitted=0, delivered=0, corrupted=0, undeliverable=0, collisions=0, receptions=0)
        self.by_kind: Counter = Counter()

    def connect(self, a: int, b: int) -> None:
        self.adjacency[a] = self.adjacency.get(a, frozenset()) | {b}
        self.adjacency[b] = self.adjacency.get(b, frozenset()) | {a}

    def transmit(self, source: int, pkt: Packet) -> None:
        sim = self.sim
        node = sim.nodes[source]
        if node.radio.state != TX:
            raise SimulationFault(f"node {source} transmits {pkt.kind} with radio in {node.radio.state}")
        now = sim.now
        flight = _Flight(pkt, now, now + pkt.airtime, self.adjacency.get(source, frozenset()))
        live = []
        for other in self.in_flight:
            if other.end + self.propagation_ns <= now:
                continue
            live.append(other)
            if other.end > now and other.listeners & flight.listeners:
                self.counters["collisions"] += 1
                other.corrupted = True
                flight.corrupted = True
        live.append(flight)
        self.in_flight = live
        self.counters["transmitted"] += 1
        self.by_kind[pkt.kind] += 1
        sim.after(pkt.airtime, TX_DONE, source, pkt)
        sim.after(pkt.airtime + self.propagation_ns, DELIVERY, source, flight)

    def finish(self, flight: _Flight) -> None:
        sim = self.sim
        if flight.corrupted:
            self.counters["corrupted"] += 1
            log.debug("t=%d collision destroyed %s from %d", sim.now, flight.packet.kind, flight.packet.source)
            return
        arrive = flight.start + self.propagation_ns
        got = []
        for nid in sorted(flight.listeners):
            radio = sim.nodes[nid].radio
            if radio.state == RX and radio.since <= arrive:
                got.append(nid)
        if not got:
            self.counters["undeliverable"] += 1
            return
        self.counters["delivered"] += 1
        for nid in got:
            self.counters["receptions"] += 1
            sim.nodes[nid].mac.on_packet(flight.packet)

    def busy(self, node_id: int) -> bool:
        """True if a transmission is currently audible at ``node_id``."""
        now = self.sim.now
        p = self.propagation_ns
        for f in self.in_flight:
            if node_id in f.listeners and f.start + p <= now < f.end + p:
                return True
        return False


class MacLayer:
    """Base for MAC state machines hosted on a node; handlers default to no-ops."""

    def __init__(self, node: Node):
        self.node = node
        self.sim = node.sim
        self.radio = node.radio
        node.mac = self

    def start(self) -> None:
        pass

    def on_upper_data(self, payload) -> None:
        pass

    def on_timer(self, name: str, data) -> None:
        pass

    def on_radio_ready(self, state: str) -> None:
        pass

    def on_packet(self, pkt: Packet) -> None:
        pass

    def on_tx_done(self, pkt: Packet) -> None:
        pass

    def send(self, pkt: Packet) -> None:
        self.sim.channel.transmit(self.node.id, pkt)

    def counters(self) -> dict:
        return {}


class Node:
    def __init__(self, sim: Simulator, node_id: int, profile: PowerProfile, switch_ns: int):
        self.sim = sim
        self.id = node_id
        self.ledger = EnergyLedger(profile)
        self.radio = Radio(self, self.ledger, switch_ns)
        self.mac = None
        self.traffic = None
        self.arrivals = 0

    def set_timer(self, delay_ns: int, name: str, data: Any = None) -> SimEvent:
        return self.sim.after(delay_ns, TIMER, self.id, (name, data))

    def timer_at(self, time_ns: int, name: str, data: Any = None) -> SimEvent:
        return self.sim.schedule(time_ns, TIMER, self.id, (name, data))


class Simulator:
    def __init__(self, propagation_ns: int = NS_PER_US, max_stall_events: int = 10**7):
        self.now = 0
        self._queue: list = []
        self._seq = 0
        self.nodes: dict[int, Node] = {}
        self.channel = Channel(self, propagation_ns)
        self.max_stall_events = max_stall_events
        self.executed = 0

    def add_node(self, node: Node) -> Node:
        self.nodes[node.id] = node
        return node

    def schedule(self, time: int, kind: str, target: int, payload: Any = None) -> SimEvent:
        if time < self.now:
            raise SimulationFault(f"event {kind} for node {target} scheduled at {time} < clock {self.now}")
        ev = SimEvent(time, self._seq, kind, target, payload)
        self._seq += 1
        heapq.heappush(self._queue, (time, ev.seq, ev))
        return ev

    def after(self, delay: int, kind: str, target: int, payload: Any = None) -> SimEvent:
        return self.schedule(self.now + delay, kind, target, payload)

    def run_until(self, t_end: int) -> None:
        if t_end <= 0:
            raise SimulationFault("horizon must be positive")
        queue = self._queue
        stall = 0
        while queue and queue[0][0] <= t_end:
            time, _, ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            if time == self.now:
                stall += 1
                if stall > self.max_stall_events:
                    raise SimulationFault(f"livelock: {stall} events at t={time} without clock advance")
            else:
                stall = 0
            self.now = time
            self.executed += 1
            self._dispatch(ev)
        self.now = t_end
        for node in self.nodes.values():
            node.radio.settle(t_end)

    def _dispatch(self, ev: SimEvent) -> None:
        kind = ev.kind
        if kind == DELIVERY:
            self.channel.finish(ev.payload)
            return
        node = self.nodes[ev.target]
        if kind == TIMER:
            name, data = ev.payload
            node.mac.on_timer(name, data)
        elif kind == TX_DONE:
            node.mac.on_tx_done(ev.payload)
        elif kind == RADIO_SWITCH_DONE:
            node.radio.complete_switch(ev.payload)
            node.mac.on_radio_ready(ev.payload)
        elif kind == UPPER_DATA:
            node.arrivals += 1
            nxt = node.traffic.next_arrival()
            if nxt is not None:
                self.schedule(nxt, UPPER_DATA, node.id, nxt)
            node.mac.on_upper_data(ev.payload)
        else:
            raise SimulationFault(f"unknown event kind {kind}")
