"""Comparison MACs: sender-initiated low-power listening and TDMA slots.

Both are deliberately small reconstructions: enough protocol to produce
the characteristic time budget of each family (B-MAC burns transmit time
on long preambles, L-MAC burns receive time listening to slot headers).
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

from .energy import RX, SLEEP, TX
from .engine import BROADCAST, DATA, HEADER, NS_PER_MS, PREAMBLE, MacLayer, Node, Packet, PhyConfig
from .errors import ConfigError, SimulationFault

# B-MAC modes
B_SLEEP = "SLEEP"
B_CHANNEL_SAMPLE = "CHANNEL_SAMPLE"
B_SEND_PREAMBLE = "SEND_PREAMBLE"
B_SEND_DATA = "SEND_DATA"
B_RECEIVE = "RECEIVE"

# L-MAC modes
L_SLEEP = "SLEEP"
L_LISTEN_SLOT_HEADER = "LISTEN_SLOT_HEADER"
L_SEND_IN_SLOT = "SEND_IN_SLOT"
L_RECEIVE_IN_SLOT = "RECEIVE_IN_SLOT"


def mac_rng(seed: int, node_id: int) -> random.Random:
    return random.Random(f"mac/{seed}/{node_id}")


@dataclass
class BmacConfig:
    check_interval_ms: float = 100.0
    preamble_ms: float = 110.0
    sample_ms: float = 1.0
    # random listen-before-send delay, uniform in [0, backoff_ms]
    backoff_ms: float = 10.0
    queue_capacity: int = 16

    def validate(self) -> list[str]:
        problems = []
        if not self.check_interval_ms > 0:
            problems.append("bmac check_interval_ms must be positive")
        if self.preamble_ms < self.check_interval_ms:
            problems.append(
                f"bmac preamble ({self.preamble_ms} ms) must cover the check interval ({self.check_interval_ms} ms)"
            )
        if not self.sample_ms > 0 or self.backoff_ms < 0:
            problems.append("bmac sample_ms must be positive and backoff_ms non-negative")
        return problems


class BmacNode(MacLayer):
    def __init__(self, node: Node, phy: PhyConfig, cfg: BmacConfig, rng: random.Random, sink: int | None = None):
        super().__init__(node)
        problems = cfg.validate()
        if problems:
            raise ConfigError("; ".join(problems), problems)
        self.phy = phy
        self.cfg = cfg
        self.rng = rng
        self.sink = sink
        self.mode = B_SLEEP
        self.sending = False
        self.pending: deque = deque()
        self.check_ns = round(cfg.check_interval_ms * NS_PER_MS)
        self.preamble_ns = round(cfg.preamble_ms * NS_PER_MS)
        self.sample_ns = round(cfg.sample_ms * NS_PER_MS)
        self.backoff_ns = round(cfg.backoff_ms * NS_PER_MS)
        self.listen_ns = self.preamble_ns + phy.airtime(DATA) + 2 * phy.propagation_ns
        self._recv_ev = None
        self.samples = 0
        self.detections = 0
        self.received = 0
        self.sent = 0
        self.dropped = 0

    def start(self) -> None:
        self.node.set_timer(self.rng.randrange(self.check_ns), "sample")

    def on_upper_data(self, payload) -> None:
        if len(self.pending) >= self.cfg.queue_capacity:
            self.pending.popleft()
            self.dropped += 1
        self.pending.append(payload)
        if self.mode == B_SLEEP:
            self._begin_send()

    def _begin_send(self) -> None:
        self.mode = B_CHANNEL_SAMPLE
        self.sending = True
        if self.radio.switch(RX):
            self._arm_cca()

    def _arm_cca(self) -> None:
        delay = self.rng.randint(0, self.backoff_ns) + self.sample_ns
        self.node.set_timer(delay, "cca")

    def on_timer(self, name, data) -> None:
        if name == "sample":
            self.node.set_timer(self.check_ns, "sample")
            if self.mode == B_SLEEP:
                self.samples += 1
                self.mode = B_CHANNEL_SAMPLE
                self.sending = False
                if self.radio.switch(RX):
                    self.node.set_timer(self.sample_ns, "sample_done")
        elif name == "sample_done":
            if self.sim.channel.busy(self.node.id):
                self.detections += 1
                self._receive()
            else:
                self._idle()
        elif name == "cca":
            if self.sim.channel.busy(self.node.id):
                self._arm_cca()
                return
            self.mode = B_SEND_PREAMBLE
            if self.radio.switch(TX):
                self._send_preamble()
        elif name == "recv_end":
            self._recv_ev = None
            if self.sim.channel.busy(self.node.id):
                self._receive()
            else:
                self._idle()
        else:
            raise SimulationFault(f"bmac: unknown timer {name}")

    def on_radio_ready(self, state) -> None:
        if state == RX and self.mode == B_CHANNEL_SAMPLE:
            if self.sending:
                self._arm_cca()
            else:
                self.node.set_timer(self.sample_ns, "sample_done")
        elif state == TX and self.mode == B_SEND_PREAMBLE:
            self._send_preamble()

    def _send_preamble(self) -> None:
        self.send(Packet(PREAMBLE, self.node.id, BROADCAST, self.preamble_ns))

    def on_tx_done(self, pkt) -> None:
        if pkt.kind == PREAMBLE:
            self.mode = B_SEND_DATA
            dest = self.sink if self.sink is not None else BROADCAST
            self.send(Packet(DATA, self.node.id, dest, self.phy.airtime(DATA), info={"payload": self.pending[0]}))
        elif pkt.kind == DATA:
            self.sent += 1
            self.pending.popleft()
            self._idle()

    def _receive(self) -> None:
        self.mode = B_RECEIVE
        self._recv_ev = self.node.set_timer(self.listen_ns, "recv_end")

    def on_packet(self, pkt) -> None:
        if self.mode != B_RECEIVE or pkt.kind != DATA:
            return
        if pkt.destination in (self.node.id, BROADCAST):
            self.received += 1
        self._recv_ev.cancelled = True
        self._recv_ev = None
        if self.sim.channel.busy(self.node.id):
            self._receive()
        else:
            self._idle()

    def _idle(self) -> None:
        self.sending = False
        if self.pending:
            self._begin_send()
        else:
            self.mode = B_SLEEP
            self.radio.switch(SLEEP)

    def counters(self) -> dict:
        return {
            "samples": self.samples,
            "detections": self.detections,
            "data_sent": self.sent,
            "data_received": self.received,
            "dropped": self.dropped,
            "queued": len(self.pending),
        }


@dataclass
class LmacConfig:
    frame_slots: int = 32
    slot_ms: float = 30.0
    # owner starts its header this long after the slot boundary
    header_offset_ms: float = 0.5
    # listeners give up on an unheard header after this long
    header_timeout_ms: float = 15.0
    queue_capacity: int = 16

    def validate(self) -> list[str]:
        problems = []
        if self.frame_slots < 1 or not self.slot_ms > 0:
            problems.append("lmac needs at least one slot of positive duration")
        if not 0 <= self.header_offset_ms < self.header_timeout_ms <= self.slot_ms:
            problems.append("lmac needs 0 <= header_offset_ms < header_timeout_ms <= slot_ms")
        return problems


def assign_slots(node_ids, frame_slots: int) -> dict[int, int]:
    ids = sorted(node_ids)
    if len(ids) > frame_slots:
        raise ConfigError(f"{len(ids)} nodes do not fit in a {frame_slots}-slot frame")
    return {n: k for k, n in enumerate(ids)}


class LmacNode(MacLayer):
    def __init__(self, node: Node, phy: PhyConfig, cfg: LmacConfig, own_slot: int, sink: int | None = None):
        super().__init__(node)
        problems = cfg.validate()
        if problems:
            raise ConfigError("; ".join(problems), problems)
        if not 0 <= own_slot < cfg.frame_slots:
            raise ConfigError(f"slot {own_slot} outside a {cfg.frame_slots}-slot frame")
        self.phy = phy
        self.cfg = cfg
        self.own_slot = own_slot
        self.sink = sink
        self.mode = L_SLEEP
        self.pending: deque = deque()
        self.slot_ns = round(cfg.slot_ms * NS_PER_MS)
        self.offset_ns = round(cfg.header_offset_ms * NS_PER_MS)
        self.header_timeout_ns = round(cfg.header_timeout_ms * NS_PER_MS)
        self.slot = -1
        self._slot_ev = None
        self._timeout_ev = None
        self.headers_heard = 0
        self.received = 0
        self.sent = 0
        self.dropped = 0
        self.own_slot_sends: list[int] = []

    def start(self) -> None:
        self.node.timer_at(self.sim.now, "slot")

    def on_upper_data(self, payload) -> None:
        if len(self.pending) >= self.cfg.queue_capacity:
            self.pending.popleft()
            self.dropped += 1
        self.pending.append(payload)

    def on_timer(self, name, data) -> None:
        if name == "slot":
            self._slot_boundary()
        elif name == "send_header":
            self._send_header()
        elif name == "slot_timeout":
            self._timeout_ev = None
            self._sleep()
        else:
            raise SimulationFault(f"lmac: unknown timer {name}")

    def _slot_boundary(self) -> None:
        self.slot = (self.slot + 1) % self.cfg.frame_slots
        self.node.set_timer(self.slot_ns, "slot")
        if self._timeout_ev is not None:
            self._timeout_ev.cancelled = True
            self._timeout_ev = None
        if self.slot == self.own_slot:
            self.mode = L_SEND_IN_SLOT
            self.own_slot_sends.append(self.sim.now // self.slot_ns)
            self.radio.switch(TX)
            self.node.set_timer(self.offset_ns, "send_header")
        else:
            self.mode = L_LISTEN_SLOT_HEADER
            self.radio.switch(RX)
            self._timeout_ev = self.node.set_timer(self.header_timeout_ns, "slot_timeout")

    def _send_header(self) -> None:
        if self.radio.state != TX:
            raise SimulationFault(f"lmac node {self.node.id}: radio not ready for header")
        dest = self.sink if (self.pending and self.sink is not None) else BROADCAST
        self.send(Packet(HEADER, self.node.id, dest, self.phy.airtime(HEADER), info={"slot": self.slot}))

    def on_tx_done(self, pkt) -> None:
        if pkt.kind == HEADER and pkt.destination != BROADCAST:
            self.send(Packet(DATA, self.node.id, pkt.destination, self.phy.airtime(DATA), info={"payload": self.pending[0]}))
        elif pkt.kind == DATA:
            self.pending.popleft()
            self.sent += 1
            self._sleep()
        else:
            self._sleep()

    def on_packet(self, pkt) -> None:
        if pkt.kind == HEADER and self.mode == L_LISTEN_SLOT_HEADER:
            self.headers_heard += 1
            if pkt.destination == self.node.id:
                self.mode = L_RECEIVE_IN_SLOT
            else:
                self._sleep()
        elif pkt.kind == DATA and self.mode == L_RECEIVE_IN_SLOT:
            self.received += 1
            self._sleep()

    def _sleep(self) -> None:
        if self._timeout_ev is not None:
            self._timeout_ev.cancelled = True
            self._timeout_ev = None
        self.mode = L_SLEEP
        self.radio.switch(SLEEP)

    def counters(self) -> dict:
        return {
            "headers_heard": self.headers_heard,
            "data_sent": self.sent,
            "data_received": self.received,
            "dropped": self.dropped,
            "queued": len(self.pending),
        }
