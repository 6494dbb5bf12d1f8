"""TAD-MAC receive-node and transmit-node state machines.

The coordinator keeps one wake-up schedule entry and one TSR per
transmitter. At each wake-up it beacons the transmitter with the nearest
wake time, records 1 (data came back) or 0 (timeout) in that transmitter's
register, and re-plans that transmitter's next wake-up with the adaptation
law. Transmitters hold data until a beacon carrying their own id arrives.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

from . import adaptive
from .adaptive import AdaptParams, TsrBank
from .energy import RX, SLEEP, TX
from .engine import ACK, BROADCAST, DATA, NS_PER_MS, WB, MacLayer, Node, Packet, PhyConfig
from .errors import SimulationFault

log = logging.getLogger(__name__)

# receiver modes
R_SLEEP = "SLEEP"
R_CCA = "CCA"
R_SEND_WB = "SEND_WB"
R_WAIT_DATA = "WAIT_DATA"
R_SEND_ACK = "SEND_ACK"

# transmitter modes
T_SLEEP = "SLEEP"
T_WAIT_WB = "WAIT_WB"
T_SEND_DATA = "SEND_DATA"
T_WAIT_ACK = "WAIT_ACK"


@dataclass
class TadmacConfig:
    adapt: AdaptParams = field(default_factory=AdaptParams)
    tsr_length: int = 8
    tsr_init: str = "alternating"
    error_policy: str = "zero"
    initial_interval_ms: float = 100.0
    cca_ms: float = 0.128
    queue_capacity: int = 16
    max_retries: int = 3
    # transmitter sleeps until this long before the beacon time announced
    # in the last ACK; None keeps the radio listening from data arrival
    tx_guard_ms: float | None = 5.0
    # ... and gives up this long after it, sleeping until the next predicted poll
    tx_hold_ms: float = 10.0


@dataclass
class WakeupEntry:
    next_wake: int
    interval: float
    history: list = field(default_factory=list)


def select_target(entries: dict[int, WakeupEntry]) -> int:
    """Neighbour with the nearest wake-up time; ties go to the lowest id."""
    return min(entries, key=lambda n: (entries[n].next_wake, n))


class TadmacReceiver(MacLayer):
    def __init__(self, node: Node, neighbours, phy: PhyConfig, cfg: TadmacConfig):
        super().__init__(node)
        self.phy = phy
        self.cfg = cfg
        self.params = cfg.adapt
        self.error_fn = adaptive.resolve_error_policy(cfg.error_policy)
        self.bank = TsrBank(neighbours, cfg.tsr_length, cfg.tsr_init)
        init_ns = round(cfg.initial_interval_ms * NS_PER_MS)
        self.schedule = {
            n: WakeupEntry(init_ns, cfg.initial_interval_ms, [cfg.initial_interval_ms]) for n in self.bank.neighbours()
        }
        self.mode = R_SLEEP
        self.target: int | None = None
        self.cca_ns = round(cfg.cca_ms * NS_PER_MS)
        wb, dat = phy.airtime(WB), phy.airtime(DATA)
        self.data_timeout_ns = 2 * (wb + phy.propagation_ns + dat)
        self._wake_ev = None
        self._timeout_ev = None
        self._beacon_end = 0
        self.wakeups = 0
        self.pushes: dict[int, int] = dict.fromkeys(self.schedule, 0)
        self.received = 0
        self.timeouts = 0
        self.anomalies = 0
        self.cca_busy = 0
        # (wakeup index, sim time ns, node, bit, interval ms, tsr mask)
        self.trace: list[tuple] = []

    # scheduling -------------------------------------------------------------

    def start(self) -> None:
        self._arm_wakeup()

    def _arm_wakeup(self) -> None:
        nxt = min(e.next_wake for e in self.schedule.values()) if self.schedule else None
        if nxt is None:
            return
        # a wake time that passed while busy fires right away
        self._wake_ev = self.node.timer_at(max(nxt, self.sim.now), "wakeup")

    def on_timer(self, name, data) -> None:
        if name == "wakeup":
            self.on_wakeup()
        elif name == "cca_done":
            self._cca_done()
        elif name == "data_timeout":
            self.on_data_timeout()
        else:
            raise SimulationFault(f"receiver: unknown timer {name}")

    # state machine ---------------------------------------------------------

    def on_wakeup(self) -> None:
        if self.mode != R_SLEEP:
            raise SimulationFault(f"receiver {self.node.id} woke in mode {self.mode}")
        self._wake_ev = None
        self.target = select_target(self.schedule)
        self.wakeups += 1
        self.mode = R_CCA
        if self.radio.switch(RX):
            self._start_cca()

    def _start_cca(self) -> None:
        self.node.set_timer(self.cca_ns, "cca_done")

    def _cca_done(self) -> None:
        if self.sim.channel.busy(self.node.id):
            self.cca_busy += 1
            self._start_cca()
            return
        self.mode = R_SEND_WB
        if self.radio.switch(TX):
            self._send_beacon()

    def _send_beacon(self) -> None:
        pkt = Packet(WB, self.node.id, BROADCAST, self.phy.airtime(WB), target=self.target)
        self.send(pkt)

    def on_radio_ready(self, state) -> None:
        if state == RX and self.mode == R_CCA:
            self._start_cca()
        elif state == TX and self.mode == R_SEND_WB:
            self._send_beacon()
        elif state == TX and self.mode == R_SEND_ACK:
            self._send_ack()

    def on_tx_done(self, pkt) -> None:
        if pkt.kind == WB:
            self._beacon_end = self.sim.now
            self.mode = R_WAIT_DATA
            self._timeout_ev = self.node.set_timer(self.data_timeout_ns, "data_timeout")
            self.radio.switch(RX)
        elif pkt.kind == ACK:
            self._go_sleep()

    def on_packet(self, pkt) -> None:
        if pkt.kind == DATA and pkt.destination == self.node.id:
            self.on_data_received(pkt)

    def on_data_received(self, pkt) -> None:
        if self.mode != R_WAIT_DATA or pkt.source != self.target:
            self.anomalies += 1
            log.debug("receiver %d: unexpected DATA from %d in %s", self.node.id, pkt.source, self.mode)
            return
        self._timeout_ev.cancelled = True
        self._timeout_ev = None
        self.received += 1
        self._record(1)
        self.mode = R_SEND_ACK
        if self.radio.switch(TX):
            self._send_ack()

    def _send_ack(self) -> None:
        src = self.target
        entry = self.schedule[src]
        pkt = Packet(
            ACK, self.node.id, src, self.phy.airtime(ACK),
            info={"next_wake": entry.next_wake, "interval_ns": round(entry.interval * NS_PER_MS)},
        )
        self.send(pkt)

    def on_data_timeout(self) -> None:
        if self.mode != R_WAIT_DATA:
            raise SimulationFault(f"receiver {self.node.id}: data timeout in mode {self.mode}")
        self._timeout_ev = None
        self.timeouts += 1
        self._record(0)
        self._go_sleep()

    def _go_sleep(self) -> None:
        self.mode = R_SLEEP
        self.target = None
        self.radio.switch(SLEEP)
        self._arm_wakeup()

    def _record(self, bit: int) -> None:
        node = self.target
        reg = self.bank.record(node, bit)
        self.pushes[node] += 1
        mu = adaptive.register_update_factor(reg, self.params.alpha)
        e = self.error_fn(reg)
        entry = self.schedule[node]
        entry.interval = adaptive.step_interval(entry.interval, mu, e, self.params)
        entry.history.append(entry.interval)
        # anchored at the end of the beacon that polled this transmitter
        entry.next_wake = self._beacon_end + round(entry.interval * NS_PER_MS)
        self.trace.append((self.wakeups, self.sim.now, node, bit, entry.interval, reg.mask))

    def counters(self) -> dict:
        return {
            "wakeups": self.wakeups,
            "data_received": self.received,
            "data_timeouts": self.timeouts,
            "anomalies": self.anomalies,
            "cca_busy": self.cca_busy,
        }


class TadmacTransmitter(MacLayer):
    def __init__(self, node: Node, phy: PhyConfig, cfg: TadmacConfig):
        super().__init__(node)
        self.phy = phy
        self.cfg = cfg
        self.mode = T_SLEEP
        self.pending: deque = deque()
        self.retries = 0
        self.dropped = 0
        self.sent = 0
        self.acked = 0
        self.beacons_heard = 0
        self.ack_timeouts = 0
        self._ack_ev = None
        self._listen_ev = None
        self._giveup_ev = None
        self._window_end = None
        self.missed_windows = 0
        self.expected_wake: int | None = None
        self.expected_interval: int | None = None
        self.guard_ns = None if cfg.tx_guard_ms is None else round(cfg.tx_guard_ms * NS_PER_MS)
        self.hold_ns = round(cfg.tx_hold_ms * NS_PER_MS)
        ack_air = phy.airtime(ACK)
        self.ack_timeout_ns = 2 * (phy.switch_ns + ack_air + 2 * phy.propagation_ns)

    def on_upper_data(self, payload) -> None:
        if len(self.pending) >= self.cfg.queue_capacity:
            self.pending.popleft()
            self.dropped += 1
            if self.mode in (T_SEND_DATA, T_WAIT_ACK):
                # the head in flight was the one dropped; its retry count goes with it
                self.retries = 0
        self.pending.append(payload)
        if self.mode == T_SLEEP and self._listen_ev is None:
            self._plan_listen()

    def _plan_listen(self) -> None:
        """Start listening now, or sleep until just before the predicted beacon.

        Without a prediction (first packet, or alignment disabled) the radio
        listens until the beacon arrives. With one, the transmitter listens in
        a window around the predicted poll and sleeps again if it passes.
        """
        now = self.sim.now
        if self.guard_ns is None or self.expected_wake is None:
            self._window_end = None
            self._listen()
            return
        wake = self.expected_wake
        if self.expected_interval:
            while wake + self.hold_ns <= now:
                wake += self.expected_interval
        self.expected_wake = wake
        self._window_end = wake + self.hold_ns if self.expected_interval else None
        start = wake - self.guard_ns
        if start > now:
            self._listen_ev = self.node.timer_at(start, "listen")
        else:
            self._listen()

    def _listen(self) -> None:
        self._listen_ev = None
        self.mode = T_WAIT_WB
        self.radio.switch(RX)
        if self._window_end is not None:
            self._giveup_ev = self.node.timer_at(max(self._window_end, self.sim.now), "give_up")

    def _give_up(self) -> None:
        self._giveup_ev = None
        if self.mode != T_WAIT_WB:
            return
        self.missed_windows += 1
        self.mode = T_SLEEP
        self.radio.switch(SLEEP)
        self.expected_wake += self.expected_interval
        self._plan_listen()

    def on_timer(self, name, data) -> None:
        if name == "listen":
            self._listen()
        elif name == "give_up":
            self._give_up()
        elif name == "ack_timeout":
            self._on_ack_timeout()
        else:
            raise SimulationFault(f"transmitter: unknown timer {name}")

    def on_packet(self, pkt) -> None:
        if pkt.kind == WB:
            self.on_beacon(pkt)
        elif pkt.kind == ACK and pkt.destination == self.node.id:
            self.on_ack(pkt)

    def on_beacon(self, pkt) -> None:
        if self.mode != T_WAIT_WB:
            return
        self.beacons_heard += 1
        if pkt.target != self.node.id:
            return
        if not self.pending:
            raise SimulationFault(f"transmitter {self.node.id} listening with empty queue")
        if self._giveup_ev is not None:
            self._giveup_ev.cancelled = True
            self._giveup_ev = None
        self.mode = T_SEND_DATA
        self._coordinator = pkt.source
        if self.radio.switch(TX):
            self._send_data()

    def on_radio_ready(self, state) -> None:
        if state == TX and self.mode == T_SEND_DATA:
            self._send_data()

    def _send_data(self) -> None:
        pkt = Packet(DATA, self.node.id, self._coordinator, self.phy.airtime(DATA), info={"payload": self.pending[0]})
        self.sent += 1
        self.send(pkt)

    def on_tx_done(self, pkt) -> None:
        if pkt.kind == DATA:
            self.mode = T_WAIT_ACK
            self.radio.switch(RX)
            self._ack_ev = self.node.set_timer(self.ack_timeout_ns, "ack_timeout")

    def on_ack(self, pkt) -> None:
        if self.mode != T_WAIT_ACK:
            return
        self._ack_ev.cancelled = True
        self._ack_ev = None
        self.acked += 1
        self.retries = 0
        if self.pending:
            self.pending.popleft()
        self.expected_wake = pkt.info.get("next_wake")
        self.expected_interval = pkt.info.get("interval_ns")
        self._after_exchange()

    def _on_ack_timeout(self) -> None:
        self._ack_ev = None
        self.ack_timeouts += 1
        self.retries += 1
        if self.retries >= self.cfg.max_retries:
            if self.pending:
                self.pending.popleft()
            self.dropped += 1
            self.retries = 0
        self._after_exchange()

    def _after_exchange(self) -> None:
        if self.pending:
            self.mode = T_WAIT_WB
            if self.guard_ns is not None and self.expected_wake is not None:
                self.mode = T_SLEEP
                self.radio.switch(SLEEP)
                self._plan_listen()
        else:
            self.mode = T_SLEEP
            self.radio.switch(SLEEP)

    def counters(self) -> dict:
        return {
            "data_sent": self.sent,
            "acked": self.acked,
            "dropped": self.dropped,
            "ack_timeouts": self.ack_timeouts,
            "beacons_heard": self.beacons_heard,
            "missed_windows": self.missed_windows,
            "queued": len(self.pending),
        }
