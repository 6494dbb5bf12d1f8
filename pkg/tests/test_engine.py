import pytest

from tadsim.energy import RADIO_STATES, RX, SLEEP, SWITCHING, TX, PowerProfile
from tadsim.engine import (
    BROADCAST, DATA, TIMER, WB, MacLayer, Node, Packet, PhyConfig, Simulator, ms,
)
from tadsim.errors import SimulationFault

PHY = PhyConfig()


class Scripted(MacLayer):
    """Listens or sends on command; records what it hears."""

    def __init__(self, node):
        super().__init__(node)
        self.heard = []
        self.plan = {}

    def on_timer(self, name, data):
        if name == "listen":
            self.radio.switch(RX)
        elif name == "sleep":
            self.radio.switch(SLEEP)
        elif name == "tx":
            self.radio.switch(TX)
        elif name == "send":
            self.send(Packet(DATA, self.node.id, data, PHY.airtime(DATA)))

    def on_packet(self, pkt):
        self.heard.append((self.sim.now, pkt.source))


def star(n_leaves=2):
    sim = Simulator(PHY.propagation_ns)
    for nid in range(n_leaves + 1):
        Scripted(sim.add_node(Node(sim, nid, PowerProfile(), PHY.switch_ns)))
        if nid:
            sim.channel.connect(0, nid)
    return sim


def test_airtimes():
    assert PHY.airtime(WB) == 256_000
    assert PHY.airtime(DATA) == 512_000
    assert ms(1.5) == 1_500_000


def test_packet_validation():
    with pytest.raises(SimulationFault):
        Packet(DATA, 1, 0, 0)
    with pytest.raises(SimulationFault):
        Packet(WB, 0, BROADCAST, 10)


def test_schedule_in_past_is_fault():
    sim = star()
    sim.schedule(ms(5), TIMER, 1, ("noop", None))
    sim.run_until(ms(10))
    with pytest.raises(SimulationFault):
        sim.schedule(ms(5), TIMER, 1, ("noop", None))


def test_events_at_equal_time_run_in_insertion_order():
    sim = star()
    order = []
    sim.nodes[1].mac.on_timer = lambda name, data: order.append(name)
    for name in "abc":
        sim.schedule(ms(1), TIMER, 1, (name, None))
    sim.run_until(ms(2))
    assert order == ["a", "b", "c"]


def test_cancelled_event_is_skipped():
    sim = star()
    seen = []
    sim.nodes[1].mac.on_timer = lambda name, data: seen.append(name)
    ev = sim.schedule(ms(1), TIMER, 1, ("x", None))
    ev.cancelled = True
    sim.run_until(ms(2))
    assert seen == []


def _drive(sim, node, t_ms, name, data=None):
    sim.nodes[node].timer_at(ms(t_ms), name, data)


def test_delivery_to_listening_node():
    sim = star()
    _drive(sim, 0, 0, "listen")
    _drive(sim, 1, 0, "tx")
    _drive(sim, 1, 1, "send", 0)
    sim.run_until(ms(5))
    assert sim.nodes[0].mac.heard == [(ms(1) + PHY.airtime(DATA) + PHY.propagation_ns, 1)]
    assert sim.channel.counters["delivered"] == 1


def test_sleeping_listener_hears_nothing():
    sim = star()
    _drive(sim, 1, 0, "tx")
    _drive(sim, 1, 1, "send", 0)
    sim.run_until(ms(5))
    assert sim.nodes[0].mac.heard == []
    assert sim.channel.counters["undeliverable"] == 1


def test_listener_that_wakes_mid_packet_misses_it():
    sim = star()
    _drive(sim, 1, 0, "tx")
    _drive(sim, 1, 1, "send", 0)
    _drive(sim, 0, 1.1, "listen")  # RX reached at 1.3 ms, after the start
    sim.run_until(ms(5))
    assert sim.nodes[0].mac.heard == []


def test_overlapping_transmissions_collide():
    sim = star()
    _drive(sim, 0, 0, "listen")
    for leaf in (1, 2):
        _drive(sim, leaf, 0, "tx")
    _drive(sim, 1, 1, "send", 0)
    _drive(sim, 2, 1.2, "send", 0)
    sim.run_until(ms(5))
    assert sim.nodes[0].mac.heard == []
    c = sim.channel.counters
    assert (c["collisions"], c["corrupted"], c["delivered"]) == (1, 2, 0)


def test_back_to_back_transmissions_do_not_collide():
    sim = star()
    _drive(sim, 0, 0, "listen")
    for leaf in (1, 2):
        _drive(sim, leaf, 0, "tx")
    _drive(sim, 1, 1, "send", 0)
    _drive(sim, 2, 1 + 0.512, "send", 0)
    sim.run_until(ms(5))
    assert [src for _, src in sim.nodes[0].mac.heard] == [1, 2]
    assert sim.channel.counters["collisions"] == 0


def test_transmit_requires_tx_radio():
    sim = star()
    _drive(sim, 1, 1, "send", 0)
    with pytest.raises(SimulationFault):
        sim.run_until(ms(5))


def test_switching_takes_switch_delay():
    sim = star()
    _drive(sim, 0, 0, "listen")
    sim.run_until(ms(0.1))
    assert sim.nodes[0].radio.state == SWITCHING
    sim.run_until(ms(0.2))
    assert sim.nodes[0].radio.state == RX


def test_radio_time_conservation():
    sim = star()
    for t, name in [(0, "listen"), (3, "tx"), (4.7, "sleep"), (9, "listen"), (9.1, "tx"), (12, "sleep")]:
        _drive(sim, 1, t, name)
    sim.run_until(ms(20))
    led = sim.nodes[1].ledger
    assert sum(led.residency_ns(s) for s in RADIO_STATES) == ms(20)
    # the TX request at 9.1 ms retargets the pending RX switch and restarts the delay
    assert led.residency_ns(TX) == ms(4.7 - 3.2) + ms(12 - 9.3)


def test_livelock_guard():
    sim = star()
    sim.max_stall_events = 100
    node = sim.nodes[1]
    node.mac.on_timer = lambda name, data: node.set_timer(0, "again")
    node.set_timer(ms(1), "again")
    with pytest.raises(SimulationFault, match="livelock"):
        sim.run_until(ms(2))


def test_run_is_deterministic():
    def trace():
        sim = star()
        _drive(sim, 0, 0, "listen")
        for leaf in (1, 2):
            _drive(sim, leaf, 0, "tx")
            _drive(sim, leaf, leaf, "send", 0)
        sim.run_until(ms(10))
        return sim.nodes[0].mac.heard, dict(sim.channel.counters), sim.executed

    assert trace() == trace()
