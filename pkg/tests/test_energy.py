import pytest
from hypothesis import given, strategies as st

from tadsim.energy import OFF, RX, SLEEP, SWITCHING, TX, EnergyLedger, PowerProfile, accrue, total_energy
from tadsim.errors import ConfigError, SimulationFault

TABLE = PowerProfile(p_sleep=0.0000625, p_rx=54.33, p_tx=56.64)


def test_accrue_examples():
    led = EnergyLedger(TABLE)
    assert accrue(led, RX, 180).energy_mj(RX) == pytest.approx(9.78, abs=0.005)
    assert accrue(EnergyLedger(TABLE), TX, 800).energy_mj(TX) == pytest.approx(45.31, abs=0.005)
    empty = EnergyLedger()
    assert accrue(empty, SLEEP, 0).as_dict() == EnergyLedger().as_dict()


def test_total_energy_from_table_rows():
    # per-state energies fed straight in via time x power with power = 1 mW
    unit = PowerProfile(p_sleep=0.5, p_rx=1.0, p_tx=1.0)
    b = EnergyLedger(PowerProfile(p_sleep=0.0006 / 9.6 * 1000, p_rx=9.78 / 180 * 1000, p_tx=45.31 / 800 * 1000))
    b.accrue_ms(SLEEP, 9.6).accrue_ms(RX, 180).accrue_ms(TX, 800)
    assert total_energy(b) == pytest.approx(55.09, abs=0.005)
    t = EnergyLedger(PowerProfile(p_sleep=0.06 / 918 * 1000, p_rx=4.38 / 81.03 * 1000, p_tx=0.03 / 0.53 * 1000))
    t.accrue_ms(SLEEP, 918).accrue_ms(RX, 81.03).accrue_ms(TX, 0.53)
    assert total_energy(t) == pytest.approx(4.47, abs=0.005)
    assert total_energy(EnergyLedger(unit)) == 0


def test_negative_duration_is_fault():
    with pytest.raises(SimulationFault):
        EnergyLedger().accrue(RX, -1)


def test_profile_validation():
    with pytest.raises(ConfigError):
        PowerProfile(p_sleep=60, p_rx=54.2, p_tx=56.6)
    with pytest.raises(ConfigError):
        PowerProfile(p_sleep=0)


def test_switching_billed_as_rx_and_off_free():
    led = EnergyLedger()
    led.accrue(SWITCHING, 200_000).accrue(RX, 800_000).accrue(OFF, 5_000_000)
    assert led.time_ns(RX) == 1_000_000
    assert led.residency_ns(SWITCHING) == 200_000
    assert led.energy_mj(RX) == pytest.approx(54.2 / 1000)
    assert led.total_energy() == led.energy_mj(RX)
    assert led.total_ns() == 6_000_000


@given(st.sampled_from([SLEEP, RX, TX]), st.integers(0, 10**12), st.integers(0, 10**12))
def test_accrue_is_additive(state, a, b):
    one = EnergyLedger().accrue(state, a).accrue(state, b)
    two = EnergyLedger().accrue(state, a + b)
    assert one.time_ns(state) == two.time_ns(state)
    assert one.energy_mj(state) == two.energy_mj(state)


@given(st.lists(st.tuples(st.sampled_from([SLEEP, RX, TX, SWITCHING, OFF]), st.integers(0, 10**9)), max_size=40))
def test_energy_is_time_times_power(items):
    led = EnergyLedger()
    for s, d in items:
        led.accrue(s, d)
    for s in (SLEEP, RX, TX):
        assert led.energy_mj(s) == led.time_ms(s) * led.profile.power(s) / 1000.0
    assert led.total_ns() == sum(d for _, d in items)
