"""Radio-state residency to energy.

Times are accumulated as integer nanoseconds so that per-state sums are
exact; energies are derived on demand as time x power.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError, SimulationFault

OFF = "OFF"
SLEEP = "SLEEP"
RX = "RX"
TX = "TX"
SWITCHING = "SWITCHING"

RADIO_STATES = (OFF, SLEEP, RX, TX, SWITCHING)
# rows of the energy table; SWITCHING is billed as RX, OFF is free
ENERGY_STATES = (SLEEP, RX, TX)
_BILLED_AS = {OFF: OFF, SLEEP: SLEEP, RX: RX, TX: TX, SWITCHING: RX}

NS_PER_MS = 1_000_000


@dataclass(frozen=True)
class PowerProfile:
    """Transceiver power draw in mW.

    The defaults are the per-state ratios of energy to time observed for a
    2.4 GHz low-power radio; SWITCHING is billed at ``p_rx``.
    """

    p_sleep: float = 0.065
    p_rx: float = 54.2
    p_tx: float = 56.6

    def __post_init__(self):
        if not (0 < self.p_sleep < self.p_rx and self.p_sleep < self.p_tx):
            raise ConfigError(
                f"power profile needs 0 < p_sleep < p_rx, p_tx (got {self.p_sleep}, {self.p_rx}, {self.p_tx})"
            )

    def power(self, state: str) -> float:
        billed = _BILLED_AS[state]
        if billed == OFF:
            return 0.0
        return {SLEEP: self.p_sleep, RX: self.p_rx, TX: self.p_tx}[billed]


class EnergyLedger:
    """Per-node accumulator of residency per radio state."""

    def __init__(self, profile: PowerProfile | None = None):
        self.profile = profile or PowerProfile()
        self._ns = dict.fromkeys(RADIO_STATES, 0)

    def accrue(self, state: str, duration_ns: int) -> EnergyLedger:
        if duration_ns < 0:
            raise SimulationFault(f"negative residency {duration_ns} ns in {state}")
        self._ns[state] += duration_ns
        return self

    def accrue_ms(self, state: str, duration_ms: float) -> EnergyLedger:
        return self.accrue(state, round(duration_ms * NS_PER_MS))

    def residency_ns(self, state: str) -> int:
        """Raw time in one radio state (SWITCHING kept separate)."""
        return self._ns[state]

    def time_ns(self, state: str) -> int:
        """Billed time: SWITCHING is folded into RX."""
        return sum(ns for s, ns in self._ns.items() if _BILLED_AS[s] == state)

    def time_ms(self, state: str) -> float:
        return self.time_ns(state) / NS_PER_MS

    def energy_mj(self, state: str) -> float:
        # mW * ms = uJ
        return self.time_ms(state) * self.profile.power(state) / 1000.0

    def total_ns(self) -> int:
        return sum(self._ns.values())

    def total_energy(self) -> float:
        return sum(self.energy_mj(s) for s in ENERGY_STATES)

    def rows(self) -> list[tuple[str, float, float]]:
        out = [(s, self.time_ms(s), self.energy_mj(s)) for s in ENERGY_STATES]
        out.append((OFF, self.time_ms(OFF), 0.0))
        return out

    def as_dict(self) -> dict:
        return {
            "residency_ns": dict(self._ns),
            "time_ms": {s: self.time_ms(s) for s in ENERGY_STATES + (OFF,)},
            "energy_mj": {s: self.energy_mj(s) for s in ENERGY_STATES},
            "total_energy_mj": self.total_energy(),
        }


def total_energy(ledger: EnergyLedger) -> float:
    return ledger.total_energy()


def accrue(ledger: EnergyLedger, state: str, duration_ms: float) -> EnergyLedger:
    return ledger.accrue_ms(state, duration_ms)
