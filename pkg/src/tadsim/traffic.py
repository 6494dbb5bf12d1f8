"""Upper-layer data arrival processes.

Each transmitter draws from its own RNG stream derived from the scenario
seed and the node id, so arrival times do not depend on MAC behaviour.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import ConfigError

NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000


@dataclass
class TrafficSpec:
    """``static``: one period; ``variable``: explicit change points or random redraws.

    ``changes`` is a list of ``(time_s, period_ms)`` pairs; when empty, a
    variable source redraws its period uniformly from
    ``[low_factor, high_factor] x period_ms`` every ``change_every_s``.
    """

    kind: str = "static"
    period_ms: float = 125.0
    changes: list = field(default_factory=list)
    change_every_s: float = 100.0
    low_factor: float = 0.5
    high_factor: float = 2.0
    phase_ms: float | None = None

    def validate(self) -> list[str]:
        problems = []
        if self.kind not in ("static", "variable"):
            problems.append(f"traffic kind must be 'static' or 'variable', got {self.kind!r}")
        if not self.period_ms > 0:
            problems.append(f"traffic period must be positive, got {self.period_ms}")
        last = 0.0
        for t, p in self.changes:
            if not p > 0:
                problems.append(f"traffic period must be positive, got {p} at t={t}s")
            if not t > last:
                problems.append(f"change points must be strictly increasing and positive, got {t}s after {last}s")
            last = t
        if self.kind == "variable" and not self.changes:
            if not self.change_every_s > 0:
                problems.append("change_every_s must be positive")
            if not 0 < self.low_factor <= self.high_factor:
                problems.append("need 0 < low_factor <= high_factor")
        return problems


def traffic_rng(seed: int, node_id: int) -> random.Random:
    return random.Random(f"traffic/{seed}/{node_id}")


class TrafficSource:
    """Iterator over absolute arrival times (ns)."""

    def __init__(self, spec: TrafficSpec, seed: int, node_id: int, horizon_ns: int):
        problems = spec.validate()
        if problems:
            raise ConfigError("; ".join(problems), problems)
        self.spec = spec
        self.horizon_ns = horizon_ns
        self.rng = traffic_rng(seed, node_id)
        self.period_ns = round(spec.period_ms * NS_PER_MS)
        if spec.kind == "variable":
            if spec.changes:
                self.changes = [(round(t * NS_PER_S), round(p * NS_PER_MS)) for t, p in spec.changes]
            else:
                self.changes = self._random_changes()
        else:
            self.changes = []
        if spec.phase_ms is None:
            phase = self.rng.randrange(self.period_ns)
        else:
            phase = round(spec.phase_ms * NS_PER_MS)
        self._next = phase
        self._ci = 0

    def _random_changes(self):
        out = []
        step = round(self.spec.change_every_s * NS_PER_S)
        t = step
        while t < self.horizon_ns:
            f = self.rng.uniform(self.spec.low_factor, self.spec.high_factor)
            out.append((t, round(self.period_ns * f)))
            t += step
        return out

    def period_at(self, t_ns: int) -> int:
        period = self.period_ns
        for t, p in self.changes:
            if t <= t_ns:
                period = p
            else:
                break
        return period

    def next_arrival(self) -> int | None:
        cur = self._next
        if cur is None or cur > self.horizon_ns:
            self._next = None
            return None
        while self._ci < len(self.changes) and self.changes[self._ci][0] <= cur:
            self.period_ns = self.changes[self._ci][1]
            self._ci += 1
        self._next = cur + self.period_ns
        return cur

    def arrivals(self) -> list[int]:
        out = []
        while (t := self.next_arrival()) is not None:
            out.append(t)
        return out
