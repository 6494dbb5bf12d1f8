"""Traffic status registers and the wake-up interval adaptation law.

Nothing here knows about simulated time or radios: the MAC layer pushes
one status bit per wake-up and asks for the next interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

from . import kernels
from .errors import ConfigError

MAX_TSR_LENGTH = 32


@dataclass(frozen=True)
class TsrRegister:
    """Fixed-length binary shift register, most recent status first.

    ``bits[0]`` is the entry 1-based notation calls index 1.
    The bits are stored packed in ``mask`` (bit ``k`` = ``bits[k]``).
    """

    length: int
    mask: int = 0

    def __post_init__(self):
        if self.length <= 0 or self.length % 2 or self.length > MAX_TSR_LENGTH:
            raise ConfigError(
                f"TSR length must be an even integer in [2, {MAX_TSR_LENGTH}], got {self.length}"
            )
        if self.mask < 0 or self.mask >> self.length:
            raise ValueError(f"mask {self.mask:#x} does not fit in {self.length} bits")

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> TsrRegister:
        bits = list(bits)
        mask = 0
        for k, b in enumerate(bits):
            if b not in (0, 1):
                raise ValueError(f"TSR bits must be 0 or 1, got {b!r}")
            mask |= b << k
        return cls(len(bits), mask)

    @classmethod
    def alternating(cls, length: int) -> TsrRegister:
        """Register holding 0,1,0,1,... (index 1 is 0)."""
        return cls(length, int("10" * (length // 2), 2))

    @classmethod
    def zeros(cls, length: int) -> TsrRegister:
        return cls(length, 0)

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.mask >> k) & 1 for k in range(self.length))

    def __getitem__(self, k: int) -> int:
        return self.bits[k]

    def __len__(self) -> int:
        return self.length

    def push(self, bit: int) -> TsrRegister:
        return push(self, bit)

    def complement(self) -> TsrRegister:
        return TsrRegister(self.length, ~self.mask & ((1 << self.length) - 1))


def push(reg: TsrRegister, bit: int) -> TsrRegister:
    """Shift every entry one place toward the old end and insert ``bit`` first."""
    if bit not in (0, 1):
        raise ValueError(f"TSR bit must be 0 or 1, got {bit!r}")
    full = (1 << reg.length) - 1
    return TsrRegister(reg.length, ((reg.mask << 1) | bit) & full)


class HalfStats(NamedTuple):
    n0: int
    n1: int
    nc0: int
    nc1: int


FIRST = "first"
SECOND = "second"


def half_stats(reg: TsrRegister, half: str) -> HalfStats:
    """Zero/one counts and overlapping adjacent-pair counts within one half.

    ``first`` is the most recent half. Pairs never span the half boundary.
    """
    h = reg.length // 2
    if half == FIRST:
        start = 0
    elif half == SECOND:
        start = h
    else:
        raise ValueError(f"half must be 'first' or 'second', got {half!r}")
    return HalfStats(*kernels.half_counts(reg.mask, start, h))


def weighted_value(stats: HalfStats, length: int) -> float:
    h = length // 2
    return (stats.n0 / h) * stats.nc0 - (stats.n1 / h) * stats.nc1


def update_factor(x1: float, x2: float, alpha: float) -> float:
    return alpha * x1 + (1.0 - alpha) * x2


def register_update_factor(reg: TsrRegister, alpha: float) -> float:
    """mu for a register in one kernel call (same value as the three-step path)."""
    return kernels.update_factor(reg.mask, reg.length, alpha)


@dataclass(frozen=True)
class AdaptParams:
    """Adaptation constants; durations are in milliseconds of simulated time."""

    alpha: float = 0.5
    t_ref: float = 1.0
    i_min: float = 10.0
    i_max: float = 2000.0

    def __post_init__(self):
        problems = []
        if not 0.0 <= self.alpha <= 1.0:
            problems.append(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.t_ref > 0:
            problems.append(f"t_ref must be positive, got {self.t_ref}")
        if not 0 < self.i_min <= self.i_max:
            problems.append(f"need 0 < i_min <= i_max, got {self.i_min}, {self.i_max}")
        if problems:
            raise ConfigError("; ".join(problems))


@dataclass(frozen=True)
class IntervalState:
    i_wu: float
    history: tuple[float, ...] = field(default=())


def step_interval(i_wu: float, mu: float, e: float, params: AdaptParams) -> float:
    if not (math.isfinite(mu) and math.isfinite(e)):
        raise ValueError(f"non-finite update (mu={mu}, e={e})")
    nxt = i_wu + (mu + e) * params.t_ref
    return min(max(nxt, params.i_min), params.i_max)


def next_interval(state: IntervalState, mu: float, e: float, params: AdaptParams) -> IntervalState:
    nxt = step_interval(state.i_wu, mu, e, params)
    return IntervalState(nxt, state.history + (nxt,))


# correlation-error policies: register -> additive term in the interval update
ErrorPolicy = Callable[[TsrRegister], float]


def _zero_error(reg: TsrRegister) -> float:
    return 0.0


ERROR_POLICIES: dict[str, ErrorPolicy] = {"zero": _zero_error}


def resolve_error_policy(name: str) -> ErrorPolicy:
    try:
        return ERROR_POLICIES[name]
    except KeyError:
        known = ", ".join(sorted(ERROR_POLICIES))
        raise ConfigError(f"unknown error policy {name!r} (known: {known})") from None


def error_term(reg: TsrRegister, policy: str | ErrorPolicy = "zero") -> float:
    fn = resolve_error_policy(policy) if isinstance(policy, str) else policy
    return fn(reg)


class TsrBank:
    """One register per neighbour transmitter, all of the same length."""

    def __init__(self, neighbours: Iterable[int], length: int = 8, init: str = "alternating"):
        if init == "alternating":
            make = TsrRegister.alternating
        elif init == "zeros":
            make = TsrRegister.zeros
        else:
            raise ConfigError(f"unknown TSR init {init!r} (known: alternating, zeros)")
        self.length = length
        self.registers: dict[int, TsrRegister] = {n: make(length) for n in neighbours}

    def __getitem__(self, node: int) -> TsrRegister:
        return self.registers[node]

    def __contains__(self, node: int) -> bool:
        return node in self.registers

    def neighbours(self) -> list[int]:
        return sorted(self.registers)

    def record(self, node: int, bit: int) -> TsrRegister:
        reg = push(self.registers[node], bit)
        self.registers[node] = reg
        return reg
