"""Scenario description, YAML loading and validation.

A scenario is a star: node 0 is the coordinator, nodes ``1..transmitters``
each reach only the coordinator. Every key in a scenario file must be
known; unknown keys are reported with the rest of the validation problems.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .adaptive import ERROR_POLICIES, MAX_TSR_LENGTH
from .baselines import BmacConfig, LmacConfig
from .errors import ConfigError
from .traffic import TrafficSpec

PROTOCOLS = ("tadmac", "bmac", "lmac")
COORDINATOR = 0


@dataclass
class AdaptSettings:
    alpha: float = 0.5
    t_ref_ms: float = 1.0
    i_min_ms: float = 10.0
    i_max_ms: float = 2000.0
    tsr_length: int = 8
    tsr_init: str = "alternating"
    error_policy: str = "zero"
    initial_interval_ms: float = 100.0


@dataclass
class TadmacSettings:
    cca_ms: float = 0.128
    queue_capacity: int = 16
    max_retries: int = 3
    tx_guard_ms: float | None = 5.0
    tx_hold_ms: float = 10.0


@dataclass
class PhySettings:
    bitrate: float = 250_000.0
    wb_bytes: int = 8
    data_bytes: int = 16
    ack_bytes: int = 8
    header_bytes: int = 8
    propagation_us: float = 1.0
    switch_us: float = 200.0


@dataclass
class PowerSettings:
    p_sleep_mw: float = 0.065
    p_rx_mw: float = 54.2
    p_tx_mw: float = 56.6


@dataclass
class ConvergenceSettings:
    epsilon_ms: float | None = None  # defaults to t_ref
    window: int = 10


@dataclass
class Scenario:
    name: str = "scenario"
    protocol: str = "tadmac"
    seed: int = 1
    horizon_s: float = 1000.0
    transmitters: int = 4
    traffic: TrafficSpec = field(default_factory=TrafficSpec)
    per_node_traffic: dict = field(default_factory=dict)
    adapt: AdaptSettings = field(default_factory=AdaptSettings)
    tadmac: TadmacSettings = field(default_factory=TadmacSettings)
    bmac: BmacConfig = field(default_factory=BmacConfig)
    lmac: LmacConfig = field(default_factory=LmacConfig)
    phy: PhySettings = field(default_factory=PhySettings)
    power: PowerSettings = field(default_factory=PowerSettings)
    convergence: ConvergenceSettings = field(default_factory=ConvergenceSettings)

    @property
    def transmitter_ids(self) -> list[int]:
        return list(range(1, self.transmitters + 1))

    def traffic_for(self, node_id: int) -> TrafficSpec:
        return self.per_node_traffic.get(node_id, self.traffic)

    def convergence_epsilon_ms(self) -> float:
        eps = self.convergence.epsilon_ms
        return self.adapt.t_ref_ms if eps is None else eps

    def replace(self, **changes) -> Scenario:
        """Deep copy with top-level fields replaced."""
        out = copy.deepcopy(self)
        for k, v in changes.items():
            if not hasattr(out, k):
                raise ConfigError(f"unknown scenario field {k!r}")
            setattr(out, k, v)
        return out

    def validate(self) -> None:
        problems = validation_problems(self)
        if problems:
            raise ConfigError("invalid scenario:\n  " + "\n  ".join(problems), problems)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_node_traffic"] = {str(k): asdict(v) for k, v in self.per_node_traffic.items()}
        return d


def validation_problems(sc: Scenario) -> list[str]:
    problems = []
    if sc.protocol not in PROTOCOLS:
        problems.append(f"protocol must be one of {', '.join(PROTOCOLS)}, got {sc.protocol!r}")
    if not sc.horizon_s > 0:
        problems.append(f"horizon_s must be positive, got {sc.horizon_s}")
    if not isinstance(sc.seed, int) or isinstance(sc.seed, bool):
        problems.append(f"seed must be an integer, got {sc.seed!r}")
    if not isinstance(sc.transmitters, int) or sc.transmitters < 0:
        problems.append(f"transmitters must be a non-negative integer, got {sc.transmitters!r}")
    for nid in sc.per_node_traffic:
        if nid not in sc.transmitter_ids:
            problems.append(f"per_node_traffic names node {nid}, which is not a transmitter")
    problems += sc.traffic.validate()
    for nid, spec in sc.per_node_traffic.items():
        problems += [f"node {nid}: {p}" for p in spec.validate()]
    a = sc.adapt
    if not 0 <= a.alpha <= 1:
        problems.append(f"adapt.alpha must lie in [0, 1], got {a.alpha}")
    if not a.t_ref_ms > 0:
        problems.append(f"adapt.t_ref_ms must be positive, got {a.t_ref_ms}")
    if not 0 < a.i_min_ms <= a.i_max_ms:
        problems.append(f"need 0 < adapt.i_min_ms <= adapt.i_max_ms, got {a.i_min_ms}, {a.i_max_ms}")
    elif not a.i_min_ms <= a.initial_interval_ms <= a.i_max_ms:
        problems.append(f"adapt.initial_interval_ms {a.initial_interval_ms} outside [{a.i_min_ms}, {a.i_max_ms}]")
    if not (isinstance(a.tsr_length, int) and 4 <= a.tsr_length <= MAX_TSR_LENGTH and a.tsr_length % 2 == 0):
        problems.append(f"adapt.tsr_length must be an even integer in [4, {MAX_TSR_LENGTH}], got {a.tsr_length}")
    if a.tsr_init not in ("alternating", "zeros"):
        problems.append(f"adapt.tsr_init must be 'alternating' or 'zeros', got {a.tsr_init!r}")
    if a.error_policy not in ERROR_POLICIES:
        problems.append(f"unknown adapt.error_policy {a.error_policy!r} (known: {', '.join(sorted(ERROR_POLICIES))})")
    t = sc.tadmac
    if not t.cca_ms > 0:
        problems.append("tadmac.cca_ms must be positive")
    if t.queue_capacity < 1 or t.max_retries < 1:
        problems.append("tadmac.queue_capacity and tadmac.max_retries must be at least 1")
    if t.tx_guard_ms is not None and (t.tx_guard_ms < 0 or t.tx_hold_ms < 0):
        problems.append("tadmac.tx_guard_ms and tadmac.tx_hold_ms must be non-negative")
    problems += sc.bmac.validate()
    problems += sc.lmac.validate()
    if sc.protocol == "lmac" and sc.transmitters + 1 > sc.lmac.frame_slots:
        problems.append(f"{sc.transmitters + 1} nodes do not fit in {sc.lmac.frame_slots} L-MAC slots")
    p = sc.phy
    if not p.bitrate > 0 or min(p.wb_bytes, p.data_bytes, p.ack_bytes, p.header_bytes) <= 0:
        problems.append("phy bitrate and packet sizes must be positive")
    if p.propagation_us < 0 or p.switch_us < 0:
        problems.append("phy propagation_us and switch_us must be non-negative")
    w = sc.power
    if not (0 < w.p_sleep_mw < w.p_rx_mw and w.p_sleep_mw < w.p_tx_mw):
        problems.append("power needs 0 < p_sleep_mw < p_rx_mw and p_sleep_mw < p_tx_mw")
    c = sc.convergence
    if c.epsilon_ms is not None and not c.epsilon_ms > 0:
        problems.append("convergence.epsilon_ms must be positive")
    if c.window < 2:
        problems.append("convergence.window must be at least 2")
    return problems


_SECTIONS = {
    "adapt": AdaptSettings,
    "tadmac": TadmacSettings,
    "bmac": BmacConfig,
    "lmac": LmacConfig,
    "phy": PhySettings,
    "power": PowerSettings,
    "convergence": ConvergenceSettings,
}
_TOP_KEYS = {"name", "protocol", "seed", "horizon_s", "transmitters", "traffic", "per_node_traffic"} | set(_SECTIONS)


def _section(cls, raw, where, problems):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        problems.append(f"{where} must be a mapping")
        return cls()
    known = {f.name for f in fields(cls)}
    for k in raw:
        if k not in known:
            problems.append(f"unknown key {where}.{k}")
    obj = cls(**{k: v for k, v in raw.items() if k in known})
    if cls is TrafficSpec:
        obj.changes = [tuple(c) for c in obj.changes]
    return obj


def scenario_from_dict(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ConfigError("scenario document must be a mapping")
    problems = [f"unknown key {k}" for k in raw if k not in _TOP_KEYS]
    kwargs = {k: raw[k] for k in ("name", "protocol", "seed", "horizon_s", "transmitters") if k in raw}
    kwargs["traffic"] = _section(TrafficSpec, raw.get("traffic"), "traffic", problems)
    per_node = {}
    for k, v in (raw.get("per_node_traffic") or {}).items():
        try:
            nid = int(k)
        except (TypeError, ValueError):
            problems.append(f"per_node_traffic key {k!r} is not a node id")
            continue
        per_node[nid] = _section(TrafficSpec, v, f"per_node_traffic.{k}", problems)
    kwargs["per_node_traffic"] = per_node
    for name, cls in _SECTIONS.items():
        kwargs[name] = _section(cls, raw.get(name), name, problems)
    sc = Scenario(**kwargs)
    problems += validation_problems(sc)
    if problems:
        raise ConfigError("invalid scenario:\n  " + "\n  ".join(problems), problems)
    return sc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc.strerror}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    return scenario_from_dict(raw or {})


def star_scenario(protocol: str = "tadmac", **overrides) -> Scenario:
    """The evaluation topology: coordinator plus four static transmitters."""
    sc = Scenario(name=f"star5-{protocol}", protocol=protocol, transmitters=4)
    return sc.replace(**overrides) if overrides else sc
