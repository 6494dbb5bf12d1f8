"""Experiment execution, convergence detection and report export."""

from __future__ import annotations

import csv
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .adaptive import AdaptParams
from .baselines import BmacNode, LmacNode, assign_slots, mac_rng
from .energy import ENERGY_STATES, RADIO_STATES, SLEEP, PowerProfile
from .engine import NS_PER_MS, NS_PER_S, UPPER_DATA, NS_PER_US, Node, PhyConfig, Simulator
from .errors import ConfigError
from .scenario import COORDINATOR, Scenario
from .tadmac import TadmacConfig, TadmacReceiver, TadmacTransmitter
from .traffic import TrafficSource

REPORT_VERSION = 1


@dataclass
class ConvergenceCriterion:
    epsilon: float = 1.0
    window: int = 10

    def __post_init__(self):
        if not self.epsilon > 0 or self.window < 2:
            raise ConfigError(f"convergence needs epsilon > 0 and window >= 2, got {self.epsilon}, {self.window}")


def detect_convergence(history: Sequence[float], crit: ConvergenceCriterion) -> int | None:
    """First index from which ``window`` consecutive changes stay within ``epsilon``."""
    if not history:
        raise ValueError("empty interval history")
    run = 0
    for k in range(len(history) - 1):
        if abs(history[k + 1] - history[k]) <= crit.epsilon:
            run += 1
            if run == crit.window:
                return k - crit.window + 1
        else:
            run = 0
    return None


def _phy(sc: Scenario) -> PhyConfig:
    p = sc.phy
    return PhyConfig(
        bitrate=p.bitrate,
        wb_bytes=p.wb_bytes,
        data_bytes=p.data_bytes,
        ack_bytes=p.ack_bytes,
        header_bytes=p.header_bytes,
        propagation_ns=round(p.propagation_us * NS_PER_US),
        switch_ns=round(p.switch_us * NS_PER_US),
    )


def tadmac_config(sc: Scenario) -> TadmacConfig:
    a, t = sc.adapt, sc.tadmac
    return TadmacConfig(
        adapt=AdaptParams(alpha=a.alpha, t_ref=a.t_ref_ms, i_min=a.i_min_ms, i_max=a.i_max_ms),
        tsr_length=a.tsr_length,
        tsr_init=a.tsr_init,
        error_policy=a.error_policy,
        initial_interval_ms=a.initial_interval_ms,
        cca_ms=t.cca_ms,
        queue_capacity=t.queue_capacity,
        max_retries=t.max_retries,
        tx_guard_ms=t.tx_guard_ms,
        tx_hold_ms=t.tx_hold_ms,
    )


def build_simulation(sc: Scenario) -> Simulator:
    """Instantiate nodes, MACs and traffic for a validated scenario."""
    sc.validate()
    phy = _phy(sc)
    profile = PowerProfile(sc.power.p_sleep_mw, sc.power.p_rx_mw, sc.power.p_tx_mw)
    horizon = round(sc.horizon_s * NS_PER_S)
    sim = Simulator(phy.propagation_ns)
    tx_ids = sc.transmitter_ids
    coord = sim.add_node(Node(sim, COORDINATOR, profile, phy.switch_ns))
    for nid in tx_ids:
        sim.add_node(Node(sim, nid, profile, phy.switch_ns))
        sim.channel.connect(COORDINATOR, nid)

    if sc.protocol == "tadmac":
        cfg = tadmac_config(sc)
        TadmacReceiver(coord, tx_ids, phy, cfg)
        for nid in tx_ids:
            TadmacTransmitter(sim.nodes[nid], phy, cfg)
    elif sc.protocol == "bmac":
        for nid, node in sim.nodes.items():
            sink = None if nid == COORDINATOR else COORDINATOR
            BmacNode(node, phy, sc.bmac, mac_rng(sc.seed, nid), sink=sink)
    else:
        slots = assign_slots(sim.nodes, sc.lmac.frame_slots)
        for nid, node in sim.nodes.items():
            sink = None if nid == COORDINATOR else COORDINATOR
            LmacNode(node, phy, sc.lmac, slots[nid], sink=sink)

    for nid in tx_ids:
        node = sim.nodes[nid]
        node.traffic = TrafficSource(sc.traffic_for(nid), sc.seed, nid, horizon)
        first = node.traffic.next_arrival()
        if first is not None:
            sim.schedule(first, UPPER_DATA, nid, first)
    for node in sim.nodes.values():
        node.mac.start()
    return sim


class ExperimentReport:
    """JSON-ready run summary; ``doc`` is the whole report."""

    def __init__(self, doc: dict):
        self.doc = doc

    def __eq__(self, other):
        return isinstance(other, ExperimentReport) and self.doc == other.doc

    @property
    def horizon_s(self) -> float:
        return self.doc["horizon_s"]

    def node(self, node_id: int) -> dict:
        return self.doc["nodes"][str(node_id)]

    def sleep_fraction(self, node_id: int = COORDINATOR) -> float:
        return self.node(node_id)["time_ms"][SLEEP] / (self.horizon_s * 1000.0)

    def mean_time_ms_per_s(self, state: str) -> float:
        nodes = self.doc["nodes"].values()
        return sum(n["time_ms"][state] for n in nodes) / len(nodes) / self.horizon_s

    def mean_energy_mj_per_s(self) -> float:
        nodes = self.doc["nodes"].values()
        return sum(n["total_energy_mj"] for n in nodes) / len(nodes) / self.horizon_s

    def interval_history(self, node_id: int) -> list[float]:
        return [row[3] for row in self.doc["intervals"] if row[2] == node_id]

    def convergence(self, node_id: int) -> int | None:
        return self.doc.get("convergence", {}).get(str(node_id))

    def to_json(self) -> str:
        return json.dumps(self.doc, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> ExperimentReport:
        return cls(json.loads(text))


def collect_report(sc: Scenario, sim: Simulator) -> ExperimentReport:
    horizon_ms = sc.horizon_s * 1000.0
    nodes = {}
    for nid, node in sorted(sim.nodes.items()):
        led = node.ledger
        nodes[str(nid)] = {
            "role": "coordinator" if nid == COORDINATOR else "transmitter",
            "residency_ns": {s: led.residency_ns(s) for s in RADIO_STATES},
            "time_ms": {s: led.time_ms(s) for s in ENERGY_STATES + ("OFF",)},
            "energy_mj": {s: led.energy_mj(s) for s in ENERGY_STATES},
            "total_energy_mj": led.total_energy(),
            "arrivals": node.arrivals,
            "counters": node.mac.counters(),
        }
    doc = {
        "version": REPORT_VERSION,
        "scenario": sc.to_dict(),
        "protocol": sc.protocol,
        "seed": sc.seed,
        "horizon_s": sc.horizon_s,
        "events": sim.executed,
        "nodes": nodes,
        "channel": dict(sim.channel.counters),
        "packets_by_kind": dict(sorted(sim.channel.by_kind.items())),
        "summary": {},
    }
    if sc.protocol == "tadmac":
        rx = sim.nodes[COORDINATOR].mac
        crit = ConvergenceCriterion(sc.convergence_epsilon_ms(), sc.convergence.window)
        intervals = []
        conv = {}
        for nid in sc.transmitter_ids:
            entry = rx.schedule[nid]
            conv[str(nid)] = detect_convergence(entry.history, crit)
            intervals.append([0, 0.0, nid, entry.history[0]])
        per_node_index = dict.fromkeys(sc.transmitter_ids, 0)
        tsr = []
        length = sc.adapt.tsr_length
        for wake, t_ns, nid, bit, i_wu, mask in rx.trace:
            per_node_index[nid] += 1
            t_s = t_ns / NS_PER_S
            intervals.append([per_node_index[nid], t_s, nid, i_wu])
            bits = "".join(str((mask >> k) & 1) for k in range(length))
            tsr.append([wake, t_s, nid, bit, bits])
        intervals.sort(key=lambda r: (r[2], r[0]))
        doc["intervals"] = intervals
        doc["tsr_trace"] = tsr
        doc["convergence"] = conv
        doc["tsr_pushes"] = {str(k): v for k, v in rx.pushes.items()}
    report = ExperimentReport(doc)
    doc["summary"] = {
        "coordinator_sleep_fraction": nodes[str(COORDINATOR)]["time_ms"][SLEEP] / horizon_ms,
        "mean_energy_mj_per_s": report.mean_energy_mj_per_s(),
        "mean_time_ms_per_s": {s: report.mean_time_ms_per_s(s) for s in ENERGY_STATES},
    }
    return report


def run_experiment(sc: Scenario) -> ExperimentReport:
    sim = build_simulation(sc)
    sim.run_until(round(sc.horizon_s * NS_PER_S))
    return collect_report(sc, sim)


def _run_seed(args) -> ExperimentReport:
    sc, seed = args
    return run_experiment(sc.replace(seed=seed))


def run_batch(sc: Scenario, seeds: Iterable[int], workers: int = 1) -> list[ExperimentReport]:
    """One run per seed, in seed order; ``workers > 1`` uses separate processes."""
    jobs = [(sc, s) for s in seeds]
    if workers <= 1:
        return [_run_seed(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_seed, jobs))


SWEEP_AXES = {
    "initial_interval_ms": ("adapt", "initial_interval_ms"),
    "alpha": ("adapt", "alpha"),
    "tsr_length": ("adapt", "tsr_length"),
    "t_ref_ms": ("adapt", "t_ref_ms"),
    "period_ms": ("traffic", "period_ms"),
}


def sweep_scenarios(sc: Scenario, grid: dict[str, Sequence]) -> list[tuple[dict, Scenario]]:
    for axis in grid:
        if axis not in SWEEP_AXES:
            raise ConfigError(f"cannot sweep {axis!r} (known: {', '.join(SWEEP_AXES)})")
    axes = list(grid)
    out = []
    for combo in itertools.product(*(grid[a] for a in axes)):
        point = dict(zip(axes, combo))
        new = sc.replace()
        for axis, value in point.items():
            section, attr = SWEEP_AXES[axis]
            setattr(getattr(new, section), attr, value)
        new.validate()
        out.append((point, new))
    return out


def run_sweep(sc: Scenario, grid: dict[str, Sequence], workers: int = 1) -> list[tuple[dict, ExperimentReport]]:
    points = sweep_scenarios(sc, grid)
    if workers <= 1:
        reports = [run_experiment(s) for _, s in points]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run_experiment, [s for _, s in points]))
    return [(p, r) for (p, _), r in zip(points, reports)]


# export ---------------------------------------------------------------------

INTERVAL_COLUMNS = ("wakeup_index", "sim_time", "node_id", "i_wu_ms")
ENERGY_COLUMNS = ("node_id", "state", "time_ms", "energy_mj")
COUNTER_COLUMNS = ("node_id", "counter", "value")
TSR_COLUMNS = ("wakeup_index", "sim_time", "node_id", "bit", "tsr")


def energy_rows(report: ExperimentReport) -> list[tuple]:
    rows = []
    for nid, node in sorted(report.doc["nodes"].items(), key=lambda kv: int(kv[0])):
        for state in ENERGY_STATES:
            rows.append((int(nid), state, node["time_ms"][state], node["energy_mj"][state]))
    return rows


def counter_rows(report: ExperimentReport) -> list[tuple]:
    rows = []
    for nid, node in sorted(report.doc["nodes"].items(), key=lambda kv: int(kv[0])):
        rows.append((int(nid), "arrivals", node["arrivals"]))
        for name, value in sorted(node["counters"].items()):
            rows.append((int(nid), name, value))
    for name, value in sorted(report.doc["channel"].items()):
        rows.append((-1, f"channel.{name}", value))
    return rows


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def export_report(report: ExperimentReport, fmt: str, path: str | Path) -> list[Path]:
    """Write CSV traces into directory ``path`` or one JSON document.

    For JSON, ``path`` may be a file name or an existing directory (the
    document is then written as ``report.json`` inside it).
    """
    path = Path(path)
    written = []
    try:
        if fmt == "json":
            target = path / "report.json" if path.is_dir() else path
            target.write_text(report.to_json())
            written.append(target)
        elif fmt == "csv":
            path.mkdir(parents=True, exist_ok=True)
            files = {
                "energy.csv": (ENERGY_COLUMNS, energy_rows(report)),
                "counters.csv": (COUNTER_COLUMNS, counter_rows(report)),
            }
            if "intervals" in report.doc:
                files["intervals.csv"] = (INTERVAL_COLUMNS, report.doc["intervals"])
                files["tsr.csv"] = (TSR_COLUMNS, report.doc["tsr_trace"])
            for name, (header, rows) in files.items():
                _write_csv(path / name, header, rows)
                written.append(path / name)
        else:
            raise ConfigError(f"unknown export format {fmt!r} (csv or json)")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report to {path}: {exc.strerror}") from exc
    return written
