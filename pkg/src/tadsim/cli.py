"""Command-line entry point: ``tadsim run|batch|sweep|report``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, SimulationFault
from .harness import ExperimentReport, export_report, run_batch, run_experiment, run_sweep
from .scenario import PROTOCOLS, load_scenario

log = logging.getLogger("tadsim")


def _parse_range(text: str) -> list[float]:
    """``a:b:step`` (inclusive) or comma list."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise argparse.ArgumentTypeError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = parts
        out, k = [], 0
        while start + k * step <= stop + 1e-9:
            out.append(round(start + k * step, 9))
            k += 1
        return out
    return [float(p) for p in text.split(",") if p]


def _parse_seeds(text: str) -> list[int]:
    if "-" in text and "," not in text:
        lo, hi = (int(p) for p in text.split("-"))
        return list(range(lo, hi + 1))
    return [int(p) for p in text.split(",") if p]


def _formats(fmt: str) -> list[str]:
    return ["csv", "json"] if fmt == "both" else [fmt]


def _write(report: ExperimentReport, out_dir: Path, fmt: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for f in _formats(fmt):
        target = out_dir / "report.json" if f == "json" else out_dir
        for p in export_report(report, f, target):
            log.info("wrote %s", p)


def _summary_line(report: ExperimentReport) -> str:
    s = report.doc["summary"]
    t = s["mean_time_ms_per_s"]
    line = (
        f"{report.doc['protocol']} seed={report.doc['seed']} "
        f"coordinator_sleep={s['coordinator_sleep_fraction']:.4f} "
        f"energy={s['mean_energy_mj_per_s']:.3f} mJ/s per node "
        f"(sleep {t['SLEEP']:.1f} / rx {t['RX']:.1f} / tx {t['TX']:.1f} ms/s)"
    )
    if "convergence" in report.doc:
        line += " convergence=" + json.dumps(report.doc["convergence"], sort_keys=True)
    return line


def _load(args):
    sc = load_scenario(args.scenario)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "protocol", None):
        changes["protocol"] = args.protocol
    if changes:
        sc = sc.replace(**changes)
        sc.validate()
    return sc


def cmd_run(args) -> int:
    sc = _load(args)
    report = run_experiment(sc)
    print(_summary_line(report))
    if args.out_dir:
        _write(report, Path(args.out_dir), args.format)
    return 0


def cmd_batch(args) -> int:
    sc = _load(args)
    seeds = _parse_seeds(args.seeds)
    reports = run_batch(sc, seeds, workers=args.workers)
    rows = []
    for seed, rep in zip(seeds, reports):
        print(_summary_line(rep))
        s = rep.doc["summary"]
        rows.append((seed, s["coordinator_sleep_fraction"], s["mean_energy_mj_per_s"]))
        if args.out_dir:
            _write(rep, Path(args.out_dir) / f"seed_{seed:04d}", args.format)
    if args.out_dir:
        with (Path(args.out_dir) / "batch.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("seed", "coordinator_sleep_fraction", "mean_energy_mj_per_s"))
            w.writerows(rows)
    return 0


def cmd_sweep(args) -> int:
    sc = _load(args)
    grid = {}
    if args.initial:
        grid["initial_interval_ms"] = _parse_range(args.initial)
    if args.alpha:
        grid["alpha"] = _parse_range(args.alpha)
    if args.tsr_length:
        grid["tsr_length"] = [int(v) for v in _parse_range(args.tsr_length)]
    if not grid:
        raise ConfigError("sweep needs at least one of --initial, --alpha, --tsr-length")
    results = run_sweep(sc, grid, workers=args.workers)
    axes = list(grid)
    header = axes + ["node_id", "wakeups_to_convergence", "final_i_wu_ms", "mean_energy_mj_per_s"]
    rows = []
    for point, rep in results:
        for nid in sc.transmitter_ids:
            hist = rep.interval_history(nid)
            rows.append([point[a] for a in axes] + [
                nid, rep.convergence(nid), hist[-1] if hist else None, rep.doc["summary"]["mean_energy_mj_per_s"],
            ])
    w = csv.writer(sys.stdout)
    w.writerow(header)
    w.writerows(rows)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "sweep.csv").open("w", newline="") as fh:
            cw = csv.writer(fh)
            cw.writerow(header)
            cw.writerows(rows)
    return 0


def cmd_report(args) -> int:
    path = Path(args.report)
    try:
        report = ExperimentReport.from_json(path.read_text())
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read report {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not a JSON report ({exc})") from exc
    print(_summary_line(report))
    if args.out_dir:
        _write(report, Path(args.out_dir), args.format)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tadsim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("scenario", help="scenario YAML file")
        if seed:
            sp.add_argument("--seed", type=int)
        sp.add_argument("--protocol", choices=PROTOCOLS)
        sp.add_argument("--out-dir")
        sp.add_argument("--format", choices=("csv", "json", "both"), default="both")

    sp = sub.add_parser("run", help="run one scenario")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("batch", help="run a scenario over a range of seeds")
    common(sp, seed=False)
    sp.add_argument("--seeds", default="1-100", help="'1-100' or '1,5,9'")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_batch)

    sp = sub.add_parser("sweep", help="grid over initial interval, alpha and TSR length")
    common(sp)
    sp.add_argument("--initial", help="initial intervals in ms, e.g. 50:500:50")
    sp.add_argument("--alpha", help="e.g. 0,0.25,0.5,0.75,1")
    sp.add_argument("--tsr-length", help="e.g. 4,8,16")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("report", help="re-export a stored JSON report")
    sp.add_argument("report")
    sp.add_argument("--out-dir")
    sp.add_argument("--format", choices=("csv", "json", "both"), default="csv")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        msg = exc.strerror or str(exc)
        if exc.filename:
            msg += f": {exc.filename}"
        print(f"error: {msg}", file=sys.stderr)
        return 1
    except SimulationFault as exc:
        print(f"simulation fault: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
