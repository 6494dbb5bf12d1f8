import csv

import pytest
from hypothesis import given, strategies as st

from tadsim.errors import ConfigError
from tadsim.harness import (
    ConvergenceCriterion,
    ExperimentReport,
    detect_convergence,
    export_report,
    run_batch,
    run_experiment,
    sweep_scenarios,
)
from tadsim.scenario import Scenario, load_scenario, scenario_from_dict, star_scenario
from tadsim.traffic import NS_PER_S, TrafficSource, TrafficSpec

CRIT = ConvergenceCriterion(1.0, 10)


def small(protocol="tadmac", **kw):
    kw.setdefault("horizon_s", 5.0)
    return star_scenario(protocol, **kw)


# convergence detection

def test_constant_history_converges_at_zero():
    assert detect_convergence([100.0] * 20, CRIT) == 0


def test_growing_history_never_converges():
    assert detect_convergence([100.0 + 2 * k for k in range(50)], CRIT) is None


def test_flat_after_17():
    history = [100.0 + 3 * k for k in range(18)] + [151.0] * 15
    assert detect_convergence(history, CRIT) == 17


def test_too_short_flat_run():
    assert detect_convergence([1.0, 5.0] + [5.0] * 9, CRIT) is None
    assert detect_convergence([1.0, 5.0] + [5.0] * 10, CRIT) == 1


def test_empty_history_rejected():
    with pytest.raises(ValueError):
        detect_convergence([], CRIT)


def test_criterion_validation():
    with pytest.raises(ConfigError):
        ConvergenceCriterion(0.0, 10)
    with pytest.raises(ConfigError):
        ConvergenceCriterion(1.0, 1)


@given(st.lists(st.floats(0, 500), min_size=1, max_size=60), st.floats(0.01, 5), st.floats(0, 5))
def test_larger_epsilon_never_later(history, eps, extra):
    a = detect_convergence(history, ConvergenceCriterion(eps, 3))
    b = detect_convergence(history, ConvergenceCriterion(eps + extra, 3))
    if a is not None:
        assert b is not None and b <= a


# traffic

def test_traffic_static_period_and_phase():
    src = TrafficSource(TrafficSpec(period_ms=125, phase_ms=10), 1, 1, 1 * NS_PER_S)
    times = src.arrivals()
    assert times[0] == 10_000_000
    assert all(b - a == 125_000_000 for a, b in zip(times, times[1:]))


def test_traffic_change_points():
    spec = TrafficSpec(kind="variable", period_ms=100, changes=[(1.0, 50)], phase_ms=0)
    src = TrafficSource(spec, 1, 1, 2 * NS_PER_S)
    assert src.period_at(500_000_000) == 100_000_000
    assert src.period_at(1_500_000_000) == 50_000_000


def test_traffic_spec_validation():
    assert TrafficSpec(period_ms=0).validate()
    assert TrafficSpec(kind="bursty").validate()
    assert TrafficSpec(kind="variable", changes=[(2.0, 10), (1.0, 10)]).validate()


def test_random_variable_traffic_is_seeded_and_bounded():
    spec = TrafficSpec(kind="variable", period_ms=100, change_every_s=10)
    a = TrafficSource(spec, 7, 1, 100 * NS_PER_S)
    b = TrafficSource(spec, 7, 1, 100 * NS_PER_S)
    assert a.arrivals() == b.arrivals()
    periods = {a.period_at(t * NS_PER_S) for t in range(0, 100, 10)}
    assert len(periods) > 1
    assert all(50_000_000 <= p <= 200_000_000 for p in periods)


def test_arrivals_identical_across_protocols():
    counts = {}
    for proto in ("tadmac", "bmac", "lmac"):
        rep = run_experiment(small(proto, seed=11))
        counts[proto] = [rep.node(n)["arrivals"] for n in range(1, 5)]
    assert counts["tadmac"] == counts["bmac"] == counts["lmac"]
    expect = [len(TrafficSource(TrafficSpec(), 11, n, 5 * NS_PER_S).arrivals()) for n in range(1, 5)]
    assert counts["tadmac"] == expect


# scenarios

def test_unknown_keys_rejected_together():
    with pytest.raises(ConfigError) as err:
        scenario_from_dict({"protocol": "tadmac", "colour": 1, "adapt": {"beta": 2}, "traffic": {"period_ms": -1}})
    probs = err.value.problems
    assert any("colour" in p for p in probs)
    assert any("adapt.beta" in p for p in probs)
    assert any("period" in p for p in probs)


def test_every_violation_listed():
    sc = Scenario(protocol="wisemac", horizon_s=0)
    sc.adapt.alpha = 2
    sc.adapt.tsr_length = 7
    with pytest.raises(ConfigError) as err:
        sc.validate()
    assert len(err.value.problems) == 4


def test_load_scenario_yaml(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text("protocol: lmac\ntransmitters: 2\nper_node_traffic:\n  2: {period_ms: 300}\n")
    sc = load_scenario(p)
    assert sc.protocol == "lmac"
    assert sc.traffic_for(2).period_ms == 300
    assert sc.traffic_for(1).period_ms == 125


def test_load_scenario_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_scenario(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("protocol: [unclosed\n")
    with pytest.raises(ConfigError, match="YAML"):
        load_scenario(bad)


def test_sweep_grid():
    points = sweep_scenarios(small(), {"initial_interval_ms": [50, 100], "alpha": [0.0, 1.0]})
    assert len(points) == 4
    assert {(s.adapt.initial_interval_ms, s.adapt.alpha) for _, s in points} == {(50, 0.0), (50, 1.0), (100, 0.0), (100, 1.0)}
    with pytest.raises(ConfigError):
        sweep_scenarios(small(), {"colour": [1]})
    with pytest.raises(ConfigError):
        sweep_scenarios(small(), {"alpha": [3.0]})


# reports and export

def test_report_contents():
    rep = run_experiment(small())
    assert set(rep.doc["nodes"]) == {"0", "1", "2", "3", "4"}
    assert set(rep.doc["convergence"]) == {"1", "2", "3", "4"}
    assert rep.interval_history(1)[0] == 100.0
    assert 0 < rep.sleep_fraction() < 1
    assert rep.doc["summary"]["mean_energy_mj_per_s"] == rep.mean_energy_mj_per_s()


def test_baseline_report_has_no_interval_trace():
    rep = run_experiment(small("lmac"))
    assert "intervals" not in rep.doc
    assert rep.convergence(1) is None


def test_json_round_trip(tmp_path):
    rep = run_experiment(small())
    (path,) = export_report(rep, "json", tmp_path / "r.json")
    back = ExperimentReport.from_json(path.read_text())
    assert back == rep
    assert back.to_json() == rep.to_json()
    (again,) = export_report(rep, "json", tmp_path)
    assert again.name == "report.json"


def test_csv_columns(tmp_path):
    rep = run_experiment(small())
    written = {p.name: p for p in export_report(rep, "csv", tmp_path / "out")}
    assert set(written) == {"energy.csv", "counters.csv", "intervals.csv", "tsr.csv"}

    def header(name):
        with written[name].open() as fh:
            return next(csv.reader(fh))

    assert header("energy.csv") == ["node_id", "state", "time_ms", "energy_mj"]
    assert header("intervals.csv") == ["wakeup_index", "sim_time", "node_id", "i_wu_ms"]
    assert header("counters.csv") == ["node_id", "counter", "value"]
    with written["energy.csv"].open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5 * 3
    with written["intervals.csv"].open() as fh:
        n = sum(1 for _ in fh) - 1
    assert n == len(rep.doc["intervals"])


def test_export_errors(tmp_path):
    rep = run_experiment(small(horizon_s=1.0))
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match=str(blocker)):
        export_report(rep, "csv", blocker / "sub")
    with pytest.raises(ConfigError):
        export_report(rep, "xml", tmp_path)


def test_batch_runs_in_seed_order():
    sc = small(horizon_s=2.0)
    reps = run_batch(sc, [3, 1, 2])
    assert [r.doc["seed"] for r in reps] == [3, 1, 2]
    assert reps[1] == run_experiment(sc.replace(seed=1))


@pytest.mark.parametrize("protocol", ["tadmac", "bmac", "lmac"])
def test_empty_star_sends_no_data(protocol):
    rep = run_experiment(star_scenario(protocol, transmitters=0, horizon_s=1000.0))
    assert rep.doc["packets_by_kind"].get("DATA", 0) == 0
    if protocol == "tadmac":
        assert rep.doc["channel"]["transmitted"] == 0
        assert rep.sleep_fraction() == 1.0
