"""교통 지표와 후생 분석 테스트"""

import pytest

from src.analytics import appendix_layout, sweep_report, traffic_metrics, welfare_change
from src.errors import PopulationError
from src.events import (
    Event, EventLog, EVENT_ARRIVE, EVENT_DEPART, EVENT_LINK_ENTER, EVENT_LINK_LEAVE, EVENT_SAV_EMPTY, EVENT_TOLL,
)
from src.fixtures import DIAMOND_HOME, DIAMOND_WORK
from src.mobsim import measure_flows
from src.models import METERS_PER_MILE
from src.pricing import TollSchedule, distance_schedule, facility_schedule, select_congested_links
from src.replanning import ReplanningConfig, Scenario, run_to_equilibrium
from src.runner import StoredRun

from .conftest import make_agent, make_plan


def _trip_log():
    return EventLog([
        Event(0.0, EVENT_DEPART, "a", link_id="hs", mode="car", trip_index=0),
        Event(0.0, EVENT_LINK_ENTER, "a", "a:car", "sa", "car", 0),
        Event(10.0, EVENT_DEPART, "b", link_id="hs", mode="pt", trip_index=0),
        Event(80.0, EVENT_LINK_LEAVE, "a", "a:car", "sa", "car", 0),
        Event(80.0, EVENT_ARRIVE, "a", link_id="sa", mode="car", trip_index=0, distance=1000.0),
        Event(100.0, EVENT_LINK_ENTER, "c", "sav_0", "sb", "sav", 0),
        Event(160.0, EVENT_LINK_LEAVE, "c", "sav_0", "sb", "sav", 0),
        Event(160.0, EVENT_SAV_EMPTY, "c", "sav_0", "sb", "sav", 0, distance=1200.0),
    ])


class TestTrafficMetrics:
    def test_distance_and_delay(self, diamond_net):
        metrics = traffic_metrics(_trip_log(), diamond_net)
        assert metrics.vmt == pytest.approx(2200.0 / METERS_PER_MILE)
        assert metrics.empty_vmt == pytest.approx(1200.0 / METERS_PER_MILE)
        assert metrics.total_delay == pytest.approx(30.0 / 3600.0)

    def test_mode_shares_and_partial_log(self, diamond_net):
        metrics = traffic_metrics(_trip_log(), diamond_net)
        assert metrics.trips == 2
        assert metrics.motorized_trips == 1
        assert metrics.mode_shares["car"] == pytest.approx(50.0)
        assert metrics.partial


def _tolled_log(*amounts):
    return EventLog([Event(float(i), EVENT_TOLL, "a", amount=amount) for i, amount in enumerate(amounts)])


class TestWelfare:
    def test_pure_transfer_is_neutral(self):
        baseline = StoredRun(EventLog(), {"a": 100.0, "b": 50.0})
        tolled = StoredRun(_tolled_log(1.0, 2.0), {"a": 100.0 - 0.79 * 1.0, "b": 50.0 - 0.79 * 2.0})
        report = welfare_change(baseline, tolled, 0.79)
        assert report.revenues == pytest.approx(3.0)
        assert report.consumer_surplus_change == pytest.approx(-3.0)
        assert report.welfare_change == pytest.approx(0.0, abs=1e-9)

    def test_literal_form_multiplies(self):
        baseline = StoredRun(EventLog(), {"a": 100.0})
        tolled = StoredRun(EventLog(), {"a": 90.0})
        report = welfare_change(baseline, tolled, 0.79, literal=True)
        assert report.consumer_surplus_change == pytest.approx(-7.9)
        assert report.literal

    def test_baseline_against_itself(self, diamond_net):
        run = StoredRun(_trip_log(), {"a": 10.0, "b": 5.0})
        report = welfare_change(run, run, 0.79, network=diamond_net)
        assert report.welfare_change == 0.0
        assert report.to_row()["vmt_change_pct"] == 0.0
        assert "후생 변화" in report.to_text()

    def test_population_mismatch(self):
        with pytest.raises(PopulationError):
            welfare_change(StoredRun(EventLog(), {"a": 1.0}), StoredRun(EventLog(), {"b": 1.0}), 0.79)


def test_distance_sweep(diamond_net, scoring):
    agents = []
    for i in range(12):
        plan = make_plan(DIAMOND_HOME, DIAMOND_WORK, leave=7.5 * 3600.0 + 60 * i)
        agents.append(make_agent(f"a{i:02d}", plan))
    scenario = Scenario(diamond_net, agents, scoring)
    table, best = sweep_report(scenario, "distance", (0.1, 0.2), ReplanningConfig(max_iterations=3), seed=5)
    assert list(table["fare"]) == [0.1, 0.2]
    assert best is None or best in (0.1, 0.2)
    assert list(appendix_layout(table).columns) == [0.1, 0.2]


def test_sweep_rejects_dynamic_schemes(diamond_net, scoring):
    scenario = Scenario(diamond_net, [make_agent("a", make_plan(DIAMOND_HOME, DIAMOND_WORK))], scoring)
    with pytest.raises(ValueError):
        sweep_report(scenario, "mcp")


MORNING = ((7 * 3600.0, 9 * 3600.0),)


@pytest.fixture
def static_sweep(diamond_net, scoring):
    agents = [make_agent(f"a{i:02d}", make_plan(DIAMOND_HOME, DIAMOND_WORK, leave=7.5 * 3600.0 + 30 * i))
              for i in range(16)]
    scenario = Scenario(diamond_net, agents, scoring)
    replanning = ReplanningConfig(weights={}, max_iterations=3)
    baseline = run_to_equilibrium(scenario, TollSchedule(), replanning, seed=2)
    return scenario, replanning, baseline


@pytest.mark.parametrize("kind", ["distance", "facility"])
def test_best_fare_is_reproducible(static_sweep, kind):
    """최적 단가를 따로 다시 돌려도 같은 후생 변화가 나온다"""
    scenario, replanning, baseline = static_sweep
    fares = (0.1, 0.2, 0.3)
    table, best = sweep_report(scenario, kind, fares, replanning, seed=2, baseline=baseline,
                               threshold=0.01, peaks=MORNING)
    assert table["converged"].all()
    assert best in fares
    assert table.loc[table["fare"] == best, "welfare_change"].iloc[0] == table["welfare_change"].max()

    if kind == "facility":
        links = select_congested_links(measure_flows(baseline.events, scenario.network),
                                       scenario.network, 0.01, MORNING)
        assert links
        schedule = facility_schedule(links, best, MORNING)
    else:
        schedule = distance_schedule(best)
    state = run_to_equilibrium(scenario, schedule, replanning, seed=2)
    report = welfare_change(baseline, state, scenario.scoring.beta_money, network=scenario.network)
    assert report.welfare_change == pytest.approx(table.loc[table["fare"] == best, "welfare_change"].iloc[0])
