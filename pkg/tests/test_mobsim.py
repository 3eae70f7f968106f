"""큐 시뮬레이션 테스트"""

from collections import defaultdict

import pytest

from src.demand import generate_scenario
from src.errors import ConfigError, RoutingError
from src.events import (
    EVENT_ARRIVE, EVENT_DEPART, EVENT_LINK_ENTER, EVENT_LINK_LEAVE, EVENT_SAV_DROPOFF, EVENT_SAV_EMPTY,
    EVENT_SAV_PICKUP, EVENT_STUCK,
)
from src.fixtures import CORRIDOR_HOME, CORRIDOR_WORK, DIAMOND_HOME, DIAMOND_WORK
from src.models import Link, Node
from src.mobsim import MobsimConfig, measure_flows, simulate_day
from src.network import build_network
from src.replanning import ReplanningContext, route_missing
from src.sav import AV_SCENARIO_TARIFF, FleetSpec, fare_for_trip
from src.scoring import default_scoring

from .conftest import make_plan

EIGHT_AM = 8 * 3600.0


@pytest.fixture
def unit_net():
    """x: 100 m, 10 m/s, 360 veh/h (10초에 한 대)"""
    nodes = [Node("p", -100.0, 0.0), Node("a", 0.0, 0.0), Node("b", 100.0, 0.0)]
    links = [
        Link("o", "p", "a", 100.0, 10.0, 3600.0),
        Link("x", "a", "b", 100.0, 10.0, 360.0),
        Link("y", "b", "p", 200.0, 10.0, 3600.0),
    ]
    return build_network(nodes, links)


def _unit_plans(mode="car", n=2):
    return {
        f"a{i}": make_plan("o", "x", mode, leave=0.0, back=20 * 3600.0, out_route=["x"], back_route=["y", "o"])
        for i in range(n)
    }


def _leaves(log, link_id):
    return [e.time for e in log.of_kind(EVENT_LINK_LEAVE) if e.link_id == link_id]


class TestQueueDynamics:
    def test_unit_capacity_trace(self, unit_net):
        log = simulate_day(unit_net, _unit_plans())
        enters = [e.time for e in log.of_kind(EVENT_LINK_ENTER) if e.link_id == "x"]
        assert enters == [0.0, 0.0]
        assert _leaves(log, "x") == [10.0, 20.0]

    def test_autonomous_vehicles_use_less_capacity(self, unit_net):
        cars = simulate_day(unit_net, _unit_plans("car", 3))
        avs = simulate_day(unit_net, _unit_plans("av", 3))
        assert _leaves(cars, "x") == [10.0, 20.0, 30.0]
        assert _leaves(avs, "x") == [10.0, 17.0, 24.0]

    def test_head_segment_sets_the_rate(self, unit_net):
        # a0, a1 AV가 앞, a2..a5 일반 차량이 뒤
        plans = _unit_plans("av", 2)
        for i in range(2, 6):
            plans[f"a{i}"] = make_plan("o", "x", "car", leave=0.0, back=20 * 3600.0,
                                       out_route=["x"], back_route=["y", "o"])
        log = simulate_day(unit_net, plans)
        assert _leaves(log, "x") == [10.0, 17.0, 27.0, 37.0, 47.0, 57.0]

    def test_free_flow_car_trip(self, diamond_net):
        plans = {"a": make_plan(DIAMOND_HOME, DIAMOND_WORK, out_route=["hs", "sa", "at", "tw"],
                                back_route=["wt", "ts", "sh"])}
        log = simulate_day(diamond_net, plans)
        arrive = log.of_kind(EVENT_ARRIVE)[0]
        assert arrive.time == EIGHT_AM + 150
        assert arrive.distance == 3000.0

    def test_teleported_trip(self, diamond_net):
        plans = {"a": make_plan(DIAMOND_HOME, DIAMOND_WORK, "pt")}
        log = simulate_day(diamond_net, plans, config=MobsimConfig(beeline_factor=1.0))
        arrive = log.of_kind(EVENT_ARRIVE)[0]
        assert arrive.time == EIGHT_AM + 540
        assert arrive.distance == pytest.approx(3000.0)
        assert not log.of_kind(EVENT_LINK_ENTER)

    def test_broken_route(self, diamond_net):
        plans = {"a": make_plan(DIAMOND_HOME, DIAMOND_WORK, out_route=["hs", "at", "tw"],
                                back_route=["wt", "ts", "sh"])}
        with pytest.raises(RoutingError):
            simulate_day(diamond_net, plans)

    def test_unfinished_trip_is_stuck(self, diamond_net):
        plans = {"a": make_plan(DIAMOND_HOME, DIAMOND_WORK, out_route=["hs", "sa", "at", "tw"],
                                back_route=["wt", "ts", "sh"])}
        log = simulate_day(diamond_net, plans, config=MobsimConfig(horizon=EIGHT_AM + 60))
        stuck = log.of_kind(EVENT_STUCK)
        assert len(stuck) == 1
        assert stuck[0].time == EIGHT_AM + 60
        assert stuck[0].trip_index == 0

    def test_sav_trip_without_fleet(self, diamond_net):
        plans = {"a": make_plan(DIAMOND_HOME, DIAMOND_WORK, "sav")}
        with pytest.raises(ConfigError):
            simulate_day(diamond_net, plans)


@pytest.fixture(scope="module")
def corridor_day():
    from src.fixtures import corridor

    network = corridor()
    agents, _ = generate_scenario("base", 200, 4, network)
    context = ReplanningContext(network, default_scoring())
    for agent in agents:
        route_missing(agent, context)
    plans = {a.id: a.selected_plan for a in agents}
    return network, plans, simulate_day(network, plans, seed=4)


class TestConservation:
    def test_event_times_non_decreasing(self, corridor_day):
        _, _, log = corridor_day
        times = [e.time for e in log]
        assert times == sorted(times)

    def test_every_trip_arrives(self, corridor_day):
        _, plans, log = corridor_day
        assert not log.of_kind(EVENT_STUCK)
        assert len(log.of_kind(EVENT_DEPART)) == len(log.of_kind(EVENT_ARRIVE))
        assert len(log.of_kind(EVENT_ARRIVE)) == sum(len(p.trips) for p in plans.values())

    def test_link_occupancy_within_storage(self, corridor_day):
        network, _, log = corridor_day
        occupancy = defaultdict(int)
        for event in log:
            if event.kind == EVENT_LINK_ENTER:
                occupancy[event.link_id] += 1
                assert occupancy[event.link_id] <= network.link(event.link_id).storage_capacity
            elif event.kind == EVENT_LINK_LEAVE:
                occupancy[event.link_id] -= 1
                assert occupancy[event.link_id] >= 0
        assert all(n == 0 for n in occupancy.values())

    def test_same_input_same_log(self, corridor_day):
        network, plans, log = corridor_day
        assert simulate_day(network, plans, seed=4) == log


def test_measure_flows(unit_net):
    log = simulate_day(unit_net, _unit_plans())
    first = measure_flows(log, unit_net, links=["x"])["x"][0]
    assert first.users == 2
    assert first.outflow == pytest.approx(24.0)
    assert first.density == pytest.approx(1.0)
    assert first.av_share == 0.0


class TestSharedVehicles:
    @pytest.fixture
    def sav_day(self, corridor_net):
        plans = {"rider": make_plan(CORRIDOR_HOME, CORRIDOR_WORK, "sav")}
        fleet = FleetSpec(1, AV_SCENARIO_TARIFF, "listed", (CORRIDOR_WORK,))
        return simulate_day(corridor_net, plans, fleet=fleet)

    def test_empty_approach_is_logged(self, sav_day):
        empty = [e for e in sav_day.of_kind(EVENT_SAV_EMPTY) if e.trip_index == 0]
        assert [e.link_id for e in empty] == ["r3", "r2", "r1", "r0"]
        assert sum(e.distance for e in empty) == 4000.0
        assert all(e.agent_id == "rider" for e in empty)

    def test_pickup_and_fare(self, sav_day):
        pickups = sav_day.of_kind(EVENT_SAV_PICKUP)
        dropoffs = sav_day.of_kind(EVENT_SAV_DROPOFF)
        assert pickups[0].time == EIGHT_AM + 240
        assert dropoffs[0].time == EIGHT_AM + 480
        assert dropoffs[0].distance == 4000.0
        assert dropoffs[0].amount == fare_for_trip(4000.0, 240.0, AV_SCENARIO_TARIFF)
        assert dropoffs[0].amount == pytest.approx(1.89)

    def test_vehicle_waiting_at_origin(self, sav_day):
        pickups = sav_day.of_kind(EVENT_SAV_PICKUP)
        assert pickups[1].time == 17 * 3600.0
        assert not [e for e in sav_day.of_kind(EVENT_SAV_EMPTY) if e.trip_index == 1]

    def test_vehicle_miles_split(self, sav_day):
        driven = 1000.0 * len(sav_day.of_kind(EVENT_LINK_LEAVE))
        empty = sum(e.distance for e in sav_day.of_kind(EVENT_SAV_EMPTY))
        occupied = sum(e.distance for e in sav_day.of_kind(EVENT_SAV_DROPOFF))
        assert driven == empty + occupied


@pytest.mark.slow
@pytest.mark.parametrize("fixture_name, preset", [
    ("diamond", "base"), ("diamond", "av-oriented"), ("grid", "av-oriented"), ("grid", "sav-oriented"),
])
def test_large_day_is_conserved_and_repeatable(fixture_name, preset):
    """500명 하루 시뮬레이션: 용량, 출발/도착 보존, 재현성"""
    from src.fixtures import load_fixture

    network = load_fixture(f"fixture:{fixture_name}")
    agents, spec = generate_scenario(preset, 500, 11, network)
    context = ReplanningContext(network, default_scoring())
    for agent in agents:
        route_missing(agent, context)
    plans = {a.id: a.selected_plan for a in agents}
    size = spec.fleet_size(len(agents))
    fleet = FleetSpec(size, spec.tariff or AV_SCENARIO_TARIFF) if size > 0 else None

    log = simulate_day(network, plans, fleet=fleet, seed=11)
    assert simulate_day(network, plans, fleet=fleet, seed=11) == log

    occupancy = defaultdict(int)
    for event in log:
        if event.kind == EVENT_LINK_ENTER:
            occupancy[event.link_id] += 1
            assert occupancy[event.link_id] <= network.link(event.link_id).storage_capacity
        elif event.kind == EVENT_LINK_LEAVE:
            occupancy[event.link_id] -= 1
            assert occupancy[event.link_id] >= 0

    departed = {(e.agent_id, e.trip_index) for e in log.of_kind(EVENT_DEPART)}
    arrived = {(e.agent_id, e.trip_index) for e in log.of_kind(EVENT_ARRIVE)}
    stuck = {(e.agent_id, e.trip_index) for e in log.of_kind(EVENT_STUCK)}
    assert arrived <= departed
    assert departed <= arrived | stuck
    assert not arrived & stuck
