"""경로 탐색 테스트"""

import pytest

from src.errors import RoutingError
from src.events import Event, EVENT_LINK_ENTER, EVENT_LINK_LEAVE
from src.models import Link, Node
from src.network import build_network
from src.pricing import facility_schedule
from src.router import GeneralizedCost, TravelTimes, route, route_length, route_travel_time
from src.scoring import default_scoring

EIGHT_AM = 8 * 3600.0


def _car_cost(network, schedule=None):
    scoring = default_scoring()
    params = scoring.mode("car")
    charge_fn = None
    if schedule is not None:
        charge_fn = lambda link_id, t, tt: schedule.expected_charge(link_id, t, tt, network)
    return GeneralizedCost(network, scoring.beta_act - params.beta_travel, scoring.beta_money,
                           params.distance_rate, charge_fn)


def test_short_branch_without_toll(diamond_net):
    assert route(diamond_net, "sh", "tw", EIGHT_AM, _car_cost(diamond_net)) == ["hs", "sa", "at", "tw"]


def test_toll_diverts_to_long_branch(diamond_net):
    schedule = facility_schedule(["at"], 0.30)
    path = route(diamond_net, "sh", "tw", EIGHT_AM, _car_cost(diamond_net, schedule))
    assert path == ["hs", "sb", "bt", "tw"]


def test_toll_outside_peak_is_ignored(diamond_net):
    schedule = facility_schedule(["at"], 0.30)
    path = route(diamond_net, "sh", "tw", 12 * 3600.0, _car_cost(diamond_net, schedule))
    assert path == ["hs", "sa", "at", "tw"]


def test_same_origin_and_destination(diamond_net):
    assert route(diamond_net, "sa", "sa", EIGHT_AM) == []


def test_unreachable():
    nodes = [Node("a", 0, 0), Node("b", 100, 0), Node("c", 200, 0)]
    links = [Link("ab", "a", "b", 100.0, 10.0, 500.0), Link("cb", "c", "b", 100.0, 10.0, 500.0)]
    network = build_network(nodes, links)
    with pytest.raises(RoutingError):
        route(network, "ab", "cb", 0.0)


def test_negative_cost_rejected(diamond_net):
    with pytest.raises(RoutingError):
        route(diamond_net, "sh", "tw", 0.0, lambda link_id, t, tt: -1.0)


def test_measured_travel_times_steer_route(diamond_net):
    times = TravelTimes(diamond_net, table={("sa", int(EIGHT_AM // 900)): 500.0})
    path = route(diamond_net, "sh", "tw", EIGHT_AM - 25, travel_times=times)
    assert path == ["hs", "sb", "bt", "tw"]


def test_travel_times_from_events(diamond_net):
    events = [
        Event(0.0, EVENT_LINK_ENTER, "a", "a:car", "sa"),
        Event(100.0, EVENT_LINK_LEAVE, "a", "a:car", "sa"),
    ]
    times = TravelTimes.from_events(diamond_net, events)
    assert times.get("sa", 10.0) == 100.0
    assert times.get("sa", 5000.0) == 50.0
    assert times.get("sb", 0.0) == 60.0


def test_route_measures(diamond_net):
    path = ["hs", "sa", "at", "tw"]
    assert route_travel_time(diamond_net, path, 0.0) == 150.0
    assert route_length(diamond_net, path) == 3000.0
