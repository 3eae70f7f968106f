"""SAV 배차와 요금 테스트"""

import numpy as np
import pytest

from src.sav import (
    AV_SCENARIO_TARIFF, BALANCED_EMPTY, OVERSUPPLY, SAV_SCENARIO_TARIFF, STATUS_APPROACHING, STATUS_IDLE,
    STATUS_OCCUPIED, UNDERSUPPLY, Dispatcher, FleetSpec, FleetVehicle, Request, Tariff, classify, fare,
    place_fleet,
)


def _dispatcher(network, *positions, status=STATUS_IDLE):
    vehicles = [FleetVehicle(f"sav_{i}", i, link_id, status) for i, link_id in enumerate(positions)]
    return Dispatcher(network, vehicles, AV_SCENARIO_TARIFF)


def _request(name, origin, submitted=0.0):
    return Request(name, name, origin, "r0", submitted)


class TestFare:
    def test_autonomous_tariff(self):
        assert fare(5.0, 15.0, AV_SCENARIO_TARIFF) == pytest.approx(4.00)

    def test_shared_tariff(self):
        assert fare(5.0, 15.0, SAV_SCENARIO_TARIFF) == pytest.approx(2.00)

    def test_zero_length_trip_pays_flat_fee(self):
        assert fare(0.0, 0.0, AV_SCENARIO_TARIFF) == pytest.approx(0.50)

    def test_negative_tariff(self):
        with pytest.raises(ValueError):
            Tariff(-0.5, 0.4, 0.1)


class TestDispatch:
    def test_nearest_idle_vehicle(self, corridor_net):
        dispatcher = _dispatcher(corridor_net, "c0", "c2")
        vehicle = dispatcher.on_request(_request("p", "c3"))
        assert vehicle.id == "sav_1"
        assert vehicle.status == STATUS_APPROACHING

    def test_tie_goes_to_lower_index(self, corridor_net):
        dispatcher = _dispatcher(corridor_net, "c2", "c2")
        assert dispatcher.on_request(_request("p", "c3")).id == "sav_0"

    def test_request_waits_without_idle_vehicle(self, corridor_net):
        dispatcher = _dispatcher(corridor_net, "c0", status=STATUS_OCCUPIED)
        assert dispatcher.on_request(_request("p", "c3")) is None
        assert len(dispatcher.open_requests) == 1
        assert dispatcher.classify() == UNDERSUPPLY

    def test_idle_vehicle_takes_nearest_request(self, corridor_net):
        dispatcher = _dispatcher(corridor_net, "c0", status=STATUS_OCCUPIED)
        dispatcher.on_request(_request("far", "c3", 0.0))
        dispatcher.on_request(_request("near", "c1", 10.0))
        served = dispatcher.on_vehicle_idle("sav_0", "c0")
        assert served.id == "near"
        assert [r.id for r in dispatcher.open_requests] == ["far"]

    def test_equal_distance_serves_earlier_request(self, corridor_net):
        dispatcher = _dispatcher(corridor_net, "c0", status=STATUS_OCCUPIED)
        dispatcher.on_request(_request("late", "c1", 20.0))
        dispatcher.on_request(_request("early", "c1", 5.0))
        assert dispatcher.on_vehicle_idle("sav_0", "c0").id == "early"

    def test_request_is_assigned_once(self, corridor_net):
        dispatcher = _dispatcher(corridor_net, "c0", "c1", status=STATUS_OCCUPIED)
        dispatcher.on_request(_request("p", "c3"))
        assert dispatcher.on_vehicle_idle("sav_0", "c0").id == "p"
        assert dispatcher.on_vehicle_idle("sav_1", "c1") is None
        assert dispatcher.vehicles["sav_1"].status == STATUS_IDLE
        assert dispatcher.assignments == 1
        assert dispatcher.classify() == OVERSUPPLY

    def test_pickup_marks_occupied(self, corridor_net):
        dispatcher = _dispatcher(corridor_net, "c0")
        dispatcher.on_request(_request("p", "c1"))
        dispatcher.pickup("sav_0", "c1")
        assert dispatcher.utilization() == {STATUS_IDLE: 0, STATUS_APPROACHING: 0, STATUS_OCCUPIED: 1}


def test_classify_balanced():
    busy = [FleetVehicle("sav_0", 0, "c0", STATUS_OCCUPIED)]
    assert classify(busy, []) == BALANCED_EMPTY


def test_status_is_counted_after_each_decision(corridor_net):
    dispatcher = _dispatcher(corridor_net, "c0")
    assert dispatcher.status == OVERSUPPLY
    dispatcher.on_request(_request("p", "c1"))
    dispatcher.on_request(_request("q", "c2", 5.0))
    dispatcher.on_vehicle_idle("sav_0", "c1")
    dispatcher.on_vehicle_idle("sav_0", "c2")
    assert dispatcher.status_counts == {OVERSUPPLY: 1, UNDERSUPPLY: 1, BALANCED_EMPTY: 2}
    assert dispatcher.status == OVERSUPPLY


@pytest.mark.parametrize("seed", range(5))
def test_dispatch_matches_exhaustive_search(grid_net, seed):
    """무작위 에피소드에서 배차 결과를 전수 탐색과 비교"""
    rng = np.random.default_rng(seed)
    links = grid_net.link_ids()
    positions = [links[i] for i in rng.integers(len(links), size=8)]
    dispatcher = _dispatcher(grid_net, *positions)
    busy = []
    for step in range(40):
        if busy and rng.random() < 0.4:
            vehicle_id = busy.pop(int(rng.integers(len(busy))))
            link_id = links[int(rng.integers(len(links)))]
            waiting = dispatcher.open_requests
            served = dispatcher.on_vehicle_idle(vehicle_id, link_id)
            if waiting:
                expected = min(
                    enumerate(waiting),
                    key=lambda item: (grid_net.freeflow_time(link_id, item[1].origin), item[1].submitted, item[0]),
                )[1]
                assert served.id == expected.id
                busy.append(vehicle_id)
            else:
                assert served is None
        else:
            request = _request(f"r{step}", links[int(rng.integers(len(links)))], float(step))
            idle = [v for v in dispatcher.vehicles.values() if v.status == STATUS_IDLE]
            chosen = dispatcher.on_request(request)
            if idle:
                expected = min(idle, key=lambda v: (grid_net.freeflow_time(v.link_id, request.origin), v.index))
                assert chosen.id == expected.id
                busy.append(chosen.id)
            else:
                assert chosen is None
        idle_now = [v for v in dispatcher.vehicles.values() if v.status == STATUS_IDLE]
        assert not (idle_now and dispatcher.open_requests)


class TestPlacement:
    def test_uniform_is_seeded(self, grid_net):
        spec = FleetSpec(20, AV_SCENARIO_TARIFF)
        first = place_fleet(grid_net, spec, np.random.default_rng(3))
        second = place_fleet(grid_net, spec, np.random.default_rng(3))
        assert [v.link_id for v in first] == [v.link_id for v in second]
        assert [v.id for v in first][:2] == ["sav_0", "sav_1"]

    def test_listed_cycles(self, corridor_net):
        spec = FleetSpec(3, AV_SCENARIO_TARIFF, "listed", ("c0", "r1"))
        vehicles = place_fleet(corridor_net, spec, np.random.default_rng(0))
        assert [v.link_id for v in vehicles] == ["c0", "r1", "c0"]

    def test_listed_needs_links(self):
        with pytest.raises(ValueError):
            FleetSpec(2, AV_SCENARIO_TARIFF, "listed")
