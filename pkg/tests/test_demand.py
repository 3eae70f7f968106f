"""수요 모듈 테스트"""

import json

import pytest

from src.demand import (
    CHAIN_CATALOG, generate_scenario, get_preset, load_population, save_population, validate_routability,
)
from src.errors import PopulationError, RoutingError
from src.models import Link, Node, MODE_AV, MODE_CAR, MODE_SAV
from src.network import build_network


def _record(agent_id="p1", modes=("car", "pt"), chain=None, version=1):
    chain = chain or [
        {"act": "Home", "link": "sh", "end": "08:00"},
        {"mode": "car"},
        {"act": "Work", "link": "tw", "end": "17:00"},
        {"mode": "car"},
        {"act": "Home", "link": "sh"},
    ]
    return {"version": version, "id": agent_id, "modes": list(modes), "chain": chain}


def _write(path, *records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


class TestPresets:
    def test_name_normalization(self):
        assert get_preset("AVOriented").name == "av-oriented"
        assert get_preset("sav_oriented").name == "sav-oriented"

    def test_unknown_preset(self):
        with pytest.raises(PopulationError):
            get_preset("nowhere")

    def test_chain_catalog_mean_trips(self):
        total = sum(w for _, w in CHAIN_CATALOG)
        mean = sum(w * (len(chain) - 1) for chain, w in CHAIN_CATALOG) / total
        assert mean == pytest.approx(3.5)


class TestGenerateScenario:
    def test_sav_oriented_shares(self, grid_net):
        agents, spec = generate_scenario("sav-oriented", 300, 7, grid_net)
        assert len(agents) == 300
        assert spec.fleet_size(300) == 30
        assert abs(sum(MODE_CAR in a.modes for a in agents) - 180) <= 1
        assert abs(sum(MODE_AV in a.modes for a in agents) - 30) <= 1
        assert all(MODE_SAV in a.modes for a in agents)

    def test_base_has_no_fleet(self, grid_net):
        agents, spec = generate_scenario("base", 100, 1, grid_net)
        assert spec.fleet_size(100) == 0
        assert sum(MODE_CAR in a.modes for a in agents) == 90
        assert not any(MODE_SAV in a.modes for a in agents)

    def test_av_oriented_fleet(self, grid_net):
        _, spec = generate_scenario("av-oriented", 90, 1, grid_net)
        assert spec.fleet_size(90) == 3

    def test_plans_are_valid(self, grid_net):
        agents, _ = generate_scenario("sav-oriented", 50, 3, grid_net)
        for agent in agents:
            plan = agent.selected_plan
            plan.validate()
            assert set(plan.modes()) <= set(agent.modes)
            assert all(not t.route for t in plan.trips)

    def test_same_seed_same_population(self, grid_net):
        first, _ = generate_scenario("sav-oriented", 40, 11, grid_net)
        second, _ = generate_scenario("sav-oriented", 40, 11, grid_net)
        assert [a.selected_plan.signature() for a in first] == [a.selected_plan.signature() for a in second]

    def test_non_positive_size(self, grid_net):
        with pytest.raises(PopulationError):
            generate_scenario("base", 0, 1, grid_net)


class TestPopulationFile:
    def test_load(self, tmp_path, diamond_net):
        agents = load_population(_write(tmp_path / "pop.jsonl", _record()), diamond_net)
        assert len(agents) == 1
        plan = agents[0].selected_plan
        assert plan.activities[0].end_time == 8 * 3600
        assert plan.modes() == ("car", "car")

    def test_unknown_link(self, tmp_path, diamond_net):
        record = _record()
        record["chain"][2]["link"] = "nowhere"
        with pytest.raises(PopulationError):
            load_population(_write(tmp_path / "pop.jsonl", record), diamond_net)

    def test_mode_not_available(self, tmp_path, diamond_net):
        with pytest.raises(PopulationError):
            load_population(_write(tmp_path / "pop.jsonl", _record(modes=("pt",))), diamond_net)

    def test_wrong_version(self, tmp_path, diamond_net):
        with pytest.raises(PopulationError):
            load_population(_write(tmp_path / "pop.jsonl", _record(version=2)), diamond_net)

    def test_duplicate_id(self, tmp_path, diamond_net):
        with pytest.raises(PopulationError):
            load_population(_write(tmp_path / "pop.jsonl", _record(), _record()), diamond_net)

    def test_saved_population_loads_back(self, tmp_path, diamond_net):
        agents, _ = generate_scenario("base", 20, 5, diamond_net)
        path = tmp_path / "pop.jsonl"
        save_population(agents, path)
        loaded = load_population(path, diamond_net)
        assert [a.id for a in loaded] == [a.id for a in agents]
        assert loaded[3].selected_plan.signature() == agents[3].selected_plan.signature()


def test_unreachable_trip_is_reported(tmp_path):
    nodes = [Node("a", 0, 0), Node("b", 100, 0), Node("c", 200, 0)]
    links = [Link("ab", "a", "b", 100.0, 10.0, 500.0), Link("ba", "b", "a", 100.0, 10.0, 500.0),
             Link("cc", "c", "b", 100.0, 10.0, 500.0)]
    network = build_network(nodes, links)
    record = _record(chain=[
        {"act": "Home", "link": "ab", "end": "08:00"},
        {"mode": "car"},
        {"act": "Work", "link": "cc", "end": "17:00"},
        {"mode": "car"},
        {"act": "Home", "link": "ab"},
    ])
    agents = load_population(_write(tmp_path / "pop.jsonl", record), network)
    with pytest.raises(RoutingError):
        validate_routability(agents, network)
