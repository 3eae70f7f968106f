"""명령행 테스트"""

import json
from pathlib import Path

import pandas as pd
import pytest

from src.config import ScenarioConfig
from src.errors import PricingError, ScoringError
from src.main import EXIT_OK, EXIT_USAGE, main
from src.persistence import (
    EVENTS_FILE, LINK_SELECTION_FILE, METADATA_FILE, PLANS_FILE, RESOLVED_CONFIG, SCHEDULE_FILE, SCORES_FILE, TRACE_FILE,
    WELFARE_CSV,
)

EXAMPLE_CONFIG = Path(__file__).parent.parent / "config" / "scenario.example.json"

SMALL_RUN = ["--network", "fixture:diamond", "--preset", "base", "--agents", "10", "--iterations", "2",
             "--seed", "3"]


def _only_run_dir(root: Path) -> Path:
    dirs = [p for p in root.iterdir() if p.is_dir()]
    assert len(dirs) == 1
    return dirs[0]


@pytest.fixture(scope="module")
def baseline_runs(tmp_path_factory):
    roots = [tmp_path_factory.mktemp(f"run{i}") for i in range(2)]
    for root in roots:
        assert main(["run", *SMALL_RUN, "--output", str(root)]) == EXIT_OK
    return [_only_run_dir(root) for root in roots]


class TestValidate:
    def test_example_config(self):
        assert main(["validate", str(EXAMPLE_CONFIG)]) == EXIT_OK

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"name": "x", "speed_limit": 3}), encoding="utf-8")
        assert main(["validate", str(path)]) == EXIT_USAGE

    def test_bad_values(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"preset": "moon", "n_agents": 0}), encoding="utf-8")
        assert main(["validate", str(path)]) == EXIT_USAGE

    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "none.json")]) == EXIT_USAGE


def test_unknown_command():
    assert main(["fly"]) == EXIT_USAGE


def test_relative_paths_follow_config_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"network": "net.csv"}), encoding="utf-8")
    config = ScenarioConfig.load(path)
    assert config.resolve_path(config.network) == tmp_path / "net.csv"


class TestRun:
    def test_outputs_written(self, baseline_runs):
        run_dir = baseline_runs[0]
        for name in (RESOLVED_CONFIG, EVENTS_FILE, PLANS_FILE, SCORES_FILE, METADATA_FILE):
            assert (run_dir / name).exists(), name
        metadata = json.loads((run_dir / METADATA_FILE).read_text(encoding="utf-8"))
        assert metadata["seed"] == 3
        assert metadata["n_agents"] == 10

    def test_same_seed_same_events(self, baseline_runs):
        first, second = baseline_runs
        assert (first / EVENTS_FILE).read_bytes() == (second / EVENTS_FILE).read_bytes()


class TestReport:
    def test_report_against_itself(self, baseline_runs):
        run_dir = baseline_runs[0]
        assert main(["report", str(run_dir), str(run_dir)]) == EXIT_OK
        assert (run_dir / WELFARE_CSV).exists()

    def test_missing_run_dir(self, tmp_path, baseline_runs):
        assert main(["report", str(baseline_runs[0]), str(tmp_path / "none")]) == EXIT_USAGE

    def test_population_mismatch(self, tmp_path, baseline_runs):
        other = tmp_path / "other"
        assert main(["run", "--network", "fixture:diamond", "--preset", "base", "--agents", "12",
                     "--iterations", "1", "--seed", "3", "--output", str(other)]) == EXIT_OK
        assert main(["report", str(baseline_runs[0]), str(_only_run_dir(other))]) == EXIT_USAGE


class TestSweep:
    def test_dynamic_scheme_rejected(self, tmp_path):
        assert main(["sweep", *SMALL_RUN, "--scheme", "mcp", "--output", str(tmp_path)]) == EXIT_USAGE

    def test_empty_fare_list(self, tmp_path):
        assert main(["sweep", *SMALL_RUN, "--scheme", "distance", "--fares", "",
                     "--output", str(tmp_path)]) == EXIT_USAGE

    def test_distance_sweep(self, tmp_path):
        assert main(["sweep", *SMALL_RUN, "--scheme", "distance", "--fares", "0.1,0.2",
                     "--output", str(tmp_path)]) == EXIT_OK
        assert (_only_run_dir(tmp_path) / "sweep.csv").exists()


def _metadata(run_dir: Path) -> dict:
    return json.loads((run_dir / METADATA_FILE).read_text(encoding="utf-8"))


class TestTolledRun:
    def test_facility_run(self, tmp_path):
        assert main(["run", *SMALL_RUN, "--scheme", "facility", "--rate", "0.2",
                     "--output", str(tmp_path)]) == EXIT_OK
        run_dir = _only_run_dir(tmp_path)
        for name in (LINK_SELECTION_FILE, SCHEDULE_FILE, WELFARE_CSV):
            assert (run_dir / name).exists(), name
        metadata = _metadata(run_dir)
        assert metadata["scheme"] == "facility"
        assert "revenue_recomputed" in metadata

    @pytest.mark.parametrize("scheme", ["mcp", "traveltime"])
    def test_dynamic_run(self, tmp_path, scheme):
        config = tmp_path / "scenario.json"
        config.write_text(json.dumps({"scheme": {"kind": scheme, "max_outer": 2}}), encoding="utf-8")
        output = tmp_path / "out"
        assert main(["run", "--config", str(config), *SMALL_RUN, "--output", str(output)]) == EXIT_OK
        run_dir = _only_run_dir(output)
        trace = pd.read_csv(run_dir / TRACE_FILE)
        assert 1 <= len(trace) <= 2
        assert trace["chosen"].sum() == 1
        metadata = _metadata(run_dir)
        chosen = int(trace.loc[trace["chosen"], "outer_iteration"].iloc[0])
        assert metadata["chosen_outer_iteration"] == chosen
        assert (run_dir / SCHEDULE_FILE).exists()

    def test_shared_fleet_preset(self, tmp_path):
        args = ["run", "--network", "fixture:diamond", "--preset", "sav-oriented", "--agents", "10",
                "--iterations", "2", "--seed", "3", "--output", str(tmp_path)]
        assert main(args) == EXIT_OK
        assert (_only_run_dir(tmp_path) / EVENTS_FILE).exists()


@pytest.mark.parametrize("error", [PricingError, ScoringError])
def test_domain_errors_are_usage_errors(tmp_path, monkeypatch, error):
    def fail(config, output_root):
        raise error("잘못된 입력")

    monkeypatch.setattr("src.runner.cli_run", fail)
    assert main(["run", *SMALL_RUN, "--output", str(tmp_path)]) == EXIT_USAGE
