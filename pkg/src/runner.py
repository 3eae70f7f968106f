"""실험 실행 모듈

설정으로 시나리오를 조립하고 run/sweep/report 명령의 실제 작업을 수행한다.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import pandas as pd

from .analytics import WelfareReport, appendix_layout, sweep_report, welfare_change
from .config import ScenarioConfig, get_scoring_config
from .demand import PresetSpec, generate_scenario, get_preset, load_population
from .errors import ConfigError, PopulationError
from .events import EventLog
from .fixtures import is_fixture, load_fixture
from .mobsim import MobsimConfig, measure_flows
from .models import MODE_SAV
from .network import Network, load_network
from .persistence import (
    LINK_SELECTION_FILE, SCHEDULE_FILE, SWEEP_FILE, SWEEP_LAYOUT_FILE, TRACE_FILE, WELFARE_CSV, WELFARE_TXT,
    load_run, make_run_dir, save_metadata, save_resolved_config, save_state, save_table, save_text,
)
from .pricing import (
    SCHEME_DISTANCE, SCHEME_FACILITY, SCHEME_MCP, SCHEME_NONE, SCHEME_TRAVEL_TIME,
    TollSchedule, converge_tolls, distance_schedule, facility_schedule, peak_vc_ratios, recompute_tolls,
    select_congested_links,
)
from .replanning import ReplanningConfig, Scenario, run_to_equilibrium
from .sav import AV_SCENARIO_TARIFF, FleetSpec, Tariff
from .utils import to_cents

LOG = logging.getLogger(__name__)


def build_network_from_config(config: ScenarioConfig) -> Network:
    if is_fixture(config.network):
        return load_fixture(config.network, config.capacity_factor)
    return load_network(config.resolve_path(config.network), config.capacity_factor)


def build_scenario(config: ScenarioConfig) -> Tuple[Scenario, PresetSpec]:
    """설정에서 도로망, 인구, 효용, 차량 공유를 조립"""
    problems = config.validate()
    if problems:
        raise ConfigError("; ".join(problems))

    network = build_network_from_config(config)
    preset = get_preset(config.preset)
    if config.population:
        agents = load_population(config.resolve_path(config.population), network, config.memory_capacity)
    else:
        agents, _ = generate_scenario(preset, config.n_agents, config.seed, network, config.memory_capacity)

    scoring = get_scoring_config(config.scoring_preset)
    if config.mode_cost_rates:
        scoring = scoring.with_distance_rates(config.mode_cost_rates)

    size = config.fleet.size if config.fleet.size is not None else preset.fleet_size(len(agents))
    if config.fleet.tariff is not None:
        tariff = Tariff(*config.fleet.tariff)
    else:
        tariff = preset.tariff or AV_SCENARIO_TARIFF
    fleet = None
    if size > 0:
        fleet = FleetSpec(size, tariff, config.fleet.placement, tuple(config.fleet.links))
    elif any(MODE_SAV in a.modes for a in agents):
        raise ConfigError("SAV를 이용할 수 있는 에이전트가 있으나 차량 수가 0입니다")

    scenario = Scenario(
        network=network,
        agents=agents,
        scoring=scoring,
        fleet=fleet,
        mobsim=MobsimConfig(beeline_factor=config.beeline_factor),
        name=config.name,
    )
    return scenario, preset


def replanning_config(config: ScenarioConfig) -> ReplanningConfig:
    return ReplanningConfig(weights=dict(config.mutation_weights), max_iterations=config.max_iterations)


def _write_welfare(run_dir: Path, report: WelfareReport):
    save_table(run_dir, WELFARE_CSV, pd.DataFrame([report.to_row()]))
    save_text(run_dir, WELFARE_TXT, report.to_text())


def _save_link_selection(run_dir: Path, ratios: Dict[str, float], selected) -> Path:
    rows = [{"link_id": link_id, "peak_vc": round(vc, 4), "selected": link_id in selected}
            for link_id, vc in sorted(ratios.items(), key=lambda item: -item[1])]
    return save_table(run_dir, LINK_SELECTION_FILE, pd.DataFrame(rows))


def cli_run(config: ScenarioConfig, output_root: Path) -> Path:
    """평형 계산(필요하면 통행료 반복 포함) 후 실행 디렉토리에 모든 결과 저장"""
    config = config.resolved()
    scenario, _ = build_scenario(config)
    network = scenario.network
    replanning = replanning_config(config)
    scheme = config.scheme
    run_dir = make_run_dir(output_root, config.name)
    save_resolved_config(run_dir, config)
    LOG.info("실행 시작: %s (체계=%s, 에이전트 %d명)", run_dir, scheme.kind, len(scenario.agents))

    baseline = run_to_equilibrium(scenario, TollSchedule(), replanning, config.seed)
    if scheme.kind == SCHEME_NONE:
        save_state(run_dir, baseline, network)
        save_metadata(run_dir, baseline.converged, config.seed, len(scenario.agents), scheme=SCHEME_NONE)
        return run_dir

    save_state(run_dir, baseline, network, prefix="baseline_")
    extra = {}
    if scheme.kind in (SCHEME_FACILITY, SCHEME_DISTANCE):
        if scheme.kind == SCHEME_FACILITY:
            flows = measure_flows(baseline.events, network)
            selected = select_congested_links(flows, network, scheme.threshold, scheme.peak_seconds())
            ratios = peak_vc_ratios(flows, network, scheme.peak_seconds())
            _save_link_selection(run_dir, ratios, selected)
            schedule = facility_schedule(selected, scheme.rate, scheme.peak_seconds())
        else:
            schedule = distance_schedule(scheme.rate, scheme.window_seconds())
        state = run_to_equilibrium(scenario, schedule, replanning, config.seed)
        report = welfare_change(baseline, state, scenario.scoring.beta_money, config.literal_welfare, network)
        converged = state.converged
    elif scheme.kind in (SCHEME_MCP, SCHEME_TRAVEL_TIME):
        result = converge_tolls(
            scenario, scheme.kind, replanning, config.seed,
            tt_target=scheme.tt_target, utility_target=scheme.utility_target, max_outer=scheme.max_outer,
            value_of_time=scheme.value_of_time, alpha=scheme.alpha, cap=scheme.cap,
            links=config.analyzed_links, baseline=baseline, literal_welfare=config.literal_welfare,
        )
        save_table(run_dir, TRACE_FILE, result.trace)
        state, schedule, report = result.state, result.schedule, result.report
        converged = result.converged and state.converged
        extra["outer_converged"] = result.converged
        extra["chosen_outer_iteration"] = result.chosen_iteration
    else:
        raise ConfigError(f"알 수 없는 통행료 체계: {scheme.kind}")

    logged = to_cents(state.events.total_tolls())
    recomputed = recompute_tolls(state.events, network, schedule)
    if abs(logged - recomputed) > 0.005:
        LOG.warning("통행료 수입 불일치: 이벤트 $%.2f, 스케줄로 재계산 $%.2f", logged, recomputed)
    extra["revenue_recomputed"] = recomputed

    save_state(run_dir, state, network)
    schedule.save(run_dir / SCHEDULE_FILE)
    _write_welfare(run_dir, report)
    save_metadata(run_dir, converged, config.seed, len(scenario.agents), scheme=scheme.kind, **extra)
    LOG.info("실행 완료: %s\n%s", run_dir, report.to_text())
    return run_dir


def cli_sweep(config: ScenarioConfig, output_root: Path, fares: Optional[Sequence[float]] = None,
              workers: int = 1) -> Tuple[Path, pd.DataFrame, Optional[float]]:
    """시설/거리 통행료 단가 격자 스윕"""
    scheme = config.scheme
    if scheme.kind not in (SCHEME_FACILITY, SCHEME_DISTANCE):
        raise ConfigError(f"스윕은 facility/distance 체계에서만 가능합니다: {scheme.kind}")
    fares = list(fares if fares is not None else scheme.fares)
    if not fares:
        raise ConfigError("스윕 단가 목록이 비어 있습니다")

    config = config.resolved()
    scenario, _ = build_scenario(config)
    run_dir = make_run_dir(output_root, f"{config.name}_sweep")
    save_resolved_config(run_dir, config)
    table, best = sweep_report(
        scenario, scheme.kind, fares, replanning_config(config), config.seed,
        workers=workers, threshold=scheme.threshold, peaks=scheme.peak_seconds(),
        window=scheme.window_seconds(), literal=config.literal_welfare,
    )
    table["best"] = table["fare"] == best if best is not None else False
    save_table(run_dir, SWEEP_FILE, table)
    save_table(run_dir, SWEEP_LAYOUT_FILE, appendix_layout(table), index=True)
    save_metadata(run_dir, bool(table["converged"].all()), config.seed, len(scenario.agents),
                  scheme=scheme.kind, fares=fares, best_fare=best)
    return run_dir, table, best


@dataclass
class StoredRun:
    """저장된 실행의 후생 비교용 상태"""
    events: EventLog
    executed_scores: Dict[str, float]


def cli_report(baseline_dir: Path, tolled_dir: Path) -> WelfareReport:
    """두 실행 디렉토리 비교 보고서 (tolled_dir에 welfare.csv/txt 기록)"""
    baseline = load_run(baseline_dir)
    tolled = load_run(tolled_dir)
    for key in ("seed", "n_agents"):
        if baseline["metadata"].get(key) != tolled["metadata"].get(key):
            raise PopulationError(
                f"{key} 불일치: {baseline['metadata'].get(key)} != {tolled['metadata'].get(key)}"
            )
    if set(baseline["scores"]) != set(tolled["scores"]):
        raise PopulationError("두 실행의 인구가 다릅니다")

    config = ScenarioConfig.from_dict(tolled["config"])
    network = build_network_from_config(config)
    scoring = get_scoring_config(config.scoring_preset)
    report = welfare_change(
        StoredRun(baseline["events"], baseline["scores"]),
        StoredRun(tolled["events"], tolled["scores"]),
        scoring.beta_money, config.literal_welfare, network,
    )
    _write_welfare(Path(tolled_dir), report)
    return report
