"""공진화 재계획 모듈

계획 선택(로짓), 변이(출발 시각/경로/수단), 기억 관리, 평형 수렴 판정.
"""

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from scipy.special import softmax

from .demand import validate_routability
from .errors import ConfigError, RoutingError, ScoringError
from .events import EventLog
from .mobsim import MobsimConfig, simulate_day
from .models import Agent, Plan, DAY_SECONDS, PRIVATE_VEHICLE_MODES, ALL_MODES
from .network import Network
from .router import GeneralizedCost, TravelTimes, route
from .sav import FleetSpec
from .scoring import ExperiencedPlan, ScoringConfig, extract_experienced_plans, score_plan
from .utils import make_rng

LOG = logging.getLogger(__name__)

MUTATE_DEPARTURE = "departure_time"
MUTATE_ROUTE = "route"
MUTATE_MODE = "mode"
MUTATORS = (MUTATE_DEPARTURE, MUTATE_ROUTE, MUTATE_MODE)


@dataclass
class ReplanningConfig:
    """재계획 설정. 선택 확률은 1 − Σ변이 확률"""
    weights: Dict[str, float] = field(default_factory=lambda: {
        MUTATE_DEPARTURE: 0.1, MUTATE_ROUTE: 0.1, MUTATE_MODE: 0.1,
    })
    mu: float = 1.0
    max_iterations: int = 150
    innovation_off_fraction: float = 0.2
    departure_range: float = 1800.0  # s
    tolerance: float = 0.05
    window: int = 10

    def __post_init__(self):
        unknown = set(self.weights) - set(MUTATORS)
        if unknown:
            raise ConfigError(f"알 수 없는 변이 전략: {sorted(unknown)}")
        if any(w < 0 for w in self.weights.values()) or self.selection_weight < -1e-9:
            raise ConfigError(f"변이 확률은 0 이상이고 합이 1 이하여야 합니다: {self.weights}")
        if self.mu <= 0:
            raise ConfigError(f"로짓 스케일은 양수여야 합니다: {self.mu}")
        if self.max_iterations < 1 or self.window < 1:
            raise ConfigError("반복 횟수와 수렴 창은 1 이상이어야 합니다")
        if not 0.0 <= self.innovation_off_fraction < 1.0:
            raise ConfigError(f"혁신 중단 비율은 0~1 범위여야 합니다: {self.innovation_off_fraction}")

    @property
    def selection_weight(self) -> float:
        return 1.0 - sum(self.weights.values())

    def innovation_stop(self) -> int:
        """이 반복 번호부터는 선택만 한다"""
        return int(math.floor(self.max_iterations * (1.0 - self.innovation_off_fraction)))


@dataclass
class Scenario:
    """한 번의 평형 계산에 필요한 입력 묶음"""
    network: Network
    agents: List[Agent]
    scoring: ScoringConfig
    fleet: Optional[FleetSpec] = None
    mobsim: MobsimConfig = field(default_factory=MobsimConfig)
    name: str = "scenario"


@dataclass
class RelaxedState:
    """수렴(또는 최선) 상태: 에이전트 기억, 마지막 로그, 실행 점수"""
    agents: List[Agent]
    events: EventLog
    executed_scores: Dict[str, float]
    history: pd.DataFrame
    converged: bool
    iterations: int
    travel_times: Optional[TravelTimes] = None

    def experienced(self) -> Dict[str, ExperiencedPlan]:
        return extract_experienced_plans(self.events)

    def mean_score(self) -> float:
        return float(np.mean(list(self.executed_scores.values()))) if self.executed_scores else 0.0


class ReplanningContext:
    """변이에 필요한 도로망, 통행 시간, 통행료, 효용 설정"""

    def __init__(self, network: Network, scoring: ScoringConfig, schedule=None,
                 travel_times: Optional[TravelTimes] = None, departure_range: float = 1800.0):
        self.network = network
        self.scoring = scoring
        self.schedule = schedule
        self.travel_times = travel_times or TravelTimes(network)
        self.departure_range = departure_range

    def cost_function(self, mode: str) -> GeneralizedCost:
        params = self.scoring.mode(mode)
        charge_fn = None
        if self.schedule is not None:
            network = self.network
            charge_fn = lambda link_id, t, tt: self.schedule.expected_charge(link_id, t, tt, network)
        return GeneralizedCost(
            network=self.network,
            time_weight=self.scoring.beta_act - params.beta_travel,
            beta_money=self.scoring.beta_money,
            distance_rate=params.distance_rate,
            charge_fn=charge_fn,
        )

    def route_trip(self, plan: Plan, index: int) -> List[str]:
        trip = plan.trips[index]
        origin = plan.activities[index].link_id
        destination = plan.activities[index + 1].link_id
        return route(self.network, origin, destination, plan.departure_time(index),
                     self.cost_function(trip.mode), self.travel_times)


def route_missing(agent: Agent, context: ReplanningContext):
    """경로가 비어 있는 자가용 이동의 초기 경로 탐색"""
    for plan in agent.plans:
        for i, trip in enumerate(plan.trips):
            if trip.mode in PRIVATE_VEHICLE_MODES and not trip.route:
                trip.route = context.route_trip(plan, i)


def select_plan(agent: Agent, mu: float, rng: np.random.Generator) -> int:
    """로짓 선택: P(i) ∝ exp(μ·score_i)

    Raises:
        ScoringError: 점수 없는 계획이 기억에 있을 때
    """
    scores = [p.score for p in agent.plans]
    if any(s is None for s in scores):
        raise ScoringError(f"{agent.id}: 점수가 없는 계획이 있습니다")
    if len(scores) == 1:
        return 0
    probabilities = softmax(mu * np.asarray(scores, dtype=float))
    return int(rng.choice(len(scores), p=probabilities))


def _mutate_departure(plan: Plan, rng: np.random.Generator, context: ReplanningContext) -> Optional[Plan]:
    previous = 0.0
    for act in plan.activities[:-1]:
        shifted = act.end_time + rng.uniform(-context.departure_range, context.departure_range)
        shifted = float(int(round(min(max(shifted, 0.0, previous), float(DAY_SECONDS)))))
        act.end_time = max(shifted, previous)
        previous = act.end_time
    return plan


def _mutate_route(plan: Plan, rng: np.random.Generator, context: ReplanningContext) -> Optional[Plan]:
    indices = [i for i, t in enumerate(plan.trips) if t.mode in PRIVATE_VEHICLE_MODES]
    if not indices:
        return None
    for i in indices:
        plan.trips[i].route = context.route_trip(plan, i)
    return plan


def _mutate_mode(plan: Plan, agent: Agent, rng: np.random.Generator,
                 context: ReplanningContext) -> Optional[Plan]:
    current = plan.trips[0].mode
    options = [m for m in agent.modes if m != current]
    if not options:
        return None
    mode = options[int(rng.integers(len(options)))]
    for i, trip in enumerate(plan.trips):
        trip.mode = mode
        trip.route = []
    if mode in PRIVATE_VEHICLE_MODES:
        for i in range(len(plan.trips)):
            plan.trips[i].route = context.route_trip(plan, i)
    return plan


def mutate(agent: Agent, mutator: str, rng: np.random.Generator, context: ReplanningContext) -> bool:
    """선택된 계획을 복제해 변이하고 기억에 추가

    중복 계획이거나 변이할 것이 없으면 기억을 바꾸지 않고 False.
    기억이 넘치면 새 계획을 제외한 최저 점수 계획을 버린다.
    """
    candidate = agent.selected_plan.copy()
    if mutator == MUTATE_DEPARTURE:
        candidate = _mutate_departure(candidate, rng, context)
    elif mutator == MUTATE_ROUTE:
        candidate = _mutate_route(candidate, rng, context)
    elif mutator == MUTATE_MODE:
        candidate = _mutate_mode(candidate, agent, rng, context)
    else:
        raise ConfigError(f"알 수 없는 변이 전략: {mutator}")
    if candidate is None:
        return False

    candidate.validate()
    signature = candidate.signature()
    if any(p.signature() == signature for p in agent.plans):
        return False

    agent.plans.append(candidate)
    agent.selected = len(agent.plans) - 1
    if len(agent.plans) > agent.memory_capacity:
        others = [(p.score if p.score is not None else -math.inf, i) for i, p in enumerate(agent.plans[:-1])]
        _, worst = min(others)
        del agent.plans[worst]
        agent.selected = len(agent.plans) - 1
    return True


def _mode_shares(events: EventLog) -> Dict[str, float]:
    counts = {m: 0 for m in ALL_MODES}
    for event in events.of_kind("depart"):
        counts[event.mode] = counts.get(event.mode, 0) + 1
    total = sum(counts.values())
    return {m: (c / total if total else 0.0) for m, c in counts.items()}


def _window_converged(series: List[float], window: int, tolerance: float) -> bool:
    if len(series) < window:
        return False
    tail = np.asarray(series[-window:])
    scale = max(abs(float(tail.mean())), 1e-9)
    return float(tail.max() - tail.min()) / scale < tolerance


def run_to_equilibrium(
    scenario: Scenario,
    schedule=None,
    config: Optional[ReplanningConfig] = None,
    seed: int = 0,
) -> RelaxedState:
    """시뮬레이션-점수-재계획 반복으로 확률적 사용자 평형을 찾는다

    평균 실행 점수의 최근 window회 상대 범위가 tolerance 미만이면 수렴으로 보고
    남은 혁신 중단 구간(선택만)을 짧게 실행한 뒤 종료한다.
    최대 반복까지 수렴하지 못하면 평균 점수가 가장 높았던 상태를 converged=False로 돌려준다.
    입력 인구는 변경하지 않는다.
    """
    config = config or ReplanningConfig()
    network = scenario.network
    agents = copy.deepcopy(scenario.agents)
    if not agents:
        raise ConfigError("에이전트가 없습니다")

    context = ReplanningContext(network, scenario.scoring, schedule, None, config.departure_range)
    for agent in agents:
        route_missing(agent, context)
    validate_routability(agents, network)

    rows = []
    scores_series: List[float] = []
    innovation_stop = config.innovation_stop()
    final_iteration = config.max_iterations - 1
    converged = False
    best_snapshot = None
    best_mean = -math.inf
    travel_times = TravelTimes(network)
    state_events = EventLog()
    executed: Dict[str, float] = {}
    it = 0

    for it in range(config.max_iterations):
        plans = {a.id: a.selected_plan for a in agents}
        events = simulate_day(network, plans, schedule, scenario.fleet, seed, scenario.mobsim, travel_times)
        experienced = extract_experienced_plans(events)

        executed = {}
        for agent in agents:
            score = score_plan(agent.selected_plan, experienced.get(agent.id), scenario.scoring)
            agent.selected_plan.score = score
            executed[agent.id] = score
        mean_score = float(np.mean(list(executed.values())))
        scores_series.append(mean_score)
        state_events = events

        row = {
            "iteration": it,
            "mean_executed_score": mean_score,
            "mean_best_score": float(np.mean([a.best_score() for a in agents])),
            "mean_memory": float(np.mean([len(a.plans) for a in agents])),
            "innovating": it < innovation_stop,
        }
        row.update({f"share_{m}": s for m, s in _mode_shares(events).items()})
        rows.append(row)
        LOG.info("[%s] 반복 %d: 평균 실행 점수 %.4f", scenario.name, it, mean_score)

        travel_times = TravelTimes.from_events(network, events)
        if mean_score > best_mean:
            best_mean = mean_score
            best_snapshot = (copy.deepcopy(agents), events, dict(executed), it, travel_times)

        if not converged and _window_converged(scores_series, config.window, config.tolerance):
            converged = True
            if it < innovation_stop:
                # 남은 구간은 선택만 수행
                tail = max(1, int(math.ceil(config.innovation_off_fraction * (it + 1))))
                innovation_stop = it + 1
                final_iteration = min(final_iteration, it + tail)
            else:
                final_iteration = it
        if it >= final_iteration:
            break

        context.travel_times = travel_times
        innovating = it + 1 < innovation_stop
        new_plans = _replan(agents, config, context, seed, it + 1, innovating)
        if innovating and new_plans == 0 and all(len(a.plans) == 1 for a in agents):
            converged = True
            LOG.info("[%s] 새 계획이 없어 정적 평형으로 종료", scenario.name)
            break

    history = pd.DataFrame(rows)
    if converged:
        LOG.info("[%s] 수렴: %d회 반복", scenario.name, it + 1)
        return RelaxedState(agents, state_events, executed, history, True, it + 1, travel_times)

    LOG.warning("[%s] %d회 반복 내 수렴 실패, 최선 상태(반복 %d)를 반환합니다",
                scenario.name, config.max_iterations, best_snapshot[3])
    best_agents, best_events, best_scores, best_it, best_times = best_snapshot
    return RelaxedState(best_agents, best_events, best_scores, history, False, it + 1, best_times)


def _replan(agents: List[Agent], config: ReplanningConfig, context: ReplanningContext,
            seed: int, iteration: int, innovating: bool) -> int:
    """에이전트별 전략 선택. 추가된 새 계획 수를 반환"""
    rng_select = make_rng(seed, f"selection/{iteration}")
    rng_mutate = make_rng(seed, f"mutation/{iteration}")
    created = 0
    for agent in sorted(agents, key=lambda a: a.id):
        draw = rng_mutate.random()
        strategy = None
        if innovating:
            cumulative = 0.0
            for mutator in MUTATORS:
                cumulative += config.weights.get(mutator, 0.0)
                if draw < cumulative:
                    strategy = mutator
                    break
        if strategy is not None:
            try:
                if mutate(agent, strategy, rng_mutate, context):
                    created += 1
                    continue
            except RoutingError as e:
                LOG.debug("%s: 변이 실패 (%s)", agent.id, e)
        agent.selected = select_plan(agent, config.mu, rng_select)
    return created
