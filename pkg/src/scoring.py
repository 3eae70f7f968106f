"""효용(점수) 계산 모듈

이동 효용, 활동 효용(로그형), 지각 패널티를 합해 실행된 하루 계획을 평가한다.
점수는 이벤트 로그에서 복원한 실제 경험만으로 계산한다.
"""

import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Dict, Iterable, Optional

from .demand import ACTIVITY_TYPES
from .errors import ScoringError
from .events import (
    Event, EVENT_ARRIVE, EVENT_DEPART, EVENT_SAV_DROPOFF, EVENT_SAV_PICKUP, EVENT_STUCK, EVENT_TOLL,
)
from .models import (
    ActivityType, Plan, METERS_PER_MILE, DAY_SECONDS,
    MODE_CAR, MODE_PT, MODE_WALK_BIKE, MODE_AV, MODE_SAV,
)

LOG = logging.getLogger(__name__)

T0_RULE_EXP10 = "exp10"  # t0 = t*·exp(-10/t*)


@dataclass(frozen=True)
class ModeParams:
    """수단별 효용 파라미터 (β_t: utils/h, 거리 비용: $/mile)"""
    mode: str
    asc: float = 0.0
    beta_travel: float = 0.0
    distance_rate: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ScoringConfig:
    """효용 함수 설정

    beta_act: 활동 수행의 한계 효용 (utils/h)
    beta_money: 화폐의 한계 효용 (utils/$)
    beta_early/beta_late: 조기 도착/지각 패널티 (utils/h)
    """
    name: str = "vtts-target"
    beta_act: float = 14.22
    beta_money: float = 0.79
    beta_early: float = 0.0
    beta_late: float = 12.0
    stuck_penalty: float = -100.0
    activity_floor: float = -100.0
    t0_rule: str = T0_RULE_EXP10
    modes: Dict[str, ModeParams] = field(default_factory=dict)
    activity_types: Dict[str, ActivityType] = field(default_factory=lambda: dict(ACTIVITY_TYPES))

    def __post_init__(self):
        if self.beta_money <= 0:
            raise ScoringError(f"β_c는 양수여야 합니다: {self.beta_money}")
        if self.beta_act <= 0:
            raise ScoringError(f"β_act는 양수여야 합니다: {self.beta_act}")
        if self.beta_early < 0 or self.beta_late < 0:
            raise ScoringError("조기/지각 패널티 계수는 음수가 될 수 없습니다")
        if self.t0_rule != T0_RULE_EXP10:
            raise ScoringError(f"알 수 없는 t0 규칙: {self.t0_rule}")

    def mode(self, mode: str) -> ModeParams:
        try:
            return self.modes[mode]
        except KeyError:
            raise ScoringError(f"수단 파라미터가 없습니다: {mode}") from None

    def activity_type(self, name: str) -> ActivityType:
        try:
            return self.activity_types[name]
        except KeyError:
            raise ScoringError(f"알 수 없는 활동 유형: {name}") from None

    def with_distance_rates(self, rates: Dict[str, float]) -> "ScoringConfig":
        """수단별 거리 비용만 바꾼 사본"""
        modes = dict(self.modes)
        for mode, rate in rates.items():
            params = self.mode(mode)
            modes[mode] = ModeParams(mode, params.asc, params.beta_travel, float(rate))
        return ScoringConfig(
            self.name, self.beta_act, self.beta_money, self.beta_early, self.beta_late,
            self.stuck_penalty, self.activity_floor, self.t0_rule, modes, dict(self.activity_types),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "beta_act": self.beta_act,
            "beta_money": self.beta_money,
            "beta_early": self.beta_early,
            "beta_late": self.beta_late,
            "stuck_penalty": self.stuck_penalty,
            "activity_floor": self.activity_floor,
            "t0_rule": self.t0_rule,
            "modes": {m: {k: v for k, v in p.to_dict().items() if k != "mode"} for m, p in self.modes.items()},
        }

    @classmethod
    def from_dict(cls, name: str, data: dict) -> "ScoringConfig":
        known = {"beta_act", "beta_money", "beta_early", "beta_late", "stuck_penalty",
                 "activity_floor", "t0_rule", "modes", "name"}
        unknown = set(data) - known
        if unknown:
            raise ScoringError(f"{name}: 알 수 없는 효용 파라미터 {sorted(unknown)}")
        modes = {}
        for mode, params in data.get("modes", {}).items():
            try:
                modes[mode] = ModeParams(mode, **params)
            except TypeError as e:
                raise ScoringError(f"{name}/{mode}: 수단 파라미터 오류 {e}") from None
        values = {k: v for k, v in data.items() if k not in ("modes", "name")}
        return cls(name=name, modes=modes, **values)


def _default_modes(av_beta_travel: float) -> Dict[str, dict]:
    return {
        MODE_CAR: {"asc": -0.1, "beta_travel": 0.0, "distance_rate": 0.30},
        MODE_PT: {"asc": -1.5, "beta_travel": -0.36, "distance_rate": 0.0},
        MODE_WALK_BIKE: {"asc": -0.2, "beta_travel": 0.0, "distance_rate": 0.0},
        MODE_AV: {"asc": 0.0, "beta_travel": av_beta_travel, "distance_rate": 0.20},
        MODE_SAV: {"asc": 0.0, "beta_travel": av_beta_travel, "distance_rate": 0.0},
    }


# config/scoring_presets.json이 없을 때의 기본값
DEFAULT_SCORING_PRESETS: Dict[str, dict] = {
    "vtts-target": {
        "beta_act": 14.22, "beta_money": 0.79, "beta_early": 0.0, "beta_late": 12.0,
        "stuck_penalty": -100.0, "activity_floor": -100.0, "t0_rule": T0_RULE_EXP10,
        "modes": _default_modes(7.11),
    },
    "table-literal": {
        "beta_act": 14.22, "beta_money": 0.79, "beta_early": 0.0, "beta_late": 12.0,
        "stuck_penalty": -100.0, "activity_floor": -100.0, "t0_rule": T0_RULE_EXP10,
        "modes": _default_modes(0.48),
    },
}


def default_scoring(name: str = "vtts-target") -> ScoringConfig:
    if name not in DEFAULT_SCORING_PRESETS:
        raise ScoringError(f"알 수 없는 효용 프리셋: {name}")
    return ScoringConfig.from_dict(name, DEFAULT_SCORING_PRESETS[name])


def score_trip(params: ModeParams, travel_time: float, cost: float, beta_money: float) -> float:
    """이동 효용: β_0 + β_t·t − β_c·c (t: 시간, c: $)"""
    if travel_time < 0 or cost < 0:
        raise ScoringError(f"이동 시간과 비용은 음수가 될 수 없습니다: t={travel_time}, c={cost}")
    return params.asc + params.beta_travel * travel_time - beta_money * cost


def typical_zero_duration(act_type: ActivityType) -> float:
    t_star = act_type.typical_duration
    return t_star * math.exp(-10.0 / t_star)


def score_activity(duration: float, act_type: ActivityType, config: ScoringConfig) -> float:
    """활동 효용: β_act·t*·ln(t/t0), 하한 activity_floor (duration: 시간)"""
    if duration <= 0:
        return config.activity_floor
    t_star = act_type.typical_duration
    value = config.beta_act * t_star * math.log(duration / typical_zero_duration(act_type))
    return max(value, config.activity_floor)


def effective_duration(arrival: float, departure: float, act_type: ActivityType) -> float:
    """운영 시간 안에서 머문 시간 (초). 개장 전 대기는 제외"""
    start = arrival if act_type.opening is None else max(arrival, act_type.opening)
    end = departure if act_type.closing is None else min(departure, act_type.closing)
    return max(0.0, end - start)


def schedule_penalty(arrival: float, act_type: ActivityType, config: ScoringConfig) -> float:
    """조기 도착(개장 전)과 지각(latest_start 이후) 패널티 (≤ 0)"""
    penalty = 0.0
    if act_type.opening is not None and arrival < act_type.opening:
        penalty -= config.beta_early * (act_type.opening - arrival) / 3600.0
    if act_type.latest_start is not None and arrival > act_type.latest_start:
        penalty -= config.beta_late * (arrival - act_type.latest_start) / 3600.0
    return penalty


def vtts(params: ModeParams, config: ScoringConfig) -> float:
    """통행 시간 절감 가치 ($/h) = (β_act − β_t)/β_c"""
    if config.beta_money <= 0:
        raise ScoringError("β_c가 0 이하이면 VTTS를 계산할 수 없습니다")
    return (config.beta_act - params.beta_travel) / config.beta_money


@dataclass
class ExperiencedTrip:
    """이벤트 로그에서 복원한 이동 하나"""
    index: int
    mode: str
    depart: float
    arrive: Optional[float] = None
    distance: float = 0.0
    tolls: float = 0.0
    fare: float = 0.0
    wait: float = 0.0

    @property
    def travel_time(self) -> float:
        return (self.arrive - self.depart) if self.arrive is not None else 0.0

    @property
    def completed(self) -> bool:
        return self.arrive is not None


@dataclass
class ExperiencedPlan:
    agent_id: str
    trips: Dict[int, ExperiencedTrip] = field(default_factory=dict)
    stuck: bool = False

    def is_complete(self, n_trips: int) -> bool:
        return not self.stuck and all(i in self.trips and self.trips[i].completed for i in range(n_trips))


def extract_experienced_plans(events: Iterable[Event]) -> Dict[str, ExperiencedPlan]:
    """이벤트 로그에서 에이전트별 실제 이동 기록 복원"""
    plans: Dict[str, ExperiencedPlan] = {}
    for event in events:
        if event.agent_id is None:
            continue
        plan = plans.setdefault(event.agent_id, ExperiencedPlan(event.agent_id))
        if event.kind == EVENT_DEPART:
            plan.trips[event.trip_index] = ExperiencedTrip(event.trip_index, event.mode, event.time)
            continue
        trip = plan.trips.get(event.trip_index) if event.trip_index is not None else None
        if event.kind == EVENT_STUCK:
            plan.stuck = True
        elif trip is None:
            continue
        elif event.kind == EVENT_ARRIVE:
            trip.arrive = event.time
            trip.distance = event.distance or 0.0
        elif event.kind == EVENT_TOLL:
            trip.tolls += event.amount
        elif event.kind == EVENT_SAV_DROPOFF:
            trip.fare += event.amount
        elif event.kind == EVENT_SAV_PICKUP:
            trip.wait = event.time - trip.depart
    return plans


def trip_cost(trip: ExperiencedTrip, params: ModeParams) -> float:
    """이동의 금전 비용 ($): 거리 비용 + 요금 + 통행료"""
    return params.distance_rate * trip.distance / METERS_PER_MILE + trip.fare + trip.tolls


def score_plan(plan: Plan, experienced: Optional[ExperiencedPlan], config: ScoringConfig) -> float:
    """실행된 계획의 점수

    첫 Home과 마지막 Home은 하루를 감싸는 하나의 활동으로 합친다.
    기록이 빠졌거나 끝나지 못한 계획은 stuck_penalty를 받는다.
    """
    n = len(plan.trips)
    if experienced is None or not experienced.is_complete(n):
        return config.stuck_penalty

    trips = [experienced.trips[i] for i in range(n)]
    score = 0.0
    for trip in trips:
        params = config.mode(trip.mode)
        score += score_trip(params, trip.travel_time / 3600.0, trip_cost(trip, params), config.beta_money)

    home = config.activity_type(plan.activities[0].type)
    wrapped = trips[0].depart + (DAY_SECONDS - trips[-1].arrive)
    score += score_activity(wrapped / 3600.0, home, config)

    for i in range(1, n):
        act_type = config.activity_type(plan.activities[i].type)
        arrival = trips[i - 1].arrive
        departure = trips[i].depart
        duration = effective_duration(arrival, departure, act_type)
        score += score_activity(duration / 3600.0, act_type, config)
        score += schedule_penalty(arrival, act_type, config)
    return score
