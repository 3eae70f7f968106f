"""수요 모듈

에이전트, 활동 체인, 이용 가능 수단, 시나리오 인구 프리셋을 다룬다.
"""

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from .errors import PopulationError, RoutingError
from .models import (
    Activity, ActivityType, Agent, Plan, Trip,
    ACT_HOME, ACT_EDUCATION, ACT_WORK, ACT_SHOPPING, ACT_LEISURE,
    ALL_MODES, MODE_CAR, MODE_PT, MODE_WALK_BIKE, MODE_AV, MODE_SAV,
    NETWORK_MODES,
)
from .network import Network
from .sav import Tariff, AV_SCENARIO_TARIFF, SAV_SCENARIO_TARIFF
from .utils import make_rng, parse_time, format_time

LOG = logging.getLogger(__name__)

POPULATION_VERSION = 1
DEFAULT_MEMORY_CAPACITY = 5

# 활동 유형별 전형적 지속시간과 운영 시간 (쇼핑/여가는 다음날 01:00 폐장)
ACTIVITY_TYPES: Dict[str, ActivityType] = {
    ACT_HOME: ActivityType(ACT_HOME, 14.0),
    ACT_EDUCATION: ActivityType(ACT_EDUCATION, 5.0, parse_time("08:00"), parse_time("22:00")),
    ACT_WORK: ActivityType(ACT_WORK, 7.0, parse_time("07:00"), None, latest_start=parse_time("10:00")),
    ACT_SHOPPING: ActivityType(ACT_SHOPPING, 1.0, parse_time("09:00"), parse_time("25:00")),
    ACT_LEISURE: ActivityType(ACT_LEISURE, 2.0, parse_time("09:00"), parse_time("25:00")),
}

# 활동 체인 카탈로그 (가중 평균 이동 수 3.5)
CHAIN_CATALOG: List[Tuple[Tuple[str, ...], float]] = [
    (("H", "W", "H"), 0.12),
    (("H", "E", "H"), 0.08),
    (("H", "W", "S", "H"), 0.12),
    (("H", "W", "L", "H"), 0.10),
    (("H", "E", "L", "H"), 0.08),
    (("H", "W", "H", "L", "H"), 0.12),
    (("H", "W", "S", "L", "H"), 0.10),
    (("H", "S", "H", "L", "H"), 0.08),
    (("H", "W", "S", "H", "L", "H"), 0.12),
    (("H", "E", "H", "S", "L", "H"), 0.08),
]

_CHAIN_CODES = {"H": ACT_HOME, "W": ACT_WORK, "E": ACT_EDUCATION, "S": ACT_SHOPPING, "L": ACT_LEISURE}


@dataclass(frozen=True)
class PresetSpec:
    """시나리오 프리셋: 수단 보유 비율, 차량 공유 규모, 요금"""
    name: str
    car_share: float
    av_share: float
    agents_per_sav: int  # 0이면 SAV 없음
    tariff: Optional[Tariff]

    @property
    def sav_available(self) -> bool:
        return self.agents_per_sav > 0

    def fleet_size(self, n_agents: int) -> int:
        if not self.sav_available:
            return 0
        return max(1, int(round(n_agents / self.agents_per_sav)))


PRESETS: Dict[str, PresetSpec] = {
    "base": PresetSpec("base", 0.9, 0.0, 0, None),
    "av-oriented": PresetSpec("av-oriented", 0.0, 0.9, 30, AV_SCENARIO_TARIFF),
    "sav-oriented": PresetSpec("sav-oriented", 0.6, 0.1, 10, SAV_SCENARIO_TARIFF),
}


def get_preset(name: str) -> PresetSpec:
    """프리셋 조회 ('AVOriented', 'av-oriented', 'av_oriented' 모두 허용)"""
    key = re.sub(r"[^a-z]", "", name.lower())
    for preset_name, preset in PRESETS.items():
        if re.sub(r"[^a-z]", "", preset_name) == key:
            return preset
    raise PopulationError(f"알 수 없는 프리셋: {name}")


def _mode_set(has_car: bool, has_av: bool, sav: bool) -> Tuple[str, ...]:
    modes = []
    if has_car:
        modes.append(MODE_CAR)
    modes.extend([MODE_PT, MODE_WALK_BIKE])
    if has_av:
        modes.append(MODE_AV)
    if sav:
        modes.append(MODE_SAV)
    return tuple(modes)


def _initial_mode(modes: Tuple[str, ...], distance: float, rng: np.random.Generator) -> str:
    if MODE_CAR in modes:
        return MODE_CAR
    if MODE_AV in modes:
        return MODE_AV
    if MODE_SAV in modes and rng.random() < 0.5:
        return MODE_SAV
    return MODE_PT if distance > 2000.0 else MODE_WALK_BIKE


def _sample_chain(rng: np.random.Generator) -> Tuple[str, ...]:
    weights = np.array([w for _, w in CHAIN_CATALOG])
    index = rng.choice(len(CHAIN_CATALOG), p=weights / weights.sum())
    return tuple(_CHAIN_CODES[c] for c in CHAIN_CATALOG[index][0])


def _pick_location(network: Network, link_ids: List[str], home: str, rng: np.random.Generator) -> str:
    for _ in range(20):
        candidate = link_ids[int(rng.integers(len(link_ids)))]
        if candidate != home and network.is_connected(home, candidate) and network.is_connected(candidate, home):
            return candidate
    return home


def _build_plan(
    network: Network,
    chain: Tuple[str, ...],
    link_ids: List[str],
    modes: Tuple[str, ...],
    rng: np.random.Generator,
) -> Plan:
    home = link_ids[int(rng.integers(len(link_ids)))]
    locations = {}
    activities: List[Activity] = []
    for act_type in chain:
        if act_type == ACT_HOME:
            link = home
        else:
            # 같은 유형의 활동은 같은 장소 (직장, 학교 등)
            link = locations.setdefault(act_type, _pick_location(network, link_ids, home, rng))
        activities.append(Activity(act_type, link))

    t = float(int(rng.uniform(6.5, 9.0) * 3600))
    activities[0].end_time = t
    for act in activities[1:-1]:
        typical = ACTIVITY_TYPES[act.type].typical_duration
        if act.type == ACT_HOME:
            typical = 1.5
        t += 900.0 + int(typical * rng.uniform(0.8, 1.1) * 3600)
        t = min(t, 23.5 * 3600)
        act.end_time = t

    distance = max(network.beeline_distance(a.link_id, b.link_id) for a, b in zip(activities, activities[1:]))
    mode = _initial_mode(modes, distance, rng)
    trips = [Trip(mode) for _ in activities[1:]]
    return Plan(activities, trips)


def generate_scenario(
    preset: Union[str, PresetSpec],
    n_agents: int,
    seed: int,
    network: Network,
    memory_capacity: int = DEFAULT_MEMORY_CAPACITY,
) -> Tuple[List[Agent], PresetSpec]:
    """프리셋에 따른 합성 인구 생성

    보유 비율은 반올림 오차 1명 이내로 정확히 맞춘다. 같은 시드면 같은 인구가 나온다.
    경로는 비워 두고 재계획 단계에서 채운다.
    """
    spec = preset if isinstance(preset, PresetSpec) else get_preset(preset)
    if n_agents <= 0:
        raise PopulationError(f"에이전트 수는 양수여야 합니다: {n_agents}")

    rng = make_rng(seed, "generation")
    n_car = int(round(spec.car_share * n_agents))
    n_av = min(n_agents - n_car, int(round(spec.av_share * n_agents)))
    order = rng.permutation(n_agents)
    has_car = np.zeros(n_agents, dtype=bool)
    has_av = np.zeros(n_agents, dtype=bool)
    has_car[order[:n_car]] = True
    has_av[order[n_car:n_car + n_av]] = True

    link_ids = network.link_ids()
    width = len(str(n_agents))
    agents: List[Agent] = []
    for i in range(n_agents):
        modes = _mode_set(bool(has_car[i]), bool(has_av[i]), spec.sav_available)
        plan = _build_plan(network, _sample_chain(rng), link_ids, modes, rng)
        agents.append(Agent(f"a{i:0{width}d}", [plan], modes, memory_capacity=memory_capacity))

    LOG.info("인구 생성: 프리셋=%s, 에이전트 %d명, 차량 보유 %d명, AV 보유 %d명, SAV %d대",
             spec.name, n_agents, n_car, n_av, spec.fleet_size(n_agents))
    return agents, spec


def _parse_chain(record: dict, network: Network) -> Plan:
    chain = record.get("chain")
    if not isinstance(chain, list) or len(chain) < 3 or len(chain) % 2 == 0:
        raise PopulationError(f"{record.get('id')}: 활동/이동 체인이 올바르지 않습니다")

    activities: List[Activity] = []
    trips: List[Trip] = []
    for position, entry in enumerate(chain):
        if position % 2 == 0:
            if "act" not in entry:
                raise PopulationError(f"{record.get('id')}: {position}번째 항목은 활동이어야 합니다")
            if entry["act"] not in ACTIVITY_TYPES:
                raise PopulationError(f"{record.get('id')}: 알 수 없는 활동 유형 {entry['act']}")
            link_id = entry.get("link")
            if not network.has_link(link_id):
                raise PopulationError(f"{record.get('id')}: 존재하지 않는 링크 {link_id}")
            activities.append(Activity(entry["act"], link_id, parse_time(entry.get("end"))))
        else:
            if "mode" not in entry:
                raise PopulationError(f"{record.get('id')}: {position}번째 항목은 이동이어야 합니다")
            route = list(entry.get("route", []))
            for link_id in route:
                if not network.has_link(link_id):
                    raise PopulationError(f"{record.get('id')}: 경로에 존재하지 않는 링크 {link_id}")
            trips.append(Trip(entry["mode"], route))

    plan = Plan(activities, trips)
    try:
        plan.validate()
    except ValueError as e:
        raise PopulationError(f"{record.get('id')}: {e}") from None
    return plan


def load_population(
    path: Union[str, Path],
    network: Network,
    memory_capacity: int = DEFAULT_MEMORY_CAPACITY,
) -> List[Agent]:
    """JSON Lines 인구 파일 로드

    레코드: {"version": 1, "id": ..., "modes": [...], "chain": [{"act","link","end"}, {"mode"}, ...]}
    도달 가능성 검사는 시뮬레이션 시작 시점(validate_routability)으로 미룬다.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"인구 파일을 찾을 수 없습니다: {path}")

    agents: List[Agent] = []
    seen = set()
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise PopulationError(f"{path}:{line_no} JSON 파싱 실패: {e}") from None
            if record.get("version") != POPULATION_VERSION:
                raise PopulationError(f"{path}:{line_no} 지원하지 않는 버전: {record.get('version')}")
            agent_id = str(record.get("id", ""))
            if not agent_id or agent_id in seen:
                raise PopulationError(f"{path}:{line_no} 에이전트 ID가 없거나 중복입니다: {agent_id}")
            seen.add(agent_id)

            modes = tuple(record.get("modes", []))
            unknown = [m for m in modes if m not in ALL_MODES]
            if not modes or unknown:
                raise PopulationError(f"{agent_id}: 이용 가능 수단이 올바르지 않습니다 {list(modes)}")
            plan = _parse_chain(record, network)
            for trip in plan.trips:
                if trip.mode not in modes:
                    raise PopulationError(f"{agent_id}: 이용할 수 없는 수단 {trip.mode}")
            agents.append(Agent(agent_id, [plan], modes, memory_capacity=memory_capacity))

    if not agents:
        raise PopulationError(f"인구 파일이 비어 있습니다: {path}")
    LOG.info("인구 로드: %s (%d명)", path, len(agents))
    return agents


def save_population(agents: Iterable[Agent], path: Union[str, Path]):
    """선택된 계획 기준으로 인구 파일 저장"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for agent in agents:
            plan = agent.selected_plan
            chain = []
            for i, act in enumerate(plan.activities):
                entry = {"act": act.type, "link": act.link_id}
                if act.end_time is not None:
                    entry["end"] = format_time(act.end_time)
                chain.append(entry)
                if i < len(plan.trips):
                    trip = plan.trips[i]
                    chain.append({"mode": trip.mode, "route": list(trip.route)} if trip.route else {"mode": trip.mode})
            record = {"version": POPULATION_VERSION, "id": agent.id, "modes": list(agent.modes), "chain": chain}
            f.write(json.dumps(record, ensure_ascii=False) + "\n")


def validate_routability(agents: Iterable[Agent], network: Network):
    """도로망 수단 이동의 출발/도착 링크 연결성 검사

    Raises:
        RoutingError: 첫 번째로 발견된 도달 불가능 이동
    """
    for agent in agents:
        plan = agent.selected_plan
        for i, trip in enumerate(plan.trips):
            if trip.mode not in NETWORK_MODES:
                continue
            origin = plan.activities[i].link_id
            destination = plan.activities[i + 1].link_id
            if origin != destination and not network.is_connected(origin, destination):
                raise RoutingError(f"{agent.id}: {i}번째 이동 {origin} → {destination} 경로가 없습니다")

