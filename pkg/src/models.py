"""데이터 모델 정의"""

import math
from dataclasses import dataclass, field, asdict, replace
from typing import List, Optional, Tuple


# 교통수단 상수
MODE_CAR = "car"
MODE_PT = "pt"
MODE_WALK_BIKE = "walk_bike"
MODE_AV = "av"
MODE_SAV = "sav"

ALL_MODES = (MODE_CAR, MODE_PT, MODE_WALK_BIKE, MODE_AV, MODE_SAV)
NETWORK_MODES = (MODE_CAR, MODE_AV, MODE_SAV)  # 도로망 위를 주행
TELEPORTED_MODES = (MODE_PT, MODE_WALK_BIKE)  # 순간이동 (링크 이벤트 없음)
AUTONOMOUS_MODES = (MODE_AV, MODE_SAV)  # 용량 증대 효과 적용 대상
PRIVATE_VEHICLE_MODES = (MODE_CAR, MODE_AV)  # 계획에 경로를 들고 다니는 수단

# 활동 유형 상수
ACT_HOME = "Home"
ACT_EDUCATION = "Education"
ACT_WORK = "Work"
ACT_SHOPPING = "Shopping"
ACT_LEISURE = "Leisure"

ACTIVITY_NAMES = (ACT_HOME, ACT_EDUCATION, ACT_WORK, ACT_SHOPPING, ACT_LEISURE)

# 단위 변환
METERS_PER_MILE = 1609.344
SECONDS_PER_HOUR = 3600.0
DAY_SECONDS = 24 * 3600


@dataclass(frozen=True)
class Node:
    """도로망 노드 (평면 좌표, 미터)"""
    id: str
    x: float
    y: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Link:
    """도로망 링크

    flow_capacity는 일반 차량 100% 기준 시간당 용량(veh/h),
    storage_capacity는 build_network에서 계산된다.
    """
    id: str
    from_node: str
    to_node: str
    length: float  # m
    free_speed: float  # m/s
    flow_capacity: float  # veh/h
    lanes: int = 1
    storage_capacity: int = 0  # veh

    @property
    def traverse_time(self) -> int:
        """자유류 통과 시간 (초 단위 올림, 최소 1초)"""
        return max(1, int(math.ceil(self.length / self.free_speed - 1e-9)))

    @property
    def length_miles(self) -> float:
        return self.length / METERS_PER_MILE

    def with_capacity_factor(self, factor: float, effective_vehicle_length: float) -> "Link":
        """용량 축소/확대 계수를 반영한 링크 사본 (유량과 저장 용량 모두 적용)"""
        storage = int(math.floor(self.lanes * self.length / effective_vehicle_length * factor + 1e-9))
        return replace(
            self,
            flow_capacity=self.flow_capacity * factor,
            storage_capacity=max(1, storage),
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FlowObservation:
    """링크별 5분 집계 교통 상태

    density: veh/km, outflow: veh/h, users: 구간 내 진입 대수, av_share: 진입 차량 중 AV/SAV 비율
    """
    link_id: str
    start: float
    end: float
    density: float = 0.0
    outflow: float = 0.0
    users: int = 0
    av_share: float = 0.0

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError(f"관측 구간이 올바르지 않습니다: {self.start} ~ {self.end}")
        if self.density < 0 or self.outflow < 0 or self.users < 0:
            raise ValueError(f"관측값은 음수가 될 수 없습니다: {self}")
        if not 0.0 <= self.av_share <= 1.0:
            raise ValueError(f"AV 비율은 0~1 범위여야 합니다: {self.av_share}")

    @property
    def duration_hours(self) -> float:
        return (self.end - self.start) / SECONDS_PER_HOUR

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ActivityType:
    """활동 유형 속성 (시각은 자정 기준 초, None이면 제한 없음)"""
    name: str
    typical_duration: float  # h
    opening: Optional[float] = None
    closing: Optional[float] = None
    latest_start: Optional[float] = None  # 지각 패널티 기준

    def __post_init__(self):
        if self.typical_duration <= 0:
            raise ValueError(f"{self.name}: 전형적 지속시간은 양수여야 합니다")
        if self.opening is not None and self.closing is not None and self.opening >= self.closing:
            raise ValueError(f"{self.name}: 개장 시각이 폐장 시각보다 늦습니다")


@dataclass
class Activity:
    """계획 내 활동 (위치는 링크 ID)"""
    type: str
    link_id: str
    end_time: Optional[float] = None  # 마지막 활동은 None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Trip:
    """활동 사이의 이동 (순간이동 수단은 경로가 비어 있음)"""
    mode: str
    route: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Plan:
    """하루 활동/이동 체인과 효용 점수"""
    activities: List[Activity]
    trips: List[Trip]
    score: Optional[float] = None

    def validate(self):
        """구조 검증: 활동/이동 교대, Home 시작과 Home 종료"""
        if len(self.activities) < 2:
            raise ValueError("계획에는 최소 두 개의 활동이 필요합니다")
        if len(self.activities) != len(self.trips) + 1:
            raise ValueError("활동과 이동이 교대로 나타나야 합니다")
        if self.activities[0].type != self.activities[-1].type:
            raise ValueError("첫 활동과 마지막 활동의 유형이 같아야 합니다")
        if self.activities[0].type != ACT_HOME:
            raise ValueError("계획은 Home에서 시작해야 합니다")
        for act in self.activities[:-1]:
            if act.end_time is None:
                raise ValueError(f"{act.type} 활동의 종료 시각이 없습니다")
        ends = [a.end_time for a in self.activities[:-1]]
        if any(b < a for a, b in zip(ends, ends[1:])):
            raise ValueError("활동 종료 시각은 감소할 수 없습니다")
        for trip in self.trips:
            if trip.mode not in ALL_MODES:
                raise ValueError(f"알 수 없는 교통수단: {trip.mode}")
            if trip.mode not in PRIVATE_VEHICLE_MODES and trip.route:
                raise ValueError(f"{trip.mode} 이동은 경로를 가질 수 없습니다")

    def departure_time(self, trip_index: int) -> float:
        return self.activities[trip_index].end_time

    def modes(self) -> Tuple[str, ...]:
        return tuple(t.mode for t in self.trips)

    def signature(self) -> tuple:
        """동일 계획 판별용 키 (점수 제외)"""
        return (
            tuple((a.type, a.link_id, a.end_time) for a in self.activities),
            tuple((t.mode, tuple(t.route)) for t in self.trips),
        )

    def copy(self) -> "Plan":
        return Plan(
            activities=[Activity(a.type, a.link_id, a.end_time) for a in self.activities],
            trips=[Trip(t.mode, list(t.route)) for t in self.trips],
            score=None,
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Agent:
    """에이전트: 제한된 계획 메모리와 이용 가능 수단"""
    id: str
    plans: List[Plan]
    modes: Tuple[str, ...]
    selected: int = 0
    memory_capacity: int = 5

    @property
    def selected_plan(self) -> Plan:
        return self.plans[self.selected]

    def best_score(self) -> Optional[float]:
        scores = [p.score for p in self.plans if p.score is not None]
        return max(scores) if scores else None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "modes": list(self.modes),
            "selected": self.selected,
            "memory_capacity": self.memory_capacity,
            "plans": [p.to_dict() for p in self.plans],
        }
