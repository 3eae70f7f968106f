"""공유 자율주행차(SAV) 배차 모듈

유휴 차량과 대기 요청을 자유류 경로 시간이 가장 짧은 쌍으로 짝짓는다.
"""

import logging
from dataclasses import dataclass, asdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .models import METERS_PER_MILE
from .network import Network
from .utils import to_cents

LOG = logging.getLogger(__name__)

STATUS_IDLE = "idle"
STATUS_APPROACHING = "approaching"
STATUS_OCCUPIED = "occupied"

OVERSUPPLY = "oversupply"
UNDERSUPPLY = "undersupply"
BALANCED_EMPTY = "balanced-empty"

PLACEMENT_UNIFORM = "uniform"
PLACEMENT_LISTED = "listed"


@dataclass(frozen=True)
class Tariff:
    """SAV 요금표: 기본요금 + 마일당 + 분당 ($)"""
    flat: float
    per_mile: float
    per_minute: float

    def __post_init__(self):
        if min(self.flat, self.per_mile, self.per_minute) < 0:
            raise ValueError(f"요금은 음수가 될 수 없습니다: {self}")

    def scaled(self, factor: float) -> "Tariff":
        return Tariff(self.flat * factor, self.per_mile * factor, self.per_minute * factor)

    def to_dict(self) -> dict:
        return asdict(self)


AV_SCENARIO_TARIFF = Tariff(0.50, 0.40, 0.10)
SAV_SCENARIO_TARIFF = AV_SCENARIO_TARIFF.scaled(0.5)


@dataclass(frozen=True)
class FleetSpec:
    """차량 공유 설정 (시뮬레이션 일마다 같은 배치로 초기화)"""
    size: int
    tariff: Tariff
    placement: str = PLACEMENT_UNIFORM
    links: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.size < 0:
            raise ValueError(f"차량 수는 음수가 될 수 없습니다: {self.size}")
        if self.placement not in (PLACEMENT_UNIFORM, PLACEMENT_LISTED):
            raise ValueError(f"알 수 없는 배치 방식: {self.placement}")
        if self.placement == PLACEMENT_LISTED and self.size > 0 and not self.links:
            raise ValueError("listed 배치에는 링크 목록이 필요합니다")


@dataclass
class FleetVehicle:
    id: str
    index: int
    link_id: str
    status: str = STATUS_IDLE
    request_id: Optional[str] = None


@dataclass(frozen=True)
class Request:
    id: str
    agent_id: str
    origin: str
    destination: str
    submitted: float
    trip_index: int = 0


def fare(distance_miles: float, duration_minutes: float, tariff: Tariff) -> float:
    """탑승 요금 (센트 단위 반올림)"""
    if distance_miles < 0 or duration_minutes < 0:
        raise ValueError("거리와 시간은 음수가 될 수 없습니다")
    return to_cents(tariff.flat + tariff.per_mile * distance_miles + tariff.per_minute * duration_minutes)


def fare_for_trip(distance_m: float, duration_s: float, tariff: Tariff) -> float:
    return fare(distance_m / METERS_PER_MILE, duration_s / 60.0, tariff)


def classify(vehicles: Sequence[FleetVehicle], open_requests: Sequence[Request]) -> str:
    """배차 큐를 비운 뒤의 수급 상태"""
    idle = sum(1 for v in vehicles if v.status == STATUS_IDLE)
    if idle > 0 and not open_requests:
        return OVERSUPPLY
    if idle == 0 and open_requests:
        return UNDERSUPPLY
    return BALANCED_EMPTY


def place_fleet(network: Network, spec: FleetSpec, rng: np.random.Generator) -> List[FleetVehicle]:
    """초기 차량 배치 (uniform: 링크 무작위, listed: 목록 순환)"""
    if spec.placement == PLACEMENT_LISTED:
        for link_id in spec.links:
            network.link(link_id)
        positions = [spec.links[i % len(spec.links)] for i in range(spec.size)]
    else:
        link_ids = network.link_ids()
        positions = [link_ids[i] for i in rng.integers(len(link_ids), size=spec.size)]
    return [FleetVehicle(f"sav_{i}", i, link_id) for i, link_id in enumerate(positions)]


class Dispatcher:
    """최근접 유휴 차량 배차

    요청 도착 시: 자유류 경로 시간이 가장 짧은 유휴 차량 (동률이면 낮은 순번).
    차량 유휴 시: 가장 가까운 대기 요청 (동률이면 먼저 접수된 요청).
    """

    def __init__(self, network: Network, vehicles: List[FleetVehicle], tariff: Tariff):
        self.network = network
        self.vehicles: Dict[str, FleetVehicle] = {v.id: v for v in vehicles}
        self.tariff = tariff
        self._open: List[Request] = []
        self.assignments = 0
        self.status = classify(self._fleet(), self._open)
        self.status_counts: Dict[str, int] = {OVERSUPPLY: 0, UNDERSUPPLY: 0, BALANCED_EMPTY: 0}

    @classmethod
    def from_spec(cls, network: Network, spec: FleetSpec, rng: np.random.Generator) -> "Dispatcher":
        return cls(network, place_fleet(network, spec, rng), spec.tariff)

    @property
    def open_requests(self) -> List[Request]:
        return list(self._open)

    def _fleet(self) -> List[FleetVehicle]:
        return sorted(self.vehicles.values(), key=lambda v: v.index)

    def classify(self) -> str:
        return classify(self._fleet(), self._open)

    def _record_status(self):
        """배차 결정 직후의 수급 상태를 세고, 바뀌면 기록"""
        status = self.classify()
        self.status_counts[status] += 1
        if status != self.status:
            LOG.debug("SAV 수급 상태 변경: %s -> %s (대기 요청 %d건)", self.status, status, len(self._open))
            self.status = status

    def _assign(self, vehicle: FleetVehicle, request: Request):
        vehicle.status = STATUS_APPROACHING
        vehicle.request_id = request.id
        self.assignments += 1

    def on_request(self, request: Request) -> Optional[FleetVehicle]:
        """새 요청 처리. 배차된 차량을 반환하거나 대기열에 넣고 None"""
        best: Optional[Tuple[float, int]] = None
        chosen = None
        for vehicle in self._fleet():
            if vehicle.status != STATUS_IDLE:
                continue
            cost = self.network.freeflow_time(vehicle.link_id, request.origin)
            if cost == float("inf"):
                continue
            key = (cost, vehicle.index)
            if best is None or key < best:
                best, chosen = key, vehicle
        if chosen is None:
            self._open.append(request)
            LOG.debug("SAV 요청 대기: %s (대기 %d건)", request.id, len(self._open))
            self._record_status()
            return None
        self._assign(chosen, request)
        self._record_status()
        return chosen

    def on_vehicle_idle(self, vehicle_id: str, link_id: str) -> Optional[Request]:
        """하차 완료 차량 처리. 대기 요청이 있으면 배정해 반환"""
        vehicle = self.vehicles[vehicle_id]
        vehicle.status = STATUS_IDLE
        vehicle.request_id = None
        vehicle.link_id = link_id

        best = None
        chosen = None
        for order, request in enumerate(self._open):
            cost = self.network.freeflow_time(link_id, request.origin)
            if cost == float("inf"):
                continue
            key = (cost, request.submitted, order)
            if best is None or key < best:
                best, chosen = key, request
        if chosen is None:
            self._record_status()
            return None
        self._open.remove(chosen)
        self._assign(vehicle, chosen)
        self._record_status()
        return chosen

    def pickup(self, vehicle_id: str, link_id: str):
        vehicle = self.vehicles[vehicle_id]
        vehicle.status = STATUS_OCCUPIED
        vehicle.link_id = link_id

    def utilization(self) -> Dict[str, int]:
        counts = {STATUS_IDLE: 0, STATUS_APPROACHING: 0, STATUS_OCCUPIED: 0}
        for vehicle in self.vehicles.values():
            counts[vehicle.status] += 1
        return counts
