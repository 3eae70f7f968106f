"""경로 탐색 모듈

링크 그래프 위의 시간 의존 다익스트라. 비용은 효용 단위의 일반화 비용이다.
"""

import heapq
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Tuple

from .errors import RoutingError
from .events import Event, EVENT_LINK_ENTER, EVENT_LINK_LEAVE
from .models import METERS_PER_MILE
from .network import Network

LOG = logging.getLogger(__name__)

TRAVEL_TIME_BIN = 900.0  # s

# (링크 ID, 진입 시각, 예상 통과 시간) → 비용
CostFunction = Callable[[str, float, float], float]


class TravelTimes:
    """직전 반복의 링크별 시간대 평균 통과 시간 (진입 시각 기준 15분 구간)"""

    def __init__(self, network: Network, bin_size: float = TRAVEL_TIME_BIN,
                 table: Optional[Dict[Tuple[str, int], float]] = None):
        self.network = network
        self.bin_size = bin_size
        self._table: Dict[Tuple[str, int], float] = dict(table or {})

    @classmethod
    def from_events(cls, network: Network, events: Iterable[Event],
                    bin_size: float = TRAVEL_TIME_BIN) -> "TravelTimes":
        pending: Dict[Tuple[str, str], float] = {}
        sums: Dict[Tuple[str, int], List[float]] = defaultdict(lambda: [0.0, 0])
        for event in events:
            key = (event.vehicle_id, event.link_id)
            if event.kind == EVENT_LINK_ENTER:
                pending[key] = event.time
            elif event.kind == EVENT_LINK_LEAVE and key in pending:
                entered = pending.pop(key)
                acc = sums[(event.link_id, int(entered // bin_size))]
                acc[0] += event.time - entered
                acc[1] += 1
        table = {k: total / count for k, (total, count) in sums.items()}
        return cls(network, bin_size, table)

    def get(self, link_id: str, t: float) -> float:
        measured = self._table.get((link_id, int(t // self.bin_size)))
        if measured is None:
            return float(self.network.link(link_id).traverse_time)
        return max(measured, float(self.network.link(link_id).traverse_time))

    def __len__(self) -> int:
        return len(self._table)


@dataclass
class GeneralizedCost:
    """링크 일반화 비용 (utils)

    시간 가치(utils/h)는 β_act − β_t, 금전은 β_c를 곱한다.
    charge_fn은 통행료 체계의 예상 부과액($)을 돌려준다.
    """
    network: Network
    time_weight: float  # utils/h
    beta_money: float  # utils/$
    distance_rate: float = 0.0  # $/mile
    charge_fn: Optional[Callable[[str, float, float], float]] = None

    def __call__(self, link_id: str, t_enter: float, travel_time: float) -> float:
        link = self.network.link(link_id)
        money = self.distance_rate * link.length / METERS_PER_MILE
        if self.charge_fn is not None:
            money += self.charge_fn(link_id, t_enter, travel_time)
        return self.time_weight * travel_time / 3600.0 + self.beta_money * money


def travel_time_cost(link_id: str, t_enter: float, travel_time: float) -> float:
    return travel_time


def route(
    network: Network,
    origin: str,
    destination: str,
    departure_time: float,
    cost_fn: CostFunction = travel_time_cost,
    travel_times: Optional[TravelTimes] = None,
) -> List[str]:
    """최소 비용 경로 (출발 링크 제외, 도착 링크 포함)

    출발과 도착이 같으면 빈 경로. 동률은 링크 정렬 순서로 결정한다.

    Raises:
        RoutingError: 도달 불가능
    """
    if origin == destination:
        return []
    network.link(origin)
    network.link(destination)
    times = travel_times or TravelTimes(network)

    best: Dict[str, float] = {origin: 0.0}
    previous: Dict[str, str] = {}
    heap = [(0.0, network.link_order(origin), origin, float(departure_time))]
    settled = set()
    while heap:
        cost, _, link_id, t = heapq.heappop(heap)
        if link_id in settled:
            continue
        settled.add(link_id)
        if link_id == destination:
            break
        for nxt in network.out_links(link_id):
            if nxt in settled:
                continue
            tt = times.get(nxt, t)
            step = cost_fn(nxt, t, tt)
            if step < 0:
                raise RoutingError(f"음수 링크 비용: {nxt} ({step})")
            new_cost = cost + step
            if new_cost < best.get(nxt, float("inf")):
                best[nxt] = new_cost
                previous[nxt] = link_id
                heapq.heappush(heap, (new_cost, network.link_order(nxt), nxt, t + tt))

    if destination not in settled:
        raise RoutingError(f"경로가 없습니다: {origin} → {destination}")

    path = [destination]
    while path[-1] != origin:
        path.append(previous[path[-1]])
    path.reverse()
    return path[1:]


def route_travel_time(network: Network, path: List[str], departure_time: float,
                      travel_times: Optional[TravelTimes] = None) -> float:
    """경로의 예상 소요 시간 (초)"""
    times = travel_times or TravelTimes(network)
    t = float(departure_time)
    for link_id in path:
        t += times.get(link_id, t)
    return t - departure_time


def route_length(network: Network, path: List[str]) -> float:
    return sum(network.link(link_id).length for link_id in path)
