"""혼잡통행료 모듈

시설(facility), 거리(distance), 한계 혼잡비용(MCP), 통행 시간(travel time) 네 가지 체계와
반복 통행료 수렴 루프를 제공한다.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import PricingError
from .events import EventLog, EVENT_ARRIVE, EVENT_DEPART, EVENT_LINK_ENTER, EVENT_LINK_LEAVE
from .models import FlowObservation, METERS_PER_MILE, NETWORK_MODES, SECONDS_PER_HOUR
from .network import Network, additional_users, link_delay
from .utils import to_cents, write_json, read_json, parse_time, format_time

LOG = logging.getLogger(__name__)

SCHEME_NONE = "none"
SCHEME_FACILITY = "facility"
SCHEME_DISTANCE = "distance"
SCHEME_MCP = "mcp"
SCHEME_TRAVEL_TIME = "traveltime"
SCHEMES = (SCHEME_NONE, SCHEME_FACILITY, SCHEME_DISTANCE, SCHEME_MCP, SCHEME_TRAVEL_TIME)

MCP_INTERVAL = 900.0  # 15분
TRAVEL_TIME_INTERVAL = 1800.0  # 30분
MCP_CAP = 0.30  # $
DEFAULT_ALPHA = 0.1
DEFAULT_PEAKS = ((parse_time("07:00"), parse_time("09:00")), (parse_time("17:00"), parse_time("19:00")))
DEFAULT_DISTANCE_WINDOW = (parse_time("07:00"), parse_time("20:00"))


@dataclass
class TollSchedule:
    """통행료 스케줄

    facility: links 진입 시 windows 안이면 rate ($)
    distance: windows 안에서 진입한 링크 거리 × rate ($/mile), 도착 시 부과
    mcp: (링크, 15분 구간)별 진입 통행료
    traveltime: 이동 시간 × α·σ(30분 구간), 도착 시 부과
    """
    kind: str = SCHEME_NONE
    links: FrozenSet[str] = frozenset()
    rate: float = 0.0
    windows: Tuple[Tuple[float, float], ...] = ()
    interval: float = MCP_INTERVAL
    link_tolls: Dict[Tuple[str, int], float] = field(default_factory=dict)
    sigma: Dict[int, float] = field(default_factory=dict)
    alpha: float = DEFAULT_ALPHA
    cap: float = MCP_CAP

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise PricingError(f"알 수 없는 통행료 체계: {self.kind}")
        if self.rate < 0 or self.alpha < 0:
            raise PricingError("통행료 단가와 α는 음수가 될 수 없습니다")
        if self.interval <= 0 or self.interval % 300 != 0:
            raise PricingError(f"통행료 구간은 5분의 배수여야 합니다: {self.interval}")
        for (link_id, _), amount in self.link_tolls.items():
            if amount < 0 or amount > self.cap + 1e-9:
                raise PricingError(f"{link_id}: MCP 통행료가 [0, {self.cap}] 범위를 벗어났습니다: {amount}")
        if any(s < 0 for s in self.sigma.values()):
            raise PricingError("σ는 음수가 될 수 없습니다")
        for start, end in self.windows:
            if end <= start:
                raise PricingError(f"시간대가 올바르지 않습니다: {start} ~ {end}")
        self.links = frozenset(self.links)

    def in_window(self, t: float) -> bool:
        return any(start <= t < end for start, end in self.windows)

    def link_toll(self, link_id: str, t: float) -> float:
        """링크 진입 시 부과액"""
        if self.kind == SCHEME_FACILITY:
            return facility_toll(link_id, t, self)
        if self.kind == SCHEME_MCP:
            return self.link_tolls.get((link_id, int(t // self.interval)), 0.0)
        return 0.0

    def trip_toll(self, entries: Sequence[Tuple[str, float]], start: Optional[float],
                  end: Optional[float], network: Network) -> float:
        """이동 종료 시 부과액"""
        if self.kind == SCHEME_DISTANCE:
            return distance_toll(entries, network, self.rate, self.windows)
        if self.kind == SCHEME_TRAVEL_TIME and start is not None and end is not None:
            return traveltime_toll(start, end, self)
        return 0.0

    def expected_charge(self, link_id: str, t_enter: float, travel_time: float, network: Network) -> float:
        """경로 탐색용 링크 단위 예상 부과액 ($)"""
        if self.kind in (SCHEME_FACILITY, SCHEME_MCP):
            return self.link_toll(link_id, t_enter)
        if self.kind == SCHEME_DISTANCE:
            return self.rate * network.link(link_id).length_miles if self.in_window(t_enter) else 0.0
        if self.kind == SCHEME_TRAVEL_TIME:
            sigma = self.sigma.get(int(t_enter // self.interval), 0.0)
            return self.alpha * sigma * travel_time / SECONDS_PER_HOUR
        return 0.0

    def charged_cells(self) -> int:
        """부과 대상 (링크, 구간) 또는 (구간) 칸 수"""
        if self.kind == SCHEME_MCP:
            return len(self.link_tolls)
        if self.kind == SCHEME_TRAVEL_TIME:
            return len(self.sigma)
        return len(self.links)

    def mean_charge(self) -> float:
        """공표 통행료 평균 (MCP: $, 통행 시간: $/veh·h 단위 α·σ, 그 외: 단가)"""
        if self.kind == SCHEME_MCP:
            return float(np.mean(list(self.link_tolls.values()))) if self.link_tolls else 0.0
        if self.kind == SCHEME_TRAVEL_TIME:
            return float(np.mean([self.alpha * s for s in self.sigma.values()])) if self.sigma else 0.0
        return self.rate

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "links": sorted(self.links),
            "rate": self.rate,
            "windows": [[format_time(s), format_time(e)] for s, e in self.windows],
            "interval": self.interval,
            "link_tolls": [
                {"link": link_id, "interval": k, "start": format_time(k * self.interval), "toll": amount}
                for (link_id, k), amount in sorted(self.link_tolls.items())
            ],
            "sigma": [
                {"interval": k, "start": format_time(k * self.interval), "sigma": value}
                for k, value in sorted(self.sigma.items())
            ],
            "alpha": self.alpha,
            "cap": self.cap,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TollSchedule":
        try:
            return cls(
                kind=data.get("kind", SCHEME_NONE),
                links=frozenset(data.get("links", [])),
                rate=float(data.get("rate", 0.0)),
                windows=tuple((parse_time(s), parse_time(e)) for s, e in data.get("windows", [])),
                interval=float(data.get("interval", MCP_INTERVAL)),
                link_tolls={(r["link"], int(r["interval"])): float(r["toll"]) for r in data.get("link_tolls", [])},
                sigma={int(r["interval"]): float(r["sigma"]) for r in data.get("sigma", [])},
                alpha=float(data.get("alpha", DEFAULT_ALPHA)),
                cap=float(data.get("cap", MCP_CAP)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise PricingError(f"통행료 스케줄 형식 오류: {e}") from None

    def save(self, path: Union[str, Path]) -> bool:
        return write_json(Path(path), self.to_dict())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TollSchedule":
        data = read_json(Path(path))
        if data is None:
            raise FileNotFoundError(f"통행료 스케줄을 읽을 수 없습니다: {path}")
        return cls.from_dict(data)


# ----- 시설/거리 기반 -----

def _peak_observations(observations: Iterable[FlowObservation],
                       peaks: Sequence[Tuple[float, float]]) -> List[FlowObservation]:
    return [o for o in observations if any(s <= o.start and o.end <= e for s, e in peaks)]


def peak_vc_ratios(
    flows: Dict[str, List[FlowObservation]],
    network: Network,
    peaks: Sequence[Tuple[float, float]] = DEFAULT_PEAKS,
) -> Dict[str, float]:
    """첨두 시간대 시간당 교통량/용량 비율"""
    peak_hours = sum(e - s for s, e in peaks) / SECONDS_PER_HOUR
    if peak_hours <= 0:
        raise PricingError("첨두 시간대가 비어 있습니다")
    ratios = {}
    for link_id, observations in flows.items():
        volume = sum(o.users for o in _peak_observations(observations, peaks))
        ratios[link_id] = volume / peak_hours / network.link(link_id).flow_capacity
    return ratios


def select_congested_links(
    flows: Dict[str, List[FlowObservation]],
    network: Network,
    threshold: float = 0.9,
    peaks: Sequence[Tuple[float, float]] = DEFAULT_PEAKS,
) -> FrozenSet[str]:
    """첨두 V/C ≥ threshold인 링크 집합

    Raises:
        PricingError: 관측값이 없을 때
    """
    if not flows or not any(flows.values()):
        raise PricingError("교통 관측값이 없어 혼잡 링크를 고를 수 없습니다")
    ratios = peak_vc_ratios(flows, network, peaks)
    selected = frozenset(link_id for link_id, vc in ratios.items() if vc >= threshold)
    LOG.info("혼잡 링크 %d개 선정 (V/C ≥ %.2f)", len(selected), threshold)
    return selected


def facility_schedule(links: Iterable[str], rate: float,
                      peaks: Sequence[Tuple[float, float]] = DEFAULT_PEAKS) -> TollSchedule:
    return TollSchedule(SCHEME_FACILITY, frozenset(links), float(rate), tuple(peaks))


def distance_schedule(rate: float, window: Tuple[float, float] = DEFAULT_DISTANCE_WINDOW) -> TollSchedule:
    return TollSchedule(SCHEME_DISTANCE, frozenset(), float(rate), (tuple(window),))


def facility_toll(link_id: str, t: float, schedule: TollSchedule) -> float:
    """선정 링크에 첨두 시간대 진입하면 단가 부과"""
    if link_id in schedule.links and schedule.in_window(t):
        return to_cents(schedule.rate)
    return 0.0


def distance_toll(entries: Sequence[Tuple[str, float]], network: Network, rate: float,
                  windows: Sequence[Tuple[float, float]]) -> float:
    """시간대 안에서 진입한 링크 길이 합 × 마일당 단가"""
    meters = sum(network.link(link_id).length for link_id, t in entries
                 if any(s <= t < e for s, e in windows))
    return to_cents(rate * meters / METERS_PER_MILE)


# ----- MCP -----

def _interval_pairs(observations: List[FlowObservation], interval: float):
    """통행료 구간별로 그 안에서 시작하는 연속 5분 관측 쌍"""
    grouped = defaultdict(list)
    for current, following in zip(observations, observations[1:]):
        grouped[int(current.start // interval)].append((current, following))
    return grouped


def mcp_interval_toll(total_delay: float, value_of_time: float, total_additional: float,
                      cap: float = MCP_CAP) -> float:
    """τ = d·VTTS/Δn, Δn = 0이면 0, 상한 cap"""
    if total_additional <= 0:
        return 0.0
    return to_cents(min(cap, max(0.0, total_delay * value_of_time / total_additional)))


def mcp_schedule(
    flows: Dict[str, List[FlowObservation]],
    network: Network,
    value_of_time: float,
    cap: float = MCP_CAP,
    interval: float = MCP_INTERVAL,
    links: Optional[Iterable[str]] = None,
) -> TollSchedule:
    """링크×15분 구간별 한계 혼잡비용 통행료"""
    targets = set(links) if links is not None else set(flows)
    tolls: Dict[Tuple[str, int], float] = {}
    for link_id in sorted(targets):
        link = network.link(link_id)
        observations = sorted(flows.get(link_id, []), key=lambda o: o.start)
        for k, pairs in _interval_pairs(observations, interval).items():
            delay = sum(link_delay(a, b, link) for a, b in pairs)
            extra = sum(additional_users(a, b, link) for a, b in pairs)
            toll = mcp_interval_toll(delay, value_of_time, extra, cap)
            if toll > 0:
                tolls[(link_id, k)] = toll
    LOG.info("MCP 통행료 %d건 (링크 %d개, 최대 $%.2f)", len(tolls), len(targets),
             max(tolls.values()) if tolls else 0.0)
    return TollSchedule(SCHEME_MCP, frozenset(targets), interval=interval, link_tolls=tolls, cap=cap)


# ----- 통행 시간 기반 -----

def traveltime_sigma(total_delay: float, value_of_time: float, departures: int, mean_trip_hours: float) -> float:
    """σ = Σd·VTTS / (S·r) ($/veh·h), 출발이 없으면 0"""
    if departures <= 0 or mean_trip_hours <= 0:
        return 0.0
    return total_delay * value_of_time / (departures * mean_trip_hours)


def mean_trip_hours(events: EventLog, network: Network) -> float:
    """r = L/U: 도로망 수단 평균 이동 거리 / 길이 가중 평균 자유 속도 (시간)"""
    distances = [e.distance for e in events.of_kind(EVENT_ARRIVE) if e.mode in NETWORK_MODES and e.distance]
    if not distances:
        return 0.0
    return float(np.mean(distances)) / network.mean_free_speed() / SECONDS_PER_HOUR


def traveltime_schedule(
    flows: Dict[str, List[FlowObservation]],
    network: Network,
    events: EventLog,
    value_of_time: float,
    alpha: float = DEFAULT_ALPHA,
    interval: float = TRAVEL_TIME_INTERVAL,
    links: Optional[Iterable[str]] = None,
) -> TollSchedule:
    """30분 구간별 σ 계산 (분석 대상 링크 지연 합, 구간 내 도로망 수단 출발 수)"""
    targets = sorted(set(links) if links is not None else set(flows))
    delays: Dict[int, float] = defaultdict(float)
    for link_id in targets:
        link = network.link(link_id)
        observations = sorted(flows.get(link_id, []), key=lambda o: o.start)
        for k, pairs in _interval_pairs(observations, interval).items():
            delays[k] += sum(link_delay(a, b, link) for a, b in pairs)

    departures: Dict[int, int] = defaultdict(int)
    for event in events.of_kind(EVENT_DEPART):
        if event.mode in NETWORK_MODES:
            departures[int(event.time // interval)] += 1

    r = mean_trip_hours(events, network)
    sigma = {}
    for k, delay in delays.items():
        value = traveltime_sigma(delay, value_of_time, departures.get(k, 0), r)
        if value > 0:
            sigma[k] = value
    LOG.info("통행 시간 통행료 σ %d개 구간 (r=%.3f h)", len(sigma), r)
    return TollSchedule(SCHEME_TRAVEL_TIME, frozenset(targets), interval=interval, sigma=sigma, alpha=alpha)


def traveltime_toll(start: float, end: float, schedule: TollSchedule) -> float:
    """이동 시간을 30분 구간으로 나눠 α·σ_k·체류 시간 합산"""
    if end < start:
        raise PricingError(f"이동 종료가 시작보다 빠릅니다: {start} > {end}")
    total = 0.0
    t = start
    while t < end:
        k = int(t // schedule.interval)
        seg_end = min(end, (k + 1) * schedule.interval)
        total += schedule.alpha * schedule.sigma.get(k, 0.0) * (seg_end - t) / SECONDS_PER_HOUR
        t = seg_end
    return to_cents(total)


# ----- 오프라인 재계산 -----

def recompute_tolls(events: EventLog, network: Network, schedule: TollSchedule) -> float:
    """이벤트 로그의 링크 진입 기록으로 총 통행료를 다시 계산"""
    entries: Dict[Tuple[str, int], List[Tuple[str, float]]] = defaultdict(list)
    leaves: Dict[Tuple[str, int], float] = {}
    total = 0.0
    for event in events:
        key = (event.agent_id, event.trip_index)
        if event.kind == EVENT_LINK_ENTER:
            entries[key].append((event.link_id, event.time))
            total += schedule.link_toll(event.link_id, event.time)
        elif event.kind == EVENT_LINK_LEAVE:
            leaves[key] = event.time
        elif event.kind == EVENT_ARRIVE and key in entries:
            trip_entries = entries[key]
            total += schedule.trip_toll(trip_entries, trip_entries[0][1], leaves.get(key), network)
    return to_cents(total)


# ----- 반복 수렴 -----

def delta_travel_time(previous, current) -> Tuple[float, int, int]:
    """ΔTT (%): 같은 (에이전트, 이동 순번)이고 수단이 같은 이동끼리 비교

    이동별 변화는 이번 반복의 통행 시간으로 나눈다.

    Returns:
        (ΔTT, 비교된 이동 수, 비교 불가 이동 수)
    """
    before = previous.experienced()
    after = current.experienced()
    per_agent = []
    matched = unmatched = 0
    for agent_id, plan in after.items():
        old = before.get(agent_id)
        changes = []
        for index, trip in plan.trips.items():
            prev_trip = old.trips.get(index) if old else None
            if (prev_trip is None or prev_trip.mode != trip.mode or not trip.completed
                    or not prev_trip.completed or trip.travel_time <= 0):
                unmatched += 1
                continue
            matched += 1
            changes.append(abs(prev_trip.travel_time - trip.travel_time) / trip.travel_time)
        if changes:
            per_agent.append(sum(changes))
    value = 100.0 * float(np.mean(per_agent)) if per_agent else 0.0
    return value, matched, unmatched


def delta_utility(previous, current) -> float:
    """ΔU (%): 에이전트별 실행 점수 상대 변화의 평균"""
    changes = []
    for agent_id, score in current.executed_scores.items():
        old = previous.executed_scores.get(agent_id)
        if old is None or abs(old) < 1e-9:
            continue
        changes.append(abs(old - score) / abs(old))
    return 100.0 * float(np.mean(changes)) if changes else 0.0


def average_vtts(state, scoring) -> float:
    """도로망 수단 이용 이동 기준 평균 VTTS ($/h)"""
    from .scoring import vtts

    values = [vtts(scoring.mode(e.mode), scoring)
              for e in state.events.of_kind(EVENT_DEPART) if e.mode in NETWORK_MODES]
    if not values:
        return vtts(scoring.mode("car"), scoring)
    return float(np.mean(values))


@dataclass
class TollConvergence:
    schedule: TollSchedule
    state: object
    baseline: object
    trace: pd.DataFrame
    converged: bool
    report: object = None
    chosen_iteration: int = 0


def converge_tolls(
    scenario,
    kind: str,
    replanning=None,
    seed: int = 0,
    tt_target: float = 5.0,
    utility_target: float = 5.0,
    max_outer: int = 15,
    value_of_time: Optional[float] = None,
    alpha: float = DEFAULT_ALPHA,
    cap: float = MCP_CAP,
    links: Optional[Iterable[str]] = None,
    baseline=None,
    literal_welfare: bool = False,
) -> TollConvergence:
    """통행료 계산과 평형 재계산을 ΔTT, ΔU가 목표 이하가 될 때까지 반복

    첫 반복은 통행료 0의 평형이다. 수렴 여부와 관계없이 후생 변화가 가장 큰 반복을 돌려준다.
    """
    from .analytics import welfare_change
    from .mobsim import measure_flows
    from .replanning import run_to_equilibrium

    if kind not in (SCHEME_MCP, SCHEME_TRAVEL_TIME):
        raise PricingError(f"반복 수렴은 mcp/traveltime 체계만 지원합니다: {kind}")
    if baseline is None:
        baseline = run_to_equilibrium(scenario, TollSchedule(), replanning, seed)

    previous = baseline
    rows = []
    best = None
    converged = False
    for k in range(1, max_outer + 1):
        flows = measure_flows(previous.events, scenario.network, links=list(links) if links else None)
        vot = value_of_time if value_of_time is not None else average_vtts(previous, scenario.scoring)
        if kind == SCHEME_MCP:
            schedule = mcp_schedule(flows, scenario.network, vot, cap, links=links)
        else:
            schedule = traveltime_schedule(flows, scenario.network, previous.events, vot, alpha, links=links)

        state = run_to_equilibrium(scenario, schedule, replanning, seed)
        d_tt, matched, unmatched = delta_travel_time(previous, state)
        d_u = delta_utility(previous, state)
        report = welfare_change(baseline, state, scenario.scoring.beta_money, literal_welfare, scenario.network)
        rows.append({
            "outer_iteration": k, "delta_tt": d_tt, "delta_u": d_u,
            "matched_trips": matched, "unmatched_trips": unmatched,
            "revenue": report.revenues, "welfare_change": report.welfare_change,
            "mean_toll": schedule.mean_charge(), "tolled_cells": schedule.charged_cells(),
            "inner_converged": state.converged,
        })
        LOG.info("통행료 반복 %d (%s): ΔTT=%.2f%%, ΔU=%.2f%%, 수입 $%.2f, Δω=$%.2f",
                 k, kind, d_tt, d_u, report.revenues, report.welfare_change)
        if unmatched:
            LOG.warning("통행료 반복 %d: 수단이 바뀌었거나 끝나지 않아 비교하지 못한 이동 %d건", k, unmatched)

        if best is None or report.welfare_change > best[2].welfare_change:
            best = (schedule, state, report, k)
        if d_tt <= tt_target and d_u <= utility_target:
            converged = True
            break
        previous = state

    if not converged:
        LOG.warning("통행료 반복이 %d회 내 수렴하지 않았습니다", max_outer)
    schedule, state, report, chosen = best
    LOG.info("후생이 가장 큰 통행료 반복 %d을 반환합니다 (Δω=$%.2f)", chosen, report.welfare_change)
    trace = pd.DataFrame(rows)
    trace["chosen"] = trace["outer_iteration"] == chosen
    return TollConvergence(schedule, state, baseline, trace, converged, report, chosen)
