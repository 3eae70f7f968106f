"""분석 모듈

교통 지표(VMT, 빈 차량 VMT, 지연, 수단 분담률)와 후생 변화, 요금 스윕 보고서.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Dict, Optional, Sequence, Tuple

import pandas as pd

from .errors import PopulationError
from .events import (
    EventLog, EVENT_ARRIVE, EVENT_DEPART, EVENT_LINK_ENTER, EVENT_LINK_LEAVE, EVENT_SAV_EMPTY, EVENT_STUCK,
)
from .models import ALL_MODES, METERS_PER_MILE, NETWORK_MODES
from .network import Network
from .pricing import (
    SCHEME_DISTANCE, SCHEME_FACILITY, DEFAULT_PEAKS, DEFAULT_DISTANCE_WINDOW,
    distance_schedule, facility_schedule, select_congested_links,
)
from .utils import to_cents

LOG = logging.getLogger(__name__)


@dataclass
class TrafficMetrics:
    """하루 교통 지표 (거리: 마일, 지연: 시간, 분담률: %)"""
    vmt: float = 0.0
    empty_vmt: float = 0.0
    total_delay: float = 0.0
    trips: int = 0
    motorized_trips: int = 0
    stuck: int = 0
    mode_shares: Dict[str, float] = field(default_factory=dict)
    partial: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def traffic_metrics(events: EventLog, network: Network) -> TrafficMetrics:
    """이벤트 로그에서 교통 지표 계산

    지연은 링크 체류 시간 중 자유류 통과 시간을 넘는 부분의 합이다.
    출발 수가 도착+stuck 수보다 많으면 partial로 표시한다.
    """
    metrics = TrafficMetrics()
    pending: Dict[Tuple[str, str], float] = {}
    counts = {m: 0 for m in ALL_MODES}
    arrivals = 0
    vmt_m = empty_m = delay_s = 0.0
    for event in events:
        if event.kind == EVENT_LINK_ENTER:
            pending[(event.vehicle_id, event.link_id)] = event.time
        elif event.kind == EVENT_LINK_LEAVE:
            link = network.link(event.link_id)
            vmt_m += link.length
            entered = pending.pop((event.vehicle_id, event.link_id), None)
            if entered is not None:
                delay_s += max(0.0, event.time - entered - link.traverse_time)
        elif event.kind == EVENT_SAV_EMPTY:
            empty_m += event.distance or 0.0
        elif event.kind == EVENT_DEPART:
            counts[event.mode] = counts.get(event.mode, 0) + 1
        elif event.kind == EVENT_ARRIVE:
            arrivals += 1
        elif event.kind == EVENT_STUCK:
            metrics.stuck += 1

    metrics.trips = sum(counts.values())
    metrics.motorized_trips = sum(counts[m] for m in NETWORK_MODES)
    metrics.vmt = vmt_m / METERS_PER_MILE
    metrics.empty_vmt = empty_m / METERS_PER_MILE
    metrics.total_delay = delay_s / 3600.0
    metrics.mode_shares = {m: (100.0 * c / metrics.trips if metrics.trips else 0.0) for m, c in counts.items()}
    metrics.partial = metrics.trips > arrivals + metrics.stuck
    if metrics.partial:
        LOG.warning("이벤트 로그가 불완전합니다: 출발 %d, 도착 %d, stuck %d", metrics.trips, arrivals, metrics.stuck)
    return metrics


@dataclass
class WelfareReport:
    """통행료 체계의 후생 변화 ($)

    welfare_change = revenues + consumer_surplus_change
    """
    revenues: float
    consumer_surplus_change: float
    welfare_change: float
    n_agents: int
    baseline_welfare: float
    baseline: TrafficMetrics
    tolled: TrafficMetrics
    literal: bool = False

    @property
    def per_capita(self) -> float:
        return self.welfare_change / self.n_agents if self.n_agents else 0.0

    @property
    def welfare_change_pct(self) -> float:
        if abs(self.baseline_welfare) < 1e-9:
            return 0.0
        return 100.0 * self.welfare_change / abs(self.baseline_welfare)

    def mode_share_changes(self) -> Dict[str, float]:
        """수단별 분담률 상대 변화 (%)"""
        changes = {}
        for mode, share in self.tolled.mode_shares.items():
            before = self.baseline.mode_shares.get(mode, 0.0)
            changes[mode] = 100.0 * (share - before) / before if before > 0 else 0.0
        return changes

    def to_row(self) -> dict:
        row = {
            "revenues": self.revenues,
            "consumer_surplus_change": self.consumer_surplus_change,
            "welfare_change": self.welfare_change,
            "welfare_change_per_capita": round(self.per_capita, 4),
            "welfare_change_pct": round(self.welfare_change_pct, 4),
            "vmt": round(self.tolled.vmt, 3),
            "empty_vmt": round(self.tolled.empty_vmt, 3),
            "total_delay_h": round(self.tolled.total_delay, 3),
            "vmt_change_pct": _relative(self.tolled.vmt, self.baseline.vmt),
            "delay_change_pct": _relative(self.tolled.total_delay, self.baseline.total_delay),
            "motorized_trip_change_pct": _relative(self.tolled.motorized_trips, self.baseline.motorized_trips),
        }
        for mode, share in self.tolled.mode_shares.items():
            row[f"share_{mode}"] = round(share, 3)
        for mode, change in self.mode_share_changes().items():
            row[f"share_change_{mode}"] = round(change, 3)
        return row

    def to_text(self) -> str:
        lines = [
            f"통행료 수입: ${self.revenues:,.2f}",
            f"소비자 잉여 변화: ${self.consumer_surplus_change:,.2f}",
            f"후생 변화: ${self.welfare_change:,.2f} (1인당 ${self.per_capita:,.4f}, {self.welfare_change_pct:+.3f}%)",
            f"VMT: {self.tolled.vmt:,.1f} mi (빈 차량 {self.tolled.empty_vmt:,.1f} mi)",
            f"총 지연: {self.tolled.total_delay:,.2f} veh·h",
            "수단 분담률:",
        ]
        changes = self.mode_share_changes()
        for mode, share in self.tolled.mode_shares.items():
            lines.append(f"  {mode}: {share:.2f}% ({changes[mode]:+.2f}%)")
        if self.literal:
            lines.append("(β_c 곱셈 형태로 계산됨)")
        return "\n".join(lines)


def _relative(value: float, base: float) -> float:
    return round(100.0 * (value - base) / base, 3) if base else 0.0


def welfare_change(baseline, tolled, beta_money: float, literal: bool = False,
                   network: Optional[Network] = None) -> WelfareReport:
    """기준 상태 대비 통행료 상태의 후생 변화

    소비자 잉여 변화는 Σ(V' − V)/β_c. literal=True이면 β_c를 곱한다.

    Raises:
        PopulationError: 두 상태의 에이전트 집합이 다를 때
    """
    if set(baseline.executed_scores) != set(tolled.executed_scores):
        raise PopulationError("기준 상태와 통행료 상태의 인구가 다릅니다")
    if beta_money <= 0:
        raise ValueError(f"β_c는 양수여야 합니다: {beta_money}")

    diff = sum(tolled.executed_scores[a] - baseline.executed_scores[a] for a in baseline.executed_scores)
    cs = diff * beta_money if literal else diff / beta_money
    revenues = to_cents(tolled.events.total_tolls())
    cs = to_cents(cs)
    base_total = sum(baseline.executed_scores.values())
    base_welfare = base_total * beta_money if literal else base_total / beta_money

    net = network if network is not None else _network_of(tolled)
    return WelfareReport(
        revenues=revenues,
        consumer_surplus_change=cs,
        welfare_change=to_cents(revenues + cs),
        n_agents=len(baseline.executed_scores),
        baseline_welfare=base_welfare,
        baseline=traffic_metrics(baseline.events, net) if net else TrafficMetrics(),
        tolled=traffic_metrics(tolled.events, net) if net else TrafficMetrics(),
        literal=literal,
    )


def _network_of(state) -> Optional[Network]:
    times = getattr(state, "travel_times", None)
    return times.network if times is not None else None


# ----- 요금 스윕 -----

def _sweep_cell(args) -> dict:
    scenario, schedule, replanning, seed, baseline, literal = args
    from .replanning import run_to_equilibrium

    state = run_to_equilibrium(scenario, schedule, replanning, seed)
    report = welfare_change(baseline, state, scenario.scoring.beta_money, literal, scenario.network)
    row = {"fare": schedule.rate, "converged": state.converged, "iterations": state.iterations}
    row.update(report.to_row())
    return row


def sweep_report(
    scenario,
    kind: str,
    fares: Sequence[float] = (0.1, 0.2, 0.3),
    replanning=None,
    seed: int = 0,
    baseline=None,
    workers: int = 1,
    threshold: float = 0.9,
    peaks=DEFAULT_PEAKS,
    window=DEFAULT_DISTANCE_WINDOW,
    literal: bool = False,
) -> Tuple[pd.DataFrame, Optional[float]]:
    """시설/거리 통행료 단가 격자 스윕

    Returns:
        (단가별 지표 표, 수렴한 셀 중 후생 변화 최대 단가 또는 None)
    """
    from .mobsim import measure_flows
    from .replanning import run_to_equilibrium
    from .pricing import TollSchedule

    if kind not in (SCHEME_FACILITY, SCHEME_DISTANCE):
        raise ValueError(f"스윕은 facility/distance 체계만 지원합니다: {kind}")
    if baseline is None:
        baseline = run_to_equilibrium(scenario, TollSchedule(), replanning, seed)

    if kind == SCHEME_FACILITY:
        links = select_congested_links(measure_flows(baseline.events, scenario.network),
                                       scenario.network, threshold, peaks)
        schedules = [facility_schedule(links, fare, peaks) for fare in fares]
    else:
        schedules = [distance_schedule(fare, window) for fare in fares]

    cells = [(scenario, s, replanning, seed, baseline, literal) for s in schedules]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(cell) for cell in cells]

    table = pd.DataFrame(rows)
    converged = table[table["converged"]]
    best = None
    if not converged.empty:
        best = float(converged.loc[converged["welfare_change"].idxmax(), "fare"])
    LOG.info("%s 스윕 완료: 최적 단가 %s", kind, best)
    return table, best


def appendix_layout(table: pd.DataFrame) -> pd.DataFrame:
    """지표를 행, 단가를 열로 둔 요약표"""
    return table.set_index("fare").T
