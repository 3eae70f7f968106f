"""이벤트 로그 모듈

모빌리티 시뮬레이션이 남기는 시각별 이벤트와 JSON Lines 직렬화.
효용 계산과 분석은 모두 이 로그만을 근거로 한다.
"""

import json
from dataclasses import dataclass, asdict, fields
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Union

EVENT_DEPART = "depart"
EVENT_LINK_ENTER = "link_enter"
EVENT_LINK_LEAVE = "link_leave"
EVENT_ARRIVE = "arrive"
EVENT_TOLL = "toll_charged"
EVENT_ACT_START = "act_start"
EVENT_ACT_END = "act_end"
EVENT_SAV_REQUEST = "sav_request"
EVENT_SAV_PICKUP = "sav_pickup"
EVENT_SAV_DROPOFF = "sav_dropoff"
EVENT_SAV_EMPTY = "sav_empty_drive"
EVENT_STUCK = "stuck"

EVENT_KINDS = (
    EVENT_DEPART, EVENT_LINK_ENTER, EVENT_LINK_LEAVE, EVENT_ARRIVE, EVENT_TOLL,
    EVENT_ACT_START, EVENT_ACT_END, EVENT_SAV_REQUEST, EVENT_SAV_PICKUP,
    EVENT_SAV_DROPOFF, EVENT_SAV_EMPTY, EVENT_STUCK,
)


@dataclass(frozen=True)
class Event:
    """시뮬레이션 이벤트

    agent_id는 비용이 귀속되는 사람이다. SAV의 빈 차량 접근 이동도 요청자에게 귀속된다.
    amount는 toll_charged(통행료)와 sav_dropoff(요금)에서만 쓰인다.
    """
    time: float
    kind: str
    agent_id: Optional[str] = None
    vehicle_id: Optional[str] = None
    link_id: Optional[str] = None
    mode: Optional[str] = None
    trip_index: Optional[int] = None
    amount: Optional[float] = None
    distance: Optional[float] = None  # m
    activity: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Event":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"알 수 없는 이벤트 필드: {sorted(unknown)}")
        if data.get("kind") not in EVENT_KINDS:
            raise ValueError(f"알 수 없는 이벤트 종류: {data.get('kind')}")
        return cls(**data)


class EventLog:
    """시각 순 이벤트 목록"""

    def __init__(self, events: Optional[Iterable[Event]] = None, horizon: Optional[float] = None):
        self._events: List[Event] = list(events) if events else []
        self.horizon = horizon

    def append(self, event: Event):
        if self._events and event.time < self._events[-1].time:
            raise ValueError(f"이벤트 시각이 역행합니다: {event.time} < {self._events[-1].time}")
        self._events.append(event)

    def __iter__(self) -> Iterator[Event]:
        return iter(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def __getitem__(self, index):
        return self._events[index]

    def __eq__(self, other) -> bool:
        return isinstance(other, EventLog) and self._events == other._events

    def of_kind(self, *kinds: str) -> List[Event]:
        return [e for e in self._events if e.kind in kinds]

    def total_tolls(self) -> float:
        return sum(e.amount for e in self._events if e.kind == EVENT_TOLL)

    def to_lines(self) -> Iterator[str]:
        for event in self._events:
            yield json.dumps(event.to_dict(), ensure_ascii=False)

    def save(self, path: Union[str, Path]):
        """JSON Lines로 저장 (필드 순서 고정)"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            for line in self.to_lines():
                f.write(line + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EventLog":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"이벤트 로그를 찾을 수 없습니다: {path}")
        log = cls()
        with open(path, 'r', encoding='utf-8') as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    log.append(Event.from_dict(json.loads(line)))
                except (json.JSONDecodeError, TypeError, ValueError) as e:
                    raise ValueError(f"{path}:{line_no} 이벤트 파싱 실패: {e}") from None
        return log
