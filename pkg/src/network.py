"""도로망 모듈

링크별 큐 파라미터, 기본도(fundamental diagram) 측정값, 혼합 교통류 용량 보정을 다룬다.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import networkx as nx

from .errors import NetworkError
from .models import Node, Link, FlowObservation, SECONDS_PER_HOUR

LOG = logging.getLogger(__name__)

EFFECTIVE_VEHICLE_LENGTH = 7.5  # m, 저장 용량 계산용 차량 점유 길이
AV_CAPACITY_PARAMETER = 0.666  # AV가 요구하는 용량 비율 c
MIN_SPEED_MS = 0.5  # 정지 상태의 지연 계산 하한 속도

NODE_HEADER = ["id", "x", "y"]
LINK_HEADER = ["id", "from", "to", "length_m", "freespeed_ms", "capacity_vph", "lanes"]


class Network:
    """불변 도로망

    노드별 나가는 링크 인덱스와 링크 그래프(networkx DiGraph, 노드=링크)를 함께 보관한다.
    링크 그래프의 간선 u→v 가중치는 v의 자유류 통과 시간이다.
    """

    def __init__(self, nodes: Dict[str, Node], links: Dict[str, Link]):
        self._nodes = dict(nodes)
        self._links = dict(links)
        self._order = {link_id: i for i, link_id in enumerate(sorted(self._links))}
        self._out: Dict[str, List[str]] = {n: [] for n in self._nodes}
        for link in self._links.values():
            self._out[link.from_node].append(link.id)
        for node_id in self._out:
            self._out[node_id].sort()

        self._graph = nx.DiGraph()
        self._graph.add_nodes_from(sorted(self._links))
        for link in self._links.values():
            for nxt in self._out[link.to_node]:
                self._graph.add_edge(link.id, nxt, weight=self._links[nxt].traverse_time)
        self._freeflow_cache: Dict[str, Dict[str, float]] = {}

    @property
    def nodes(self) -> Dict[str, Node]:
        return dict(self._nodes)

    @property
    def links(self) -> Dict[str, Link]:
        return dict(self._links)

    def link(self, link_id: str) -> Link:
        try:
            return self._links[link_id]
        except KeyError:
            raise NetworkError(f"알 수 없는 링크: {link_id}") from None

    def node(self, node_id: str) -> Node:
        return self._nodes[node_id]

    def has_link(self, link_id: str) -> bool:
        return link_id in self._links

    def link_ids(self) -> List[str]:
        return sorted(self._links)

    def link_order(self, link_id: str) -> int:
        return self._order[link_id]

    def out_links(self, link_id: str) -> List[str]:
        """링크 끝 노드에서 나가는 링크들"""
        return self._out[self.link(link_id).to_node]

    def link_position(self, link_id: str) -> Node:
        """링크 위 활동의 좌표 (끝 노드)"""
        return self._nodes[self.link(link_id).to_node]

    def beeline_distance(self, from_link: str, to_link: str) -> float:
        a = self.link_position(from_link)
        b = self.link_position(to_link)
        return math.hypot(a.x - b.x, a.y - b.y)

    def freeflow_times_from(self, link_id: str) -> Dict[str, float]:
        """link_id 끝에서 출발해 각 링크 끝까지의 자유류 최단 시간 (초)"""
        if link_id not in self._freeflow_cache:
            self._freeflow_cache[link_id] = nx.single_source_dijkstra_path_length(
                self._graph, link_id, weight="weight"
            )
        return self._freeflow_cache[link_id]

    def freeflow_time(self, from_link: str, to_link: str) -> float:
        """자유류 경로 시간. 도달 불가능하면 inf"""
        return self.freeflow_times_from(from_link).get(to_link, math.inf)

    def is_connected(self, from_link: str, to_link: str) -> bool:
        return nx.has_path(self._graph, from_link, to_link)

    def mean_free_speed(self) -> float:
        """길이 가중 평균 자유 속도 (m/s)"""
        total = sum(l.length for l in self._links.values())
        return sum(l.length * l.free_speed for l in self._links.values()) / total


def build_network(
    nodes: Iterable[Node],
    links: Iterable[Link],
    capacity_factor: float = 1.0,
    effective_vehicle_length: float = EFFECTIVE_VEHICLE_LENGTH,
) -> Network:
    """노드/링크 목록으로 도로망 생성

    capacity_factor는 표본 비율에 맞춘 용량 축소 계수이며 유량/저장 용량 모두에 적용된다.

    Raises:
        NetworkError: 링크 없음, 중복 ID, 존재하지 않는 노드 참조, 비양수 속성
    """
    node_map: Dict[str, Node] = {}
    for node in nodes:
        if node.id in node_map:
            raise NetworkError(f"중복 노드 ID: {node.id}")
        if not (math.isfinite(node.x) and math.isfinite(node.y)):
            raise NetworkError(f"노드 좌표가 유한하지 않습니다: {node.id}")
        node_map[node.id] = node

    link_list = list(links)
    if not link_list:
        raise NetworkError("no links: 링크가 하나도 없습니다")
    if capacity_factor <= 0:
        raise NetworkError(f"용량 계수는 양수여야 합니다: {capacity_factor}")

    link_map: Dict[str, Link] = {}
    for link in link_list:
        if link.id in link_map:
            raise NetworkError(f"중복 링크 ID: {link.id}")
        for node_id in (link.from_node, link.to_node):
            if node_id not in node_map:
                raise NetworkError(f"링크 {link.id}가 존재하지 않는 노드 {node_id}를 참조합니다")
        if link.length <= 0 or link.free_speed <= 0 or link.flow_capacity <= 0 or link.lanes < 1:
            raise NetworkError(f"링크 {link.id}의 속성은 양수여야 합니다")
        link_map[link.id] = link.with_capacity_factor(capacity_factor, effective_vehicle_length)

    LOG.debug("도로망 생성: 노드 %d개, 링크 %d개", len(node_map), len(link_map))
    return Network(node_map, link_map)


def load_network(path: Union[str, Path], capacity_factor: float = 1.0) -> Network:
    """CSV 도로망 파일 로드

    파일은 '#nodes' 구역(id,x,y)과 '#links' 구역(id,from,to,length_m,freespeed_ms,capacity_vph,lanes)으로 구성된다.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"도로망 파일을 찾을 수 없습니다: {path}")

    nodes: List[Node] = []
    links: List[Link] = []
    section = None
    with open(path, 'r', encoding='utf-8', newline='') as f:
        for row in csv.reader(f):
            if not row or not "".join(row).strip():
                continue
            head = row[0].strip()
            if head.lower() in ("#nodes", "#links"):
                section = head.lower()
                continue
            if head in ("id",):
                continue  # 헤더 행
            try:
                if section == "#nodes":
                    nodes.append(Node(head, float(row[1]), float(row[2])))
                elif section == "#links":
                    links.append(Link(
                        id=head, from_node=row[1].strip(), to_node=row[2].strip(),
                        length=float(row[3]), free_speed=float(row[4]),
                        flow_capacity=float(row[5]), lanes=int(row[6]),
                    ))
                else:
                    raise NetworkError(f"구역 표시(#nodes/#links) 이전의 레코드: {row}")
            except (IndexError, ValueError) as e:
                raise NetworkError(f"잘못된 도로망 레코드 {row}: {e}") from None

    return build_network(nodes, links, capacity_factor=capacity_factor)


def save_network(network: Network, path: Union[str, Path], capacity_factor: float = 1.0):
    """도로망을 CSV로 저장 (capacity_factor로 나누어 원래 용량을 기록)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(["#nodes"])
        writer.writerow(NODE_HEADER)
        for node_id in sorted(network.nodes):
            node = network.node(node_id)
            writer.writerow([node.id, node.x, node.y])
        writer.writerow(["#links"])
        writer.writerow(LINK_HEADER)
        for link_id in network.link_ids():
            link = network.link(link_id)
            writer.writerow([
                link.id, link.from_node, link.to_node, link.length, link.free_speed,
                link.flow_capacity / capacity_factor, link.lanes,
            ])


def effective_flow_capacity(link: Link, s: float, c: float = AV_CAPACITY_PARAMETER) -> float:
    """AV 비율 s에 따른 유효 유량 용량 (veh/h): flow_capacity / (1 - s + s·c)"""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"AV 비율은 0~1 범위여야 합니다: {s}")
    if not 0.0 < c <= 1.0:
        raise ValueError(f"용량 파라미터는 (0, 1] 범위여야 합니다: {c}")
    return link.flow_capacity / (1.0 - s + s * c)


def average_speed(obs: FlowObservation, link: Link) -> float:
    """평균 속도 u = q/k (m/s), 빈 링크는 자유 속도

    5분 구간 경계에서 생기는 q/k 과대 추정은 자유 속도로 자른다.
    """
    if obs.density < 0 or obs.outflow < 0:
        raise ValueError("밀도와 유출량은 음수가 될 수 없습니다")
    if obs.density == 0:
        return link.free_speed
    speed_kmh = obs.outflow / obs.density
    return min(speed_kmh / 3.6, link.free_speed)


def _travel_time_hours(link: Link, speed_ms: float) -> float:
    return link.length / max(speed_ms, MIN_SPEED_MS) / SECONDS_PER_HOUR


def link_delay(obs_t: FlowObservation, obs_next: FlowObservation, link: Link) -> float:
    """연속 두 구간 사이의 누적 지연 (veh·h), 속도가 줄지 않으면 0"""
    if obs_t.link_id != obs_next.link_id or obs_t.link_id != link.id:
        raise ValueError(f"서로 다른 링크의 관측값입니다: {obs_t.link_id}, {obs_next.link_id}")
    u_t = average_speed(obs_t, link)
    u_next = average_speed(obs_next, link)
    if u_next >= u_t:
        return 0.0
    delay = (_travel_time_hours(link, u_next) - _travel_time_hours(link, u_t)) * obs_next.users
    return max(0.0, delay)


def additional_users(obs_t: FlowObservation, obs_next: FlowObservation, link: Optional[Link] = None) -> float:
    """추가 이용자 수 Δn = (q_t - q_{t+Δt})·Δt, 유출량과 속도가 모두 감소할 때만"""
    if obs_next.outflow >= obs_t.outflow:
        return 0.0
    if link is not None:
        slower = average_speed(obs_next, link) < average_speed(obs_t, link)
    else:
        slower = _raw_speed(obs_next) < _raw_speed(obs_t)
    if not slower:
        return 0.0
    return (obs_t.outflow - obs_next.outflow) * obs_t.duration_hours


def _raw_speed(obs: FlowObservation) -> float:
    return math.inf if obs.density == 0 else obs.outflow / obs.density
