"""내장 도로망 픽스처

병목 회랑(corridor), 4링크 다이아몬드(diamond), 중앙 십자 간선이 있는 10×10 격자(grid).
설정 파일에서는 'fixture:grid'처럼 참조한다.
"""

from typing import Callable, Dict, List

from .errors import ConfigError
from .models import Link, Node
from .network import Network, build_network

FIXTURE_PREFIX = "fixture:"

# 다이아몬드에서 활동이 놓이는 링크
DIAMOND_HOME = "sh"
DIAMOND_WORK = "tw"

# 회랑에서 활동이 놓이는 링크
CORRIDOR_HOME = "r0"
CORRIDOR_WORK = "c3"


def corridor(capacity_factor: float = 1.0, bottleneck_capacity: float = 600.0) -> Network:
    """병목 회랑: n0 → n4 방향 c0..c3 (c2가 병목), 역방향 r3..r0는 여유 용량

    Home은 r0(n0에서 끝남), Work는 c3(n4에서 끝남)에 둔다.
    """
    nodes = [Node(f"n{i}", i * 1000.0, 0.0) for i in range(5)]
    links: List[Link] = []
    for i in range(4):
        capacity = bottleneck_capacity if i == 2 else 2000.0
        links.append(Link(f"c{i}", f"n{i}", f"n{i + 1}", 1000.0, 16.67, capacity, 1))
        links.append(Link(f"r{i}", f"n{i + 1}", f"n{i}", 1000.0, 16.67, 2000.0, 1))
    return build_network(nodes, links, capacity_factor=capacity_factor)


def diamond(capacity_factor: float = 1.0) -> Network:
    """두 갈래 경로 다이아몬드

    H → S 이후 짧은 경로 S-A-T (2 km, 100 s)와 긴 경로 S-B-T (2.4 km, 120 s)가 T에서 만나 W로 간다.
    귀가는 W → T → S → H.
    """
    nodes = [
        Node("H", -500.0, 0.0), Node("S", 0.0, 0.0), Node("A", 1000.0, 500.0),
        Node("B", 1200.0, -700.0), Node("T", 2000.0, 0.0), Node("W", 2500.0, 0.0),
    ]
    links = [
        Link("hs", "H", "S", 500.0, 20.0, 3600.0, 2),
        Link("sa", "S", "A", 1000.0, 20.0, 600.0, 1),
        Link("at", "A", "T", 1000.0, 20.0, 600.0, 1),
        Link("sb", "S", "B", 1200.0, 20.0, 600.0, 1),
        Link("bt", "B", "T", 1200.0, 20.0, 600.0, 1),
        Link("tw", "T", "W", 500.0, 20.0, 3600.0, 2),
        Link("wt", "W", "T", 500.0, 20.0, 3600.0, 2),
        Link("ts", "T", "S", 2500.0, 20.0, 3600.0, 2),
        Link("sh", "S", "H", 500.0, 20.0, 3600.0, 2),
    ]
    return build_network(nodes, links, capacity_factor=capacity_factor)


def grid(capacity_factor: float = 1.0, size: int = 10, spacing: float = 500.0) -> Network:
    """size×size 양방향 격자. 가운데 행과 열은 2차로 고용량 간선"""
    center = size // 2
    nodes = [Node(f"g{i}_{j}", j * spacing, i * spacing) for i in range(size) for j in range(size)]
    links: List[Link] = []

    def add(a, b, arterial: bool):
        speed, capacity, lanes = (22.22, 2400.0, 2) if arterial else (13.89, 900.0, 1)
        for u, v in ((a, b), (b, a)):
            links.append(Link(f"{u}-{v}", u, v, spacing, speed, capacity, lanes))

    for i in range(size):
        for j in range(size):
            if j + 1 < size:
                add(f"g{i}_{j}", f"g{i}_{j + 1}", i == center)
            if i + 1 < size:
                add(f"g{i}_{j}", f"g{i + 1}_{j}", j == center)
    return build_network(nodes, links, capacity_factor=capacity_factor)


FIXTURES: Dict[str, Callable[..., Network]] = {
    "corridor": corridor,
    "diamond": diamond,
    "grid": grid,
}


def is_fixture(reference: str) -> bool:
    return reference.startswith(FIXTURE_PREFIX)


def load_fixture(reference: str, capacity_factor: float = 1.0) -> Network:
    name = reference[len(FIXTURE_PREFIX):] if is_fixture(reference) else reference
    if name not in FIXTURES:
        raise ConfigError(f"알 수 없는 도로망 픽스처: {name} (가능: {', '.join(FIXTURES)})")
    return FIXTURES[name](capacity_factor=capacity_factor)
