"""공용 픽스처: 내장 도로망, 효용 설정, 간단한 계획 생성기"""

import pytest

from src.fixtures import corridor, diamond, grid
from src.models import Activity, Agent, Plan, Trip
from src.scoring import default_scoring


@pytest.fixture
def corridor_net():
    return corridor()


@pytest.fixture
def diamond_net():
    return diamond()


@pytest.fixture(scope="session")
def grid_net():
    return grid()


@pytest.fixture
def scoring():
    return default_scoring("vtts-target")


@pytest.fixture
def literal_scoring():
    return default_scoring("table-literal")


def make_plan(home, work, mode="car", leave=8 * 3600.0, back=17 * 3600.0,
              out_route=None, back_route=None, work_type="Work"):
    """Home → 활동 → Home 계획"""
    return Plan(
        activities=[Activity("Home", home, leave), Activity(work_type, work, back), Activity("Home", home)],
        trips=[Trip(mode, list(out_route or [])), Trip(mode, list(back_route or []))],
    )


def make_agent(agent_id, plan, modes=("car", "pt", "walk_bike"), capacity=5):
    return Agent(agent_id, [plan], tuple(modes), memory_capacity=capacity)
