"""설정 관리 모듈"""

import json
import logging
import os
from dataclasses import dataclass, field, asdict, fields
from pathlib import Path
from typing import Dict, List, Optional

from dotenv import load_dotenv

from .errors import ConfigError
from .pricing import SCHEMES, SCHEME_NONE
from .scoring import DEFAULT_SCORING_PRESETS, ScoringConfig
from .utils import parse_time

LOG = logging.getLogger(__name__)

# 프로젝트 루트의 .env와 config/
PROJECT_ROOT = Path(__file__).parent.parent
ENV_FILE = PROJECT_ROOT / ".env"
CONFIG_DIR = PROJECT_ROOT / "config"
SCORING_PRESETS_FILE = CONFIG_DIR / "scoring_presets.json"

# .env 파일 로드 (없으면 환경변수만 사용)
if ENV_FILE.exists():
    load_dotenv(ENV_FILE)


def load_scoring_presets(path: Optional[Path] = None) -> Dict[str, dict]:
    """효용 프리셋 로드 (없거나 깨졌으면 기본값으로 다시 만든다)"""
    path = Path(path) if path else SCORING_PRESETS_FILE
    if path.exists():
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            LOG.warning("효용 프리셋 파일을 읽지 못해 기본값을 사용합니다: %s", e)
    save_scoring_presets(DEFAULT_SCORING_PRESETS, path)
    return DEFAULT_SCORING_PRESETS


def save_scoring_presets(presets: Dict[str, dict], path: Optional[Path] = None) -> bool:
    """효용 프리셋 저장"""
    path = Path(path) if path else SCORING_PRESETS_FILE
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(presets, f, ensure_ascii=False, indent=2)
        return True
    except OSError as e:
        LOG.error("효용 프리셋 저장 실패: %s", e)
        return False


def get_scoring_config(name: str, path: Optional[Path] = None) -> ScoringConfig:
    presets = load_scoring_presets(path)
    if name not in presets:
        raise ConfigError(f"알 수 없는 효용 프리셋: {name} (가능: {', '.join(presets)})")
    return ScoringConfig.from_dict(name, presets[name])


def load_settings() -> dict:
    """설정 로드 (.env 환경변수에서)"""
    if ENV_FILE.exists():
        load_dotenv(ENV_FILE, override=True)
    return {
        "output_root": os.getenv("TOLLSIM_OUTPUT_ROOT", "runs"),
        "log_level": os.getenv("TOLLSIM_LOG_LEVEL", "INFO"),
    }


def _strict_from_dict(cls, data: dict, section: str):
    """알 수 없는 키를 거부하는 dataclass 생성"""
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: 객체여야 합니다")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{section}: 알 수 없는 설정 키 {sorted(unknown)}")
    return cls(**data)


@dataclass
class FleetConfig:
    """차량 공유 설정. None이면 프리셋 값을 따른다"""
    size: Optional[int] = None
    placement: str = "uniform"
    links: List[str] = field(default_factory=list)
    tariff: Optional[List[float]] = None  # [기본요금, $/mile, $/min]


@dataclass
class SchemeConfig:
    """통행료 체계 설정"""
    kind: str = SCHEME_NONE
    rate: float = 0.1  # facility: $/링크 진입, distance: $/mile
    threshold: float = 0.9
    peaks: List[List[str]] = field(default_factory=lambda: [["07:00", "09:00"], ["17:00", "19:00"]])
    window: List[str] = field(default_factory=lambda: ["07:00", "20:00"])
    cap: float = 0.30
    alpha: float = 0.1
    value_of_time: Optional[float] = None  # None이면 평균 VTTS
    tt_target: float = 5.0
    utility_target: float = 5.0
    max_outer: int = 15
    fares: List[float] = field(default_factory=lambda: [0.1, 0.2, 0.3])

    def peak_seconds(self):
        return tuple((parse_time(s), parse_time(e)) for s, e in self.peaks)

    def window_seconds(self):
        return parse_time(self.window[0]), parse_time(self.window[1])


@dataclass
class ScenarioConfig:
    """시나리오 실행 설정 (config/scenario.example.json 참고)"""
    name: str = "scenario"
    network: str = "fixture:grid"
    population: Optional[str] = None
    preset: str = "base"
    n_agents: int = 500
    seed: int = 1
    scoring_preset: str = "vtts-target"
    mode_cost_rates: Dict[str, float] = field(default_factory=dict)
    capacity_factor: float = 1.0
    beeline_factor: float = 1.3
    memory_capacity: int = 5
    max_iterations: int = 150
    mutation_weights: Dict[str, float] = field(default_factory=lambda: {
        "departure_time": 0.1, "route": 0.1, "mode": 0.1,
    })
    analyzed_links: Optional[List[str]] = None
    literal_welfare: bool = False
    fleet: FleetConfig = field(default_factory=FleetConfig)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        fleet = _strict_from_dict(FleetConfig, data.pop("fleet", {}), "fleet")
        scheme = _strict_from_dict(SchemeConfig, data.pop("scheme", {}), "scheme")
        config = _strict_from_dict(cls, data, "scenario")
        config.fleet = fleet
        config.scheme = scheme
        return config

    @classmethod
    def load(cls, path: Path) -> "ScenarioConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"설정 파일을 찾을 수 없습니다: {path}")
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: JSON 파싱 실패: {e}") from None
        config = cls.from_dict(data)
        config.base_dir = path.parent
        return config

    def resolve_path(self, value: str) -> Path:
        """설정 파일 기준 상대 경로 해석"""
        path = Path(value)
        if path.is_absolute():
            return path
        return Path(getattr(self, "base_dir", Path.cwd())) / path

    def resolved(self) -> "ScenarioConfig":
        """파일 경로를 절대 경로로 바꾼 사본 (재실행용으로 저장)"""
        from .fixtures import is_fixture

        data = self.to_dict()
        if not is_fixture(self.network):
            data["network"] = str(self.resolve_path(self.network).resolve())
        if self.population:
            data["population"] = str(self.resolve_path(self.population).resolve())
        config = ScenarioConfig.from_dict(data)
        config.base_dir = getattr(self, "base_dir", Path.cwd())
        return config

    def validate(self) -> List[str]:
        """설정 검사. 문제 목록을 돌려준다 (비어 있으면 정상)"""
        from .demand import PRESETS, get_preset
        from .fixtures import is_fixture, FIXTURES

        problems = []
        if is_fixture(self.network):
            if self.network.split(":", 1)[1] not in FIXTURES:
                problems.append(f"알 수 없는 도로망 픽스처: {self.network}")
        elif not self.resolve_path(self.network).exists():
            problems.append(f"도로망 파일이 없습니다: {self.network}")
        if self.population and not self.resolve_path(self.population).exists():
            problems.append(f"인구 파일이 없습니다: {self.population}")
        try:
            get_preset(self.preset)
        except ValueError:
            problems.append(f"알 수 없는 프리셋: {self.preset} (가능: {', '.join(PRESETS)})")
        if self.n_agents <= 0:
            problems.append(f"에이전트 수는 양수여야 합니다: {self.n_agents}")
        if self.capacity_factor <= 0:
            problems.append(f"용량 계수는 양수여야 합니다: {self.capacity_factor}")
        if self.max_iterations < 1:
            problems.append("max_iterations는 1 이상이어야 합니다")
        if any(rate < 0 for rate in self.mode_cost_rates.values()):
            problems.append("수단별 거리 비용은 음수가 될 수 없습니다")
        if self.scheme.kind not in SCHEMES:
            problems.append(f"알 수 없는 통행료 체계: {self.scheme.kind}")
        if self.scheme.rate < 0 or self.scheme.cap < 0 or self.scheme.alpha < 0:
            problems.append("통행료 단가, 상한, α는 음수가 될 수 없습니다")
        if any(fare < 0 for fare in self.scheme.fares):
            problems.append("스윕 단가는 음수가 될 수 없습니다")
        if self.fleet.size is not None and self.fleet.size < 0:
            problems.append("차량 수는 음수가 될 수 없습니다")
        if self.fleet.tariff is not None and (len(self.fleet.tariff) != 3 or min(self.fleet.tariff) < 0):
            problems.append("요금표는 [기본요금, $/mile, $/min] 세 개의 음이 아닌 값이어야 합니다")
        try:
            self.scheme.peak_seconds()
            self.scheme.window_seconds()
        except (ValueError, IndexError) as e:
            problems.append(f"시간대 형식 오류: {e}")
        return problems
