"""실행 결과 저장/로드 모듈

실행 디렉토리에 설정, 이벤트 로그, 계획, 점수, 지표, 통행료 스케줄을 남기고 다시 읽는다.
JSON 파일은 덮어쓸 때 .bak 백업을 두고, 읽기 실패 시 백업으로 폴백한다.
"""

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Dict, Union

import pandas as pd

from .events import EventLog
from .network import Network
from .utils import safe_file_write, write_json, read_json

LOG = logging.getLogger(__name__)

RESOLVED_CONFIG = "resolved_config.json"
EVENTS_FILE = "events.jsonl"
PLANS_FILE = "plans.jsonl"
SCORES_FILE = "scores.csv"
HISTORY_FILE = "score_history.csv"
METRICS_FILE = "metrics.json"
SCHEDULE_FILE = "toll_schedule.json"
LINK_SELECTION_FILE = "link_selection.csv"
TRACE_FILE = "convergence_trace.csv"
WELFARE_CSV = "welfare.csv"
WELFARE_TXT = "welfare.txt"
SWEEP_FILE = "sweep.csv"
SWEEP_LAYOUT_FILE = "sweep_table.csv"
METADATA_FILE = "metadata.json"


def make_run_dir(output_root: Union[str, Path], name: str) -> Path:
    """output_root/<name>_<시각> 디렉토리 생성"""
    stamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    run_dir = Path(output_root) / f"{name}_{stamp}"
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def save_state(run_dir: Path, state, network: Network, prefix: str = "") -> Dict[str, Path]:
    """평형 상태 저장 (이벤트, 계획, 점수, 반복 이력, 교통 지표)"""
    from .analytics import traffic_metrics

    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    paths = {name: run_dir / f"{prefix}{name}" for name in
             (EVENTS_FILE, PLANS_FILE, SCORES_FILE, HISTORY_FILE, METRICS_FILE)}

    state.events.save(paths[EVENTS_FILE])
    content = "".join(json.dumps(a.to_dict(), ensure_ascii=False) + "\n" for a in state.agents)
    safe_file_write(paths[PLANS_FILE], content)

    scores = pd.DataFrame(
        sorted(state.executed_scores.items()), columns=["agent_id", "executed_score"]
    )
    scores.to_csv(paths[SCORES_FILE], index=False)
    state.history.to_csv(paths[HISTORY_FILE], index=False)

    metrics = traffic_metrics(state.events, network).to_dict()
    metrics.update({"converged": state.converged, "iterations": state.iterations,
                    "mean_executed_score": state.mean_score()})
    write_json(paths[METRICS_FILE], metrics)
    LOG.info("상태 저장: %s (%s)", run_dir, prefix or "main")
    return paths


def save_metadata(run_dir: Path, converged: bool, seed: int, n_agents: int, **extra) -> bool:
    data = {
        "converged": converged,
        "seed": seed,
        "n_agents": n_agents,
        "created_at": datetime.now().isoformat(timespec="seconds"),
    }
    data.update(extra)
    return write_json(Path(run_dir) / METADATA_FILE, data)


def save_resolved_config(run_dir: Path, config) -> bool:
    return write_json(Path(run_dir) / RESOLVED_CONFIG, config.to_dict())


def save_table(run_dir: Path, name: str, table: pd.DataFrame, index: bool = False) -> Path:
    path = Path(run_dir) / name
    table.to_csv(path, index=index)
    return path


def save_text(run_dir: Path, name: str, text: str) -> bool:
    return safe_file_write(Path(run_dir) / name, text + "\n")



def load_scores(run_dir: Path, prefix: str = "") -> Dict[str, float]:
    path = Path(run_dir) / f"{prefix}{SCORES_FILE}"
    if not path.exists():
        raise FileNotFoundError(f"점수 파일을 찾을 수 없습니다: {path}")
    table = pd.read_csv(path, dtype={"agent_id": str})
    return dict(zip(table["agent_id"], table["executed_score"].astype(float)))


def load_run(run_dir: Union[str, Path], prefix: str = "") -> dict:
    """실행 디렉토리 읽기 (report 명령용)"""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"실행 디렉토리를 찾을 수 없습니다: {run_dir}")
    config = read_json(run_dir / RESOLVED_CONFIG)
    if config is None:
        raise FileNotFoundError(f"{RESOLVED_CONFIG}가 없습니다: {run_dir}")
    return {
        "config": config,
        "metadata": read_json(run_dir / METADATA_FILE) or {},
        "events": EventLog.load(run_dir / f"{prefix}{EVENTS_FILE}"),
        "scores": load_scores(run_dir, prefix),
    }


