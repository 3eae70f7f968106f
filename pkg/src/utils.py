"""유틸리티 함수 모듈"""

import json
import shutil
import zlib
from decimal import Decimal, ROUND_HALF_UP
from pathlib import Path
from typing import Optional, Union

import numpy as np


def parse_time(value: Union[str, float, int, None]) -> Optional[float]:
    """'HH:MM[:SS]' 문자열 또는 초 값을 자정 기준 초로 변환 (24시 이후 허용)"""
    if value is None or value == "":
        return None
    if isinstance(value, (int, float)):
        return float(value)
    parts = str(value).strip().split(":")
    if not 2 <= len(parts) <= 3:
        raise ValueError(f"시각 형식이 올바르지 않습니다: {value}")
    try:
        numbers = [int(p) for p in parts]
    except ValueError:
        raise ValueError(f"시각 형식이 올바르지 않습니다: {value}") from None
    hours, minutes = numbers[0], numbers[1]
    seconds = numbers[2] if len(numbers) == 3 else 0
    return float(hours * 3600 + minutes * 60 + seconds)


def format_time(seconds: Optional[float]) -> str:
    """초 값을 'HH:MM:SS'로 변환"""
    if seconds is None:
        return ""
    total = int(round(seconds))
    return f"{total // 3600:02d}:{(total % 3600) // 60:02d}:{total % 60:02d}"


def make_rng(seed: int, stream: str) -> np.random.Generator:
    """루트 시드와 이름 있는 하위 스트림으로 난수 생성기 생성"""
    return np.random.default_rng([int(seed), zlib.crc32(stream.encode("utf-8"))])


def to_cents(amount: float) -> float:
    """금액을 센트 단위로 반올림 (사사오입)"""
    return float(Decimal(repr(float(amount))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def safe_file_write(path: Path, content: str, backup_path: Optional[Path] = None) -> bool:
    """안전한 파일 쓰기 (백업 지원)"""
    try:
        # 기존 파일이 있으면 백업
        if backup_path and path.exists():
            shutil.copy2(path, backup_path)

        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(content)

        return True
    except OSError:
        # 저장 실패 시 백업에서 복구
        if backup_path and backup_path.exists():
            try:
                shutil.copy2(backup_path, path)
            except OSError:
                pass
        return False


def safe_file_read(path: Path, backup_path: Optional[Path] = None) -> Optional[dict]:
    """안전한 JSON 파일 읽기 (백업 폴백)"""
    # 메인 파일 시도
    if path and path.exists():
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except (OSError, json.JSONDecodeError):
            pass

    # 백업 파일 시도
    if backup_path and backup_path.exists():
        try:
            with open(backup_path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except (OSError, json.JSONDecodeError):
            pass

    return None


def write_json(path: Path, data: dict) -> bool:
    """JSON 저장 (기존 파일은 .bak으로 백업)"""
    path = Path(path)
    content = json.dumps(data, ensure_ascii=False, indent=2)
    return safe_file_write(path, content, path.with_suffix(path.suffix + ".bak"))


def read_json(path: Path) -> Optional[dict]:
    path = Path(path)
    return safe_file_read(path, path.with_suffix(path.suffix + ".bak"))
