"""예외 정의

라이브러리 코드는 예외만 던지고, 종료 코드 변환은 main.py가 담당한다.
"""


class TollSimError(Exception):
    """시뮬레이터 공통 예외"""


class NetworkError(TollSimError, ValueError):
    """도로망 구성 오류 (참조 무결성, 중복 ID, 속성 범위)"""


class PopulationError(TollSimError, ValueError):
    """인구/활동 체인 파일 오류"""


class RoutingError(TollSimError, ValueError):
    """경로 탐색 실패 (도달 불가능한 목적지)"""


class ScoringError(TollSimError, ValueError):
    """효용 계산 입력 오류"""


class PricingError(TollSimError, ValueError):
    """통행료 스킴 설정/계산 오류"""


class ConfigError(TollSimError, ValueError):
    """시나리오 설정 오류 (CLI 종료 코드 2)"""
