"""명령행 진입점

run / sweep / report / validate 하위 명령. 종료 코드: 0 성공(미수렴 포함), 1 내부 오류, 2 사용 오류.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .config import ScenarioConfig, load_settings
from .errors import ConfigError, NetworkError, PopulationError, PricingError, RoutingError, ScoringError

LOG = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2

USAGE_ERRORS = (
    ConfigError, PopulationError, NetworkError, RoutingError, ScoringError, PricingError, FileNotFoundError,
)


def setup_logging(verbose: bool = False, level: Optional[str] = None):
    name = "DEBUG" if verbose else (level or "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def _parse_fares(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"단가 목록 형식 오류: {text}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tollsim",
        description="자율주행 시대 혼잡통행료 에이전트 기반 시뮬레이터",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="디버그 로그 출력")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_options(p):
        p.add_argument("--config", type=Path, help="시나리오 설정 JSON")
        p.add_argument("--preset", help="base | av-oriented | sav-oriented")
        p.add_argument("--scheme", help="none | facility | distance | mcp | traveltime")
        p.add_argument("--network", help="도로망 CSV 또는 fixture:<corridor|diamond|grid>")
        p.add_argument("--population", help="인구 JSONL 파일")
        p.add_argument("--agents", type=int, help="생성할 에이전트 수")
        p.add_argument("--seed", type=int, help="루트 시드")
        p.add_argument("--iterations", type=int, help="최대 재계획 반복 수")
        p.add_argument("--rate", type=float, help="facility/distance 단가")
        p.add_argument("--output", type=Path, help="결과 루트 디렉토리 (기본: TOLLSIM_OUTPUT_ROOT)")

    run = sub.add_parser("run", help="평형 계산과 통행료 적용")
    scenario_options(run)

    sweep = sub.add_parser("sweep", help="facility/distance 단가 격자 스윕")
    scenario_options(sweep)
    sweep.add_argument("--fares", help="쉼표로 구분한 단가 목록 (예: 0.1,0.2,0.3)")
    sweep.add_argument("--workers", type=int, default=1, help="병렬 프로세스 수")

    report = sub.add_parser("report", help="두 실행 디렉토리의 후생 비교")
    report.add_argument("baseline", type=Path)
    report.add_argument("tolled", type=Path)

    validate = sub.add_parser("validate", help="설정 검사")
    validate.add_argument("config", type=Path)
    return parser


def load_config(args) -> ScenarioConfig:
    config = ScenarioConfig.load(args.config) if args.config else ScenarioConfig()
    overrides = {
        "preset": args.preset, "network": args.network, "population": args.population,
        "n_agents": args.agents, "seed": args.seed, "max_iterations": args.iterations,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    if args.scheme is not None:
        config.scheme.kind = args.scheme
    if args.rate is not None:
        config.scheme.rate = args.rate
    return config


def _run_command(args, settings: dict) -> int:
    from .runner import cli_report, cli_run, cli_sweep

    if args.command == "validate":
        config = ScenarioConfig.load(args.config)
        problems = config.validate()
        for problem in problems:
            LOG.error(problem)
        if problems:
            return EXIT_USAGE
        LOG.info("설정이 올바릅니다: %s", args.config)
        return EXIT_OK

    if args.command == "report":
        report = cli_report(args.baseline, args.tolled)
        print(report.to_text())
        return EXIT_OK

    config = load_config(args)
    output_root = args.output or Path(settings["output_root"])
    if args.command == "run":
        run_dir = cli_run(config, output_root)
        print(run_dir)
    else:
        run_dir, table, best = cli_sweep(config, output_root, _parse_fares(args.fares), args.workers)
        print(table.to_string(index=False))
        print(f"최적 단가: {best}" if best is not None else "수렴한 셀이 없습니다")
        print(run_dir)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    settings = load_settings()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    setup_logging(args.verbose, settings["log_level"])

    try:
        return _run_command(args, settings)
    except USAGE_ERRORS as e:
        LOG.error("%s", e)
        return EXIT_USAGE
    except Exception:
        LOG.exception("내부 오류")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
