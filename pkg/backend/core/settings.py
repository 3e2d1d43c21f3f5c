"""
Lab Settings
============
환경 변수 (.env) 기반 기본 설정

Features:
- python-dotenv 로 .env 로드
- 스레드 수, 각종 상한(cap), 로깅 옵션
- CLI 플래그가 환경 변수보다 우선
"""

import os
from dataclasses import dataclass, asdict, replace
from pathlib import Path
from typing import Any, Dict

from dotenv import load_dotenv


def get_project_root() -> Path:
    """프로젝트 루트 디렉토리 반환 (backend/ 의 상위)"""
    return Path(__file__).resolve().parent.parent.parent


load_dotenv(get_project_root() / ".env")


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    return int(float(raw))


def _env_bool(name: str, default: bool) -> bool:
    raw = os.getenv(name)
    if raw is None:
        return default
    return raw.strip().lower() in ("1", "true", "yes", "on")


@dataclass(frozen=True)
class LabSettings:
    threads: int
    table_cap: int
    enum_cap: int
    brute_cap: int
    ball_cap: int
    pair_cap: int
    pair_samples: int
    action_cap: int
    log_level: str
    log_json: bool

    def with_overrides(self, **overrides: Any) -> "LabSettings":
        """Return a copy with every non-None override applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def get_settings() -> LabSettings:
    """Read settings from the environment (after .env has been loaded)."""
    return LabSettings(
        threads=max(1, _env_int("ENERGY_LAB_THREADS", os.cpu_count() or 1)),
        table_cap=_env_int("ENERGY_LAB_TABLE_CAP", 4096),
        enum_cap=_env_int("ENERGY_LAB_ENUM_CAP", 30_000_000),
        brute_cap=_env_int("ENERGY_LAB_BRUTE_CAP", 10_000_000),
        ball_cap=_env_int("ENERGY_LAB_BALL_CAP", 5_000_000),
        pair_cap=_env_int("ENERGY_LAB_PAIR_CAP", 5000),
        pair_samples=_env_int("ENERGY_LAB_PAIR_SAMPLES", 1_000_000),
        action_cap=_env_int("ENERGY_LAB_ACTION_CAP", 100_000_000),
        log_level=os.getenv("ENERGY_LAB_LOG_LEVEL", "INFO").upper(),
        log_json=_env_bool("ENERGY_LAB_LOG_JSON", False),
    )
