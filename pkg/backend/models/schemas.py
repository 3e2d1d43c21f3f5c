"""
Pydantic Models for CLI Records and API Request/Response
"""
import json
from datetime import datetime
from fractions import Fraction
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

TOOL_VERSION = "1.0.0"


def jsonable(value: Any) -> Any:
    """Recursively convert results to JSON-ready values; Fractions become "p/q" strings."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, BaseModel):
        return jsonable(value.model_dump())
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def dumps(value: Any) -> str:
    """Canonical JSON text (sorted keys)."""
    return json.dumps(jsonable(value), sort_keys=True, ensure_ascii=False, indent=2)


class RunRecord(BaseModel):
    """CLI 실행 기록 (config 재실행 시 payload 동일)"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    subcommand: str
    config: Dict[str, Any]
    tool_version: str = TOOL_VERSION
    wall_time: float = 0.0
    payload: Any = None

    def to_json(self) -> str:
        return dumps(self)


class ErrorEnvelope(BaseModel):
    """에러 응답 모델"""
    success: bool = False
    error: str
    message: Optional[str] = None
    exit_code: Optional[int] = None
    timestamp: str = Field(default_factory=lambda: datetime.now().isoformat())


class SuccessResponse(BaseModel):
    """일반 성공 응답 모델"""
    success: bool
    message: str
    data: Optional[Dict[str, Any]] = None


class EnergyRequest(BaseModel):
    """에너지 계산 요청"""
    group: str
    a: List[int]
    b: Optional[List[int]] = None
    d: Optional[List[int]] = None
    action: str = "regular"
    variant: str = "AA"
    include_histogram: bool = False

    @field_validator("action")
    @classmethod
    def check_action(cls, value: str) -> str:
        if value not in ("regular", "natural"):
            raise ValueError("action must be 'regular' or 'natural'")
        return value

    @field_validator("variant")
    @classmethod
    def check_variant(cls, value: str) -> str:
        value = value.upper()
        if value not in ("AA", "AAINV"):
            raise ValueError("variant must be AA or AAINV")
        return value


class McEstimateRequest(BaseModel):
    """몬테카를로 추정 요청 (group 또는 model + radius)"""
    group: Optional[str] = None
    model: Optional[str] = None
    radius: Optional[int] = None
    k: int = Field(ge=1)
    statistic: str = "ENERGY_AA"
    trials: int = Field(default=1000, ge=1, le=100_000)
    seed: int = Field(default=0, ge=0)
    threshold: Optional[str] = None
    h: Optional[int] = None
    custom: Optional[str] = None

    @field_validator("radius")
    @classmethod
    def check_radius(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 0:
            raise ValueError("radius must be non-negative")
        return value


class PowerCoverRequest(BaseModel):
    """거듭곱 덮기 요청"""
    group: str
    a: List[int]
    m: int = Field(default=6, ge=1, le=8)
