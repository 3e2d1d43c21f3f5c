"""
FastAPI Backend for Energy Lab
==============================
군 곱셈 에너지 계산을 HTTP로 노출하는 백엔드

Features:
- REST API for group invariants, energies and exact expectations
- Seeded Monte Carlo estimates over finite groups and Cayley balls
- Shared cache of built groups and their invariants
"""

import logging
import threading
from contextlib import asynccontextmanager
from datetime import datetime
from typing import Dict, Tuple

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from core.errors import EnergyLabError
from core.group_core import FiniteGroup, build_group
from core.invariants import GroupInvariants, compute_invariants
from core.log_config import setup_logging
from core.settings import LabSettings, get_settings
from models.schemas import TOOL_VERSION, SuccessResponse
from routers import experiments as experiments_router
from routers import groups as groups_router


settings = get_settings()
setup_logging(settings.log_level, settings.log_json)
logger = logging.getLogger(__name__)


class GroupCache:
    """Built groups and their invariants, keyed by canonical spec."""

    def __init__(self, settings: LabSettings):
        self.settings = settings
        self._entries: Dict[str, Tuple[FiniteGroup, GroupInvariants]] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, spec: str) -> Tuple[FiniteGroup, GroupInvariants]:
        G = build_group(spec, table_cap=self.settings.table_cap)
        with self._lock:
            entry = self._entries.get(G.spec)
            if entry is not None:
                self.hits += 1
                return entry
        inv = compute_invariants(G)
        with self._lock:
            self.misses += 1
            self._entries[G.spec] = (G, inv)
        logger.info(f"📊 Cached {G.spec} (|G|={G.order})")
        return G, inv

    def get_status(self) -> Dict:
        with self._lock:
            return {"groups": sorted(self._entries), "hits": self.hits, "misses": self.misses}


# Global cache instance (Singleton)
group_cache: GroupCache = None


@asynccontextmanager
async def lifespan(app: FastAPI):
    """
    애플리케이션 수명 주기 관리
    - 시작 시: GroupCache 생성
    - 종료 시: 캐시 정리
    """
    global group_cache

    logger.info("=" * 60)
    logger.info("🚀 Energy Lab API Starting...")
    logger.info("=" * 60)

    group_cache = GroupCache(settings)
    logger.info(f"✅ Group cache ready (table cap {settings.table_cap})")

    yield

    logger.info("🛑 Shutting down...")
    group_cache = None
    logger.info("✅ Cleanup Complete")


app = FastAPI(
    title="Energy Lab API",
    description="Multiplicative energy of random subsets of groups",
    version=TOOL_VERSION,
    lifespan=lifespan
)


app.add_middleware(
    CORSMiddleware,
    allow_origins=[
        "http://localhost:3000",
        "http://localhost:5173",
        "http://localhost:8080",
    ],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


app.include_router(groups_router.router, prefix="/api/groups", tags=["Groups"])
app.include_router(experiments_router.router, prefix="/api/experiments", tags=["Experiments"])


@app.get("/", response_model=SuccessResponse)
async def root():
    """
    Health Check Endpoint
    """
    return SuccessResponse(
        success=True,
        message="Energy Lab API is running",
        data={
            "version": TOOL_VERSION,
            "status": "healthy",
            "timestamp": datetime.now().isoformat()
        }
    )


@app.get("/api/health")
async def health_check():
    """
    상세 헬스 체크
    """
    try:
        return {
            "status": "healthy",
            "cache": group_cache.get_status(),
            "settings": settings.to_dict(),
            "timestamp": datetime.now().isoformat()
        }
    except Exception as e:
        logger.error(f"Health check failed: {e}")
        raise HTTPException(status_code=500, detail=str(e))


# Exception Handlers
@app.exception_handler(HTTPException)
async def http_exception_handler(request, exc):
    """HTTP 예외 핸들러"""
    return JSONResponse(
        status_code=exc.status_code,
        content={
            "success": False,
            "error": exc.detail,
            "timestamp": datetime.now().isoformat()
        }
    )


@app.exception_handler(EnergyLabError)
async def energy_lab_exception_handler(request, exc):
    """도메인 예외 핸들러"""
    return JSONResponse(
        status_code=exc.http_status,
        content={
            "success": False,
            "error": exc.code,
            "message": str(exc),
            "timestamp": datetime.now().isoformat()
        }
    )


@app.exception_handler(Exception)
async def general_exception_handler(request, exc):
    """일반 예외 핸들러"""
    logger.error(f"Unhandled exception: {exc}", exc_info=True)
    return JSONResponse(
        status_code=500,
        content={
            "success": False,
            "error": "Internal Server Error",
            "detail": str(exc),
            "timestamp": datetime.now().isoformat()
        }
    )


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(
        "main:app",
        host="0.0.0.0",
        port=8000,
        reload=False,
        log_level=settings.log_level.lower()
    )
