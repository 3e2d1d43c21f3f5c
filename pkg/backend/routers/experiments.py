"""
Experiments Router
==================
몬테카를로 추정, 공 밀도 프로파일, 얇은 기저, 거듭곱 덮기 API
"""

import logging
from fractions import Fraction

from fastapi import APIRouter, HTTPException, Query

from core.cayley import ball, ball_universe, density_profile, parse_model_spec
from core.errors import EnergyLabError, SpecError
from core.experiments import power_cover, thin_basis_demo
from core.group_core import Subset
from core.sampler import FiniteUniverse, SamplingConfig, Statistic, mc_expected
from models.schemas import McEstimateRequest, PowerCoverRequest, SuccessResponse, jsonable
from routers.groups import get_cache


router = APIRouter()
logger = logging.getLogger(__name__)


def _raise(e: Exception, what: str):
    if isinstance(e, EnergyLabError):
        logger.warning(f"⚠️ {what} rejected: {e}")
        raise HTTPException(status_code=e.http_status, detail=str(e))
    logger.error(f"Failed to run {what}: {e}")
    raise HTTPException(status_code=500, detail=str(e))


@router.post("/mc-estimate", response_model=SuccessResponse)
def mc_estimate(request: McEstimateRequest):
    """
    시드 고정 몬테카를로 추정

    Args:
        request: group 또는 model + radius, k, statistic, trials, seed
    """
    try:
        statistic = Statistic(request.statistic)
        if statistic == Statistic.ENERGY_ACTION:
            raise SpecError("ENERGY_ACTION is available from the CLI only")
        if (request.group is None) == (request.model is None):
            raise SpecError("give exactly one of group or model")
        if request.group is not None:
            G, _ = get_cache().get(request.group)
            universe = FiniteUniverse(G)
        else:
            if request.radius is None:
                raise SpecError("model requests need a radius")
            universe = ball_universe(ball(parse_model_spec(request.model), request.radius))
        config = SamplingConfig(
            seed=request.seed,
            trials=request.trials,
            k=request.k,
            statistic=statistic,
            threshold=Fraction(request.threshold) if request.threshold else None,
            custom=request.custom,
        )
        estimate = mc_expected(universe, config)
        return SuccessResponse(success=True, message="Estimate computed",
                               data=jsonable({"universe": universe.name, **estimate.to_dict()}))
    except ValueError as e:
        if not isinstance(e, EnergyLabError):
            raise HTTPException(status_code=400, detail=str(e))
        _raise(e, "mc-estimate")
    except Exception as e:
        _raise(e, "mc-estimate")


@router.get("/ball-densities", response_model=SuccessResponse)
def ball_densities(model: str = Query(...), n_max: int = Query(..., ge=0, le=30), seed: int = Query(0, ge=0)):
    """
    반경별 |B_n|, cp_n, sq_n, ι_n
    """
    try:
        profile = density_profile(parse_model_spec(model), n_max, seed=seed)
        return SuccessResponse(success=True, message=f"Density profile of {profile.model}",
                               data=jsonable({"model": profile.model, "seed": seed, "rows": profile.to_records()}))
    except Exception as e:
        _raise(e, "ball-densities")


@router.get("/thin-basis", response_model=SuccessResponse)
def thin_basis(n: int = Query(..., ge=0, le=10 ** 7)):
    """
    제곱수 집합과 그 합집합의 밀도
    """
    try:
        return SuccessResponse(success=True, message="Thin basis densities", data=jsonable(thin_basis_demo(n).to_dict()))
    except Exception as e:
        _raise(e, "thin-basis")


@router.post("/power-cover", response_model=SuccessResponse)
def cover(request: PowerCoverRequest):
    """
    A, A*², ..., A*^m 크기 프로파일
    """
    try:
        G, _ = get_cache().get(request.group)
        profile = power_cover(G, Subset.of(G.order, request.a), request.m)
        return SuccessResponse(success=True, message="Power cover computed", data=jsonable(profile.to_dict()))
    except Exception as e:
        _raise(e, "power-cover")
