"""
Groups Router
=============
유한군 정보, 에너지, 기대 에너지 API
"""

import logging

from fastapi import APIRouter, HTTPException, Query

from core.energy import action_energy, inverse_subset, multiplicative_energy, product_set
from core.errors import EnergyLabError
from core.expectation import asymptotic_from_invariants, expected_energy
from core.group_core import Subset, natural_action, regular_action
from core.invariants import Variant
from models.schemas import EnergyRequest, SuccessResponse, jsonable


router = APIRouter()
logger = logging.getLogger(__name__)


def get_cache():
    """GroupCache 인스턴스 가져오기"""
    from main import group_cache
    if group_cache is None:
        raise HTTPException(status_code=500, detail="Group cache not initialized")
    return group_cache


@router.get("/info", response_model=SuccessResponse)
def group_info(group: str = Query(..., description="group spec, e.g. gl2:3")):
    """
    군 불변량 조회

    Returns:
        SuccessResponse: order, κ, ε, ι, cp, sq
    """
    try:
        G, inv = get_cache().get(group)
        return SuccessResponse(
            success=True,
            message=f"Invariants of {G.spec}",
            data=jsonable({"group": G.spec, "is_abelian": G.is_abelian, **inv.to_dict()}),
        )
    except EnergyLabError as e:
        logger.warning(f"⚠️ group-info rejected: {e}")
        raise HTTPException(status_code=e.http_status, detail=str(e))
    except Exception as e:
        logger.error(f"Failed to compute group info: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/energy", response_model=SuccessResponse)
def compute_energy(request: EnergyRequest):
    """
    E(A, B) 또는 E(A, Δ) 계산

    Args:
        request: group, A, (B | Δ + action), variant
    """
    try:
        G, _ = get_cache().get(request.group)
        A = Subset.of(G.order, request.a)
        data = {"group": G.spec}
        if request.d is not None:
            action = natural_action(G) if request.action == "natural" else regular_action(G)
            report = action_energy(A, Subset.of(action.domain_size, request.d), action)
            data["action"] = action.name
        else:
            B = Subset.of(G.order, request.b) if request.b is not None else A
            if request.variant == Variant.AAINV.value:
                B = inverse_subset(B, G)
            report = multiplicative_energy(A, B, G)
            data["variant"] = request.variant
            data["product_set_size"] = len(product_set(A, B, G))
        data.update(report.to_dict(request.include_histogram))
        return SuccessResponse(success=True, message="Energy computed", data=jsonable(data))
    except EnergyLabError as e:
        logger.warning(f"⚠️ energy rejected: {e}")
        raise HTTPException(status_code=e.http_status, detail=str(e))
    except Exception as e:
        logger.error(f"Failed to compute energy: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@router.get("/expectation", response_model=SuccessResponse)
def expectation(group: str = Query(...), k: int = Query(..., ge=1), variant: Variant = Query(Variant.AA)):
    """
    균등 k-부분집합의 정확한 기대 에너지 (BINOMIAL_Q)
    """
    try:
        if variant == Variant.ACTION:
            raise HTTPException(status_code=400, detail="use the CLI for the ACTION variant")
        G, inv = get_cache().get(group)
        result = expected_energy(G, k, variant, invariants=inv)
        data = result.to_dict()
        data["group"] = G.spec
        data["asymptotic_prediction"] = asymptotic_from_invariants(inv, k, variant)
        return SuccessResponse(success=True, message="Expectation computed", data=jsonable(data))
    except HTTPException:
        raise
    except EnergyLabError as e:
        logger.warning(f"⚠️ expectation rejected: {e}")
        raise HTTPException(status_code=e.http_status, detail=str(e))
    except Exception as e:
        logger.error(f"Failed to compute expectation: {e}")
        raise HTTPException(status_code=500, detail=str(e))
