"""
Peer synchronization routes between the two servers of a pair
"""
from fastapi import APIRouter, Depends, HTTPException

from src.core.exceptions import KmsError
from ..models.kms_models import AckResponse, PeerBlockResponse, PeerConsumedRequest, PeerForwardRequest
from ..services.kms_service import KmsService
from .keys import get_kms_service

router = APIRouter()


@router.post("/forward", response_model=AckResponse)
def forward_key(
    request: PeerForwardRequest,
    kms_service: KmsService = Depends(get_kms_service)
):
    """Mirror a key block served by the A-side server"""
    try:
        return kms_service.accept_forward(request)
    except (HTTPException, KmsError):
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to mirror key: {str(e)}")


@router.post("/consumed", response_model=AckResponse)
def key_consumed(
    request: PeerConsumedRequest,
    kms_service: KmsService = Depends(get_kms_service)
):
    """Retire a key block the B-side server has delivered"""
    try:
        return kms_service.mark_consumed(request)
    except (HTTPException, KmsError):
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to retire key: {str(e)}")


@router.get("/blocks/{key_id}", response_model=PeerBlockResponse)
def block_state(
    key_id: str,
    kms_service: KmsService = Depends(get_kms_service)
):
    """State of a key block, for a peer settling serves after a restart"""
    try:
        return kms_service.peer_block(key_id)
    except (HTTPException, KmsError):
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to look up key: {str(e)}")
