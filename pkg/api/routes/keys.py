"""
ETSI 014-style key delivery routes
"""
from fastapi import APIRouter, Depends, HTTPException, Request

from src.core.exceptions import KmsError
from ..models.kms_models import KeyContainer, KeyIdsRequest, KeyRequest, StatusResponse
from ..services.kms_service import KmsService

router = APIRouter()


def get_kms_service(request: Request) -> KmsService:
    """Dependency to get the key management service"""
    return KmsService(request.app.app_state, request.app.app_state["config"])


@router.post("/{sae_id}/enc_keys", response_model=KeyContainer)
def get_enc_keys(
    sae_id: str,
    request: KeyRequest,
    kms_service: KmsService = Depends(get_kms_service)
):
    """Serve fresh keys and mirror them to the peer server"""
    try:
        return kms_service.enc_keys(sae_id, request)
    except (HTTPException, KmsError):
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to serve keys: {str(e)}")


@router.post("/{sae_id}/dec_keys", response_model=KeyContainer)
def get_dec_keys(
    sae_id: str,
    request: KeyIdsRequest,
    kms_service: KmsService = Depends(get_kms_service)
):
    """Deliver previously served keys by ID"""
    try:
        return kms_service.dec_keys(sae_id, request)
    except (HTTPException, KmsError):
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to deliver keys: {str(e)}")


@router.get("/{sae_id}/status", response_model=StatusResponse)
def get_status(
    sae_id: str,
    kms_service: KmsService = Depends(get_kms_service)
):
    """Pool status"""
    try:
        return kms_service.status(sae_id)
    except (HTTPException, KmsError):
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to get status: {str(e)}")
