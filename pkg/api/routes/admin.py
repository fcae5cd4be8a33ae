"""
Admin routes: pool credits, failure injection and ledger inspection
"""
from fastapi import APIRouter, Depends, HTTPException

from src.core.exceptions import KmsError
from ..models.kms_models import AckResponse, CreditRequest, LedgerResponse
from ..services.kms_service import KmsService
from .keys import get_kms_service

router = APIRouter()


@router.post("/credit", response_model=AckResponse)
def credit_pool(
    request: CreditRequest,
    kms_service: KmsService = Depends(get_kms_service)
):
    """Add distilled key to the pool"""
    try:
        return kms_service.credit(request)
    except (HTTPException, KmsError):
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to credit pool: {str(e)}")


@router.post("/failure", response_model=AckResponse)
def inject_failure(kms_service: KmsService = Depends(get_kms_service)):
    """Stop accepting credits"""
    try:
        return kms_service.inject_failure()
    except (HTTPException, KmsError):
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to inject failure: {str(e)}")


@router.post("/restore", response_model=AckResponse)
def restore(kms_service: KmsService = Depends(get_kms_service)):
    """Accept credits again"""
    try:
        return kms_service.restore()
    except (HTTPException, KmsError):
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to restore: {str(e)}")


@router.get("/ledger", response_model=LedgerResponse)
def get_ledger(kms_service: KmsService = Depends(get_kms_service)):
    """Ledger counters and block states"""
    try:
        return kms_service.ledger()
    except (HTTPException, KmsError):
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to read ledger: {str(e)}")
