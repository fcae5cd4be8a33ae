"""
Error handling middleware for the API
"""
from fastapi import FastAPI, Request, HTTPException
from fastapi.responses import JSONResponse
from fastapi.encoders import jsonable_encoder
from fastapi.exceptions import RequestValidationError
import logging
import traceback

from src.core.exceptions import KmsError

logger = logging.getLogger(__name__)


def _error_body(request: Request, message, status_code: int) -> dict:
    return {
        "error": True,
        "message": message,
        "status_code": status_code,
        "path": str(request.url)
    }


def add_error_handlers(app: FastAPI):
    """Add error handlers to the FastAPI app"""

    @app.exception_handler(HTTPException)
    async def http_exception_handler(request: Request, exc: HTTPException):
        """Handle HTTP exceptions"""
        return JSONResponse(status_code=exc.status_code, content=_error_body(request, exc.detail, exc.status_code))

    @app.exception_handler(KmsError)
    async def kms_exception_handler(request: Request, exc: KmsError):
        """Map key management errors to their status codes"""
        if exc.status_code >= 500:
            logger.warning(f"{request.method} {request.url.path} refused: {exc}")
        else:
            logger.debug(f"{request.method} {request.url.path} rejected: {exc}")
        content = _error_body(request, str(exc), exc.status_code)
        content["error_code"] = exc.error_code
        return JSONResponse(status_code=exc.status_code, content=content)

    @app.exception_handler(RequestValidationError)
    async def validation_exception_handler(request: Request, exc: RequestValidationError):
        """Handle request validation errors"""
        content = _error_body(request, "Request validation failed", 422)
        content["details"] = jsonable_encoder(exc.errors())
        return JSONResponse(status_code=422, content=content)

    @app.exception_handler(Exception)
    async def general_exception_handler(request: Request, exc: Exception):
        """Handle general exceptions"""
        logger.error(f"Unhandled exception: {exc}")
        logger.error(f"Traceback: {traceback.format_exc()}")
        return JSONResponse(status_code=500, content=_error_body(request, "Internal server error", 500))
