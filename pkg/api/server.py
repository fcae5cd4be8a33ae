"""
FastAPI server for one key management server of a QKD pair
Provides ETSI 014-style key delivery plus peer and admin endpoints
"""
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
import uvicorn
from contextlib import asynccontextmanager
import logging
from typing import Any, Dict, Optional

from src.kms import HttpPeerLink, KeyStore
from .routes import keys, peer, admin
from .middleware.error_handler import add_error_handlers
from .config import KmsConfig
from . import __version__

logger = logging.getLogger(__name__)


def build_store(config: KmsConfig) -> KeyStore:
    """Key store for the configured role, linked to the configured peer"""
    link = None
    if config.peer_url:
        link = HttpPeerLink(config.peer_url, timeout=config.request_timeout, retries=config.retry_budget)
    return KeyStore(
        config.role,
        peer=link,
        data_dir=config.data_dir,
        snapshot_interval=config.snapshot_interval,
    )


def create_app(config: Optional[KmsConfig] = None, store: Optional[KeyStore] = None) -> FastAPI:
    """Create a server app; without a store one is built at startup from the config"""
    config = config or KmsConfig()
    app_state: Dict[str, Any] = {
        "config": config,
        "store": store,
    }

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        """Application lifespan management"""
        logger.info(f"Starting key management server {config.role} on {config.host}:{config.port}...")
        if app.app_state["store"] is None:
            app.app_state["store"] = build_store(config)
        yield
        logger.info(f"Shutting down key management server {config.role}...")
        app.app_state["store"].close()

    app = FastAPI(
        title="QKD Key Management Server",
        description="ETSI GS QKD 014-style key delivery backed by a simulated QKD key pool",
        version=__version__,
        docs_url="/docs",
        redoc_url="/redoc",
        lifespan=lifespan
    )
    app.app_state = app_state

    app.add_middleware(
        CORSMiddleware,
        allow_origins=config.cors_origins,
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    add_error_handlers(app)

    app.include_router(keys.router, prefix="/api/v1/keys", tags=["keys"])
    app.include_router(peer.router, prefix="/api/v1/peer", tags=["peer"])
    app.include_router(admin.router, prefix="/api/v1/admin", tags=["admin"])

    @app.get("/")
    async def root():
        """Root endpoint with API information"""
        return {
            "message": "QKD Key Management Server",
            "role": config.role,
            "version": __version__,
            "docs": "/docs",
            "redoc": "/redoc"
        }

    @app.get("/health")
    async def health_check():
        """Health check endpoint"""
        store = app.app_state["store"]
        return {
            "status": "healthy" if store is not None else "starting",
            "version": __version__,
            "role": config.role,
            "available_bits": store.available_bits if store is not None else 0,
            "failed": store.failed if store is not None else False,
        }

    return app


app = create_app()

if __name__ == "__main__":
    settings = KmsConfig()
    logging.basicConfig(level=settings.log_level.upper())
    uvicorn.run(
        "api.server:app",
        host=settings.host,
        port=settings.port,
        log_level=settings.log_level.lower()
    )
