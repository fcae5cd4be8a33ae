"""
Key management server configuration
"""
import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator

load_dotenv()


class KmsConfig(BaseModel):
    """Settings of one key management server"""

    # Server settings
    host: str = Field(default_factory=lambda: os.getenv("KMS_HOST", "0.0.0.0"))
    port: int = Field(default_factory=lambda: int(os.getenv("KMS_PORT", "8100")))

    # Pair settings
    role: str = Field(default_factory=lambda: os.getenv("KMS_ROLE", "A"))
    peer_url: Optional[str] = Field(default_factory=lambda: os.getenv("KMS_PEER_URL") or None)
    sae_id: str = Field(default_factory=lambda: os.getenv("KMS_SAE_ID", "telemetry"))

    # Storage settings
    data_dir: Optional[str] = Field(default_factory=lambda: os.getenv("KMS_DATA_DIR") or None)
    snapshot_interval: int = Field(default_factory=lambda: int(os.getenv("KMS_SNAPSHOT_INTERVAL", "1000")), ge=0)

    # Peer requests
    request_timeout: float = Field(default_factory=lambda: float(os.getenv("KMS_REQUEST_TIMEOUT", "10")), gt=0)
    retry_budget: int = Field(default_factory=lambda: int(os.getenv("KMS_RETRY_BUDGET", "3")), ge=0)

    # Key size bounds advertised in the status response
    min_key_size: int = 8
    max_key_size: int = 1_048_576

    # Logging settings
    log_level: str = Field(default_factory=lambda: os.getenv("LOG_LEVEL", "INFO"))

    cors_origins: list = ["*"]

    @field_validator("role")
    @classmethod
    def validate_role(cls, v):
        v = v.upper()
        if v not in ("A", "B"):
            raise ValueError("role must be A or B")
        return v
