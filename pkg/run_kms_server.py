#!/usr/bin/env python3
"""
Launch script for one key-management server of the A/B pair
"""
import os
import logging
import sys

def check_dependencies():
    """Check if required dependencies are available."""
    try:
        import fastapi
        import uvicorn
        import httpx
        return True
    except ImportError:
        return False

def main():
    """Main function to launch a key-management server."""
    role = os.getenv("KMS_ROLE", "A")
    print(f"🚀 Starting key management server {role}...")

    if not check_dependencies():
        print("❌ Required dependencies not found.")
        print("🔧 Please install dependencies: pip install -r requirements.txt")
        return

    if not os.getenv("KMS_HOST"):
        os.environ["KMS_HOST"] = "0.0.0.0"
    if not os.getenv("KMS_PORT"):
        os.environ["KMS_PORT"] = "8100" if role == "A" else "8101"

    log_level = os.getenv("LOG_LEVEL", "INFO")
    peer = os.getenv("KMS_PEER_URL")

    print(f"✅ Starting server {role} on {os.getenv('KMS_HOST')}:{os.getenv('KMS_PORT')}")
    print(f"📚 API documentation will be available at http://localhost:{os.getenv('KMS_PORT')}/docs")
    print(f"🔗 Peer: {peer or 'none (role B waits for pushes)'}")
    if os.getenv("KMS_DATA_DIR"):
        print(f"💾 Ledger directory: {os.getenv('KMS_DATA_DIR')}")
    print(f"🔧 Log level: {log_level}")

    try:
        import uvicorn

        from api.config import KmsConfig
        from api.server import create_app

        config = KmsConfig()
        logging.basicConfig(
            level=config.log_level.upper(),
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        uvicorn.run(
            create_app(config),
            host=config.host,
            port=config.port,
            log_level=log_level.lower(),
        )
    except KeyboardInterrupt:
        print("\n👋 Key management server stopped by user.")
    except Exception as e:
        print(f"❌ Error starting key management server: {e}")
        sys.exit(1)

if __name__ == "__main__":
    main()
