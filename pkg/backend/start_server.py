#!/usr/bin/env python3
"""
Start the ALGAS2 API under uvicorn with auto-reload for local development.
"""

import os

import uvicorn
from dotenv import load_dotenv


def main():
    """Start the FastAPI server."""
    load_dotenv()
    print("🚀 Starting ALGAS2 API server...")

    uvicorn.run(
        "app.main:app",
        host=os.getenv("ALGAS2_HOST", "0.0.0.0"),
        port=int(os.getenv("ALGAS2_PORT", "8000")),
        reload=True,
        reload_dirs=["app"],
        log_level=os.getenv("ALGAS2_LOG_LEVEL", "info").lower(),
    )


if __name__ == "__main__":
    main()
