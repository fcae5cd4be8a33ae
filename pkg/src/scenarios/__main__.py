"""
Entry point for ``python -m src.scenarios``.
"""
import sys

from .cli import main

sys.exit(main())
