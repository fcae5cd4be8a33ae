"""
Scenario runner: configuration-driven sweeps, harness runs and rendered outputs.
"""

from .cli import build_parser, main
from .render import render_outputs, write_figure, write_tables
from .sweeps import (
    ERROR_MARK,
    LEAD_COLUMNS,
    NONVIABLE_MARK,
    OUTLASTS_MARK,
    UPTIME_COLUMNS,
    PoolResult,
    cell_config,
    fail_sweep,
    lead_sweep,
    live_receive,
    live_run,
    model_sweep,
    pivot,
    pool_sweep,
)

__all__ = [
    'ERROR_MARK',
    'LEAD_COLUMNS',
    'NONVIABLE_MARK',
    'OUTLASTS_MARK',
    'PoolResult',
    'UPTIME_COLUMNS',
    'build_parser',
    'cell_config',
    'fail_sweep',
    'lead_sweep',
    'live_receive',
    'live_run',
    'main',
    'model_sweep',
    'pivot',
    'pool_sweep',
    'render_outputs',
    'write_figure',
    'write_tables',
]
