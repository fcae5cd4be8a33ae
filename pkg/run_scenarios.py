#!/usr/bin/env python3
"""
Run every bundled scenario and collect the tables and figures under outputs/
"""
import sys
from pathlib import Path

from src.scenarios import main as qkdsim

ROOT = Path(__file__).resolve().parent
SCENARIOS = [
    ("model", "channel_model.yml"),
    ("pool", "pool_timeline.yml"),
    ("lead", "lead_tables.yml"),
    ("fail", "failure_tables.yml"),
    ("run", "live_loop.yml"),
]

def main():
    """Run each scenario in turn; stop on the first failure."""
    print("🚀 Running bundled scenarios...")
    extra = sys.argv[1:]
    for command, name in SCENARIOS:
        config = ROOT / "configs" / "scenarios" / name
        print(f"\n📋 {command}: {name}")
        if qkdsim([command, "--config", str(config), *extra]) != 0:
            print(f"❌ Scenario {name} failed")
            return 1
    print("\n🎉 All scenarios completed")
    return 0

if __name__ == "__main__":
    sys.exit(main())
