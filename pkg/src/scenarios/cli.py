"""
Command-line entry point: channel curves, pool timelines, lead-time and
failure sweeps, live harness runs and key-management servers.
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pandas as pd

from ..core.config_loader import RunSection, ScenarioConfig, ScenarioLoader
from ..core.exceptions import QkdSimError
from . import render
from .sweeps import fail_sweep, lead_sweep, live_receive, live_run, model_sweep, pool_sweep

logger = logging.getLogger(__name__)

VERBS = ("model", "pool", "lead", "fail", "run", "kms")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Scenario YAML file (defaults to the calibrated scenario)")
    common.add_argument("--seed", type=int, help="Override run.seed")
    common.add_argument("--out", help="Output directory (overrides QKDSIM_OUTPUT_DIR and run.output_dir)")
    common.add_argument("--log-level", default=os.getenv("LOG_LEVEL", "INFO"), help="Logging level")

    parser = argparse.ArgumentParser(
        prog="qkdsim",
        description="QKD-secured reactor telemetry: key-pool studies and secure link runs",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("model", parents=[common], help="SKR/QBER curves, key reusability and feasibility tables")
    commands.add_parser("pool", parents=[common], help="One key-pool timeline with lead/failure/exhaustion markers")
    commands.add_parser("lead", parents=[common], help="Minimum lead-time sweep")
    commands.add_parser("fail", parents=[common], help="Post-failure uptime sweep with cipher switching")
    run = commands.add_parser("run", parents=[common], help="Live sender/receiver loop against a KMS pair")
    run.add_argument("--cycles", type=int, help="Override run.cycles")
    run.add_argument("--terminal", choices=["both", "sender", "receiver"], help="Override run.role")
    run.add_argument("--link-host", help="Override run.link_host")
    run.add_argument("--link-port", type=int, help="Override run.link_port")
    kms = commands.add_parser("kms", parents=[common], help="Start one key-management server")
    kms.add_argument("--role", choices=["A", "B"], help="Server role (env KMS_ROLE)")
    kms.add_argument("--host", help="Listen address (env KMS_HOST)")
    kms.add_argument("--port", type=int, help="Listen port (env KMS_PORT)")
    kms.add_argument("--peer-url", help="Base URL of the other server (env KMS_PEER_URL)")
    kms.add_argument("--data-dir", help="Ledger directory (env KMS_DATA_DIR)")
    return parser


def load_scenario(path: Optional[str]) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    return ScenarioLoader().load_config(path)


def _pool(config: ScenarioConfig, seed: int) -> Tuple[Dict[str, pd.DataFrame], Dict]:
    result = pool_sweep(config, seed)
    tables = {"pool_timeline": result.timeline.to_frame(), "pool_summary": pd.DataFrame([result.summary])}
    return tables, {"pool_timeline": render.pool_figure(result)}


def _model(config: ScenarioConfig, seed: int):
    tables = model_sweep(config)
    return tables, {"skr_qber": render.channel_figure(tables["channel"])}


def _lead(config: ScenarioConfig, seed: int):
    tables = lead_sweep(config, seed)
    return tables, {"lead_times": render.lead_figure(tables["lead_times"])}


def _fail(config: ScenarioConfig, seed: int):
    tables = fail_sweep(config, seed)
    return tables, {"uptimes": render.uptime_figure(tables["uptimes"])}


def _run(config: ScenarioConfig, seed: int):
    if config.run.role == "receiver":
        handled = live_receive(config)
        print(f"✅ Receiver terminal handled {handled} frame(s); latency tables are written by the sender")
        return {}, {}
    report = live_run(config, seed)
    violations = pd.DataFrame([(v.cycle, v.reason) for v in report.violations], columns=["cycle", "reason"])
    tables = {
        "run_cycles": report.to_frame(),
        "run_summary": report.summary().reset_index(),
        "run_violations": violations,
    }
    print(f"✅ {report.cycles_completed}/{report.requested_cycles} cycles completed, "
          f"{len(report.violations)} availability violation(s), "
          f"{report.latency_violations} cycle(s) over the deadline")
    return tables, {"run_latency": render.latency_figure(report)}


HANDLERS = {"model": _model, "pool": _pool, "lead": _lead, "fail": _fail, "run": _run}


def start_kms(args: argparse.Namespace):
    import uvicorn

    from api.config import KmsConfig
    from api.server import create_app

    overrides = {
        "role": args.role, "host": args.host, "port": args.port,
        "peer_url": args.peer_url, "data_dir": args.data_dir, "log_level": args.log_level,
    }
    config = KmsConfig(**{key: value for key, value in overrides.items() if value is not None})
    print(f"🔐 Starting key management server {config.role} on http://{config.host}:{config.port}")
    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level=config.log_level.lower())


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    if args.command == "kms":
        start_kms(args)
        return 0

    try:
        config = load_scenario(args.config)
        run_overrides = {
            "cycles": getattr(args, "cycles", None),
            "role": getattr(args, "terminal", None),
            "link_host": getattr(args, "link_host", None),
            "link_port": getattr(args, "link_port", None),
        }
        run_overrides = {key: value for key, value in run_overrides.items() if value is not None}
        if run_overrides:
            run = RunSection(**{**config.run.model_dump(), **run_overrides})
            config = config.model_copy(update={"run": run})
        seed = config.run.seed if args.seed is None else args.seed
        out_dir = config.output_dir(args.out) / args.command
        logger.info(f"Scenario '{config.scenario.name}': {args.command} (seed {seed}) -> {out_dir}")
        tables, figures = HANDLERS[args.command](config, seed)
        written = render.render_outputs(tables, out_dir, figures)
    except (FileNotFoundError, ValueError, OSError, QkdSimError) as e:
        logger.error(f"{args.command} failed: {str(e)}")
        print(f"❌ {str(e)}", file=sys.stderr)
        return 1

    print(f"📁 {len(written)} file(s) written to {out_dir}")
    for path in written:
        print(f"   - {Path(path).name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
