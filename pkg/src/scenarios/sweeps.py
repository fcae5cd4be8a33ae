"""
Scenario sweeps: channel curves, pool timelines, lead-time and failure tables,
and live harness runs, each returned as pandas tables.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import pandas as pd

from ..comm.use_case import (
    UseCaseConfig,
    data_bits_per_period,
    demand_rate_bps,
    effective_period,
    key_demand_per_period,
    max_feasible_length,
    reusability_factor,
)
from ..core.config_loader import ScenarioConfig
from ..core.exceptions import QkdSimError, TraceCoverageError
from ..crypto.specs import Algorithm
from ..harness.loop import ExhaustionPolicy, RunReport, run_in_process, run_loop, run_sender, serve_receiver
from ..harness.transport import accept, connect
from ..kms.client import KmsClient
from ..pool.failure import RESERVE_FORM, autonomy_condition, post_failure_uptime, uptime_with_switch
from ..pool.lead_time import min_lead_time
from ..pool.timeline import ConsumptionSchedule, Marker, PoolTimeline, simulate_pool, steps_for
from ..qkd.channel import (
    qber_at,
    raw_key_rate,
    secret_fraction,
    secret_key_rate,
    sifted_key_rate,
    transmissivity,
)
from ..qkd.trace import KeyGenTrace

logger = logging.getLogger(__name__)

ERROR_MARK = "ERR"
NONVIABLE_MARK = str(Marker.NONVIABLE)
OUTLASTS_MARK = "> horizon"
HOUR = 3600.0

LEAD_COLUMNS = ["length_km", "n_signals", "sampling_rate_hz", "algorithm", "lead_min"]
UPTIME_COLUMNS = [
    "length_km", "n_signals", "sampling_rate_hz", "algorithm", "fail_offset_h",
    "lead_min", "uptime_h", "switch_to", "uptime_switch_h", "autonomy_ok",
]


@dataclass
class PoolResult:
    """A single pool timeline with its markers."""
    timeline: PoolTimeline
    length_km: float
    lead_s: float
    fail_s: Optional[float]
    uptime_s: Optional[float] = None
    summary: Dict[str, Union[str, float, int, None]] = field(default_factory=dict)


def cell_config(base: UseCaseConfig, n_signals: int, rate_hz: float, algorithm: Algorithm) -> UseCaseConfig:
    """One sweep cell: every sample is reported, so sampling and reporting rates match."""
    return base.model_copy(
        update={
            "n_signals": n_signals,
            "sampling_rate_hz": rate_hz,
            "reporting_rate_hz": rate_hz,
            "algorithm": algorithm,
            "key_reuse_factor": None,
        }
    )


def campaign_duration(config: ScenarioConfig) -> float:
    return config.sweep.cap_s + config.sweep.horizon_s


def _grid(config: ScenarioConfig):
    sweep = config.sweep
    for n_signals in sweep.n_signals:
        for rate in sweep.sampling_rates_hz:
            for algorithm in sweep.algorithms:
                yield n_signals, rate, algorithm


def _minutes(lead: Union[float, Marker]) -> str:
    if lead is Marker.NONVIABLE:
        return NONVIABLE_MARK
    return f"{lead / 60:g}"


def _hours(seconds: float) -> str:
    if math.isinf(seconds):
        return OUTLASTS_MARK
    return f"{seconds / HOUR:.4f}"


def _traces(config: ScenarioConfig, seed: int) -> Dict[float, KeyGenTrace]:
    """One campaign per distance, shared by every cell at that distance."""
    duration = campaign_duration(config)
    return {
        length: config.channel.trace_for(length, duration, seed)
        for length in config.sweep.distances_km
    }


def model_sweep(config: ScenarioConfig) -> Dict[str, pd.DataFrame]:
    """Channel curves, key reusability and the tight-availability boundary."""
    rows = []
    for length in config.sweep.distances_km:
        model = config.channel.model_at(length)
        rows.append({
            "length_km": length,
            "transmissivity": transmissivity(model),
            "raw_bps": raw_key_rate(model),
            "sifted_bps": sifted_key_rate(model),
            "qber": qber_at(model),
            "secret_fraction": secret_fraction(model),
            "skr_bps": secret_key_rate(model),
        })
    channel = pd.DataFrame(rows)

    reuse_rows, feasibility_rows = [], []
    for n_signals, rate, algorithm in _grid(config):
        cfg = cell_config(config.use_case, n_signals, rate, algorithm)
        reuse_rows.append({
            "n_signals": n_signals,
            "sampling_rate_hz": rate,
            "algorithm": algorithm.value,
            "data_bits": data_bits_per_period(cfg),
            "key_bits": key_demand_per_period(cfg),
            "reusability": reusability_factor(cfg),
            "demand_bps": demand_rate_bps(cfg),
        })
        limit = max_feasible_length(cfg, config.sweep.distances_km, config.channel.model_at)
        feasibility_rows.append({
            "n_signals": n_signals,
            "sampling_rate_hz": rate,
            "algorithm": algorithm.value,
            "max_length_km": NONVIABLE_MARK if limit is None else f"{limit:g}",
        })
    logger.info(f"Model sweep over {len(rows)} distances and {len(reuse_rows)} use cases")
    return {
        "channel": channel,
        "reusability": pd.DataFrame(reuse_rows),
        "feasibility": pd.DataFrame(feasibility_rows),
    }


def _lead_cell(trace: KeyGenTrace, cfg: UseCaseConfig, config: ScenarioConfig) -> Union[float, Marker, str]:
    try:
        return min_lead_time(
            trace, cfg,
            horizon_s=config.sweep.horizon_s,
            cap_s=config.sweep.cap_s,
            granularity_s=config.sweep.granularity_s,
        )
    except TraceCoverageError as e:
        logger.warning(f"Lead-time cell N={cfg.n_signals} f_s={cfg.sampling_rate_hz} Hz failed: {str(e)}")
        return ERROR_MARK


def lead_sweep(config: ScenarioConfig, seed: Optional[int] = None) -> Dict[str, pd.DataFrame]:
    """Minimum lead time per (distance, N, f_s, algorithm); long form plus a pivot."""
    seed = config.run.seed if seed is None else seed
    traces = _traces(config, seed)
    rows = []
    for length, trace in traces.items():
        for n_signals, rate, algorithm in _grid(config):
            cfg = cell_config(config.use_case, n_signals, rate, algorithm)
            lead = _lead_cell(trace, cfg, config)
            rows.append({
                "length_km": length,
                "n_signals": n_signals,
                "sampling_rate_hz": rate,
                "algorithm": algorithm.value,
                "lead_min": lead if lead == ERROR_MARK else _minutes(lead),
            })
        logger.info(f"Lead times at {length} km done")
    table = pd.DataFrame(rows, columns=LEAD_COLUMNS)
    return {"lead_times": table, "lead_pivot": pivot(table, "lead_min")}


def fail_sweep(config: ScenarioConfig, seed: Optional[int] = None) -> Dict[str, pd.DataFrame]:
    """Post-failure uptime at each failure offset after the minimum lead, with and without a cipher switch."""
    seed = config.run.seed if seed is None else seed
    failure = config.failure
    traces = _traces(config, seed)
    rows = []
    for length, trace in traces.items():
        for n_signals, rate, algorithm in _grid(config):
            cfg = cell_config(config.use_case, n_signals, rate, algorithm)
            lead = _lead_cell(trace, cfg, config)
            for offset in failure.fail_offsets_s:
                row = {
                    "length_km": length,
                    "n_signals": n_signals,
                    "sampling_rate_hz": rate,
                    "algorithm": algorithm.value,
                    "fail_offset_h": offset / HOUR,
                    "lead_min": lead if lead == ERROR_MARK else _minutes(lead),
                    "uptime_h": NONVIABLE_MARK,
                    "switch_to": failure.switch_target.value if failure.switch_target else "",
                    "uptime_switch_h": NONVIABLE_MARK,
                    "autonomy_ok": NONVIABLE_MARK,
                }
                if lead == ERROR_MARK:
                    row.update(uptime_h=ERROR_MARK, uptime_switch_h=ERROR_MARK, autonomy_ok=ERROR_MARK)
                elif lead is not Marker.NONVIABLE:
                    try:
                        schedule = ConsumptionSchedule.from_use_case(cfg, lead, fail_s=lead + offset)
                        row["uptime_h"] = _hours(post_failure_uptime(trace, schedule, failure.horizon_s))
                        if failure.switch_target is not None:
                            row["uptime_switch_h"] = _hours(
                                uptime_with_switch(trace, schedule, failure.switch_target, cfg, failure.horizon_s)
                            )
                        row["autonomy_ok"] = str(
                            autonomy_condition(trace, schedule, failure.autonomy_target_s, form=RESERVE_FORM)
                        )
                    except QkdSimError as e:
                        logger.warning(f"Uptime cell {length} km N={n_signals} failed: {str(e)}")
                        row.update(uptime_h=ERROR_MARK, uptime_switch_h=ERROR_MARK, autonomy_ok=ERROR_MARK)
                rows.append(row)
        logger.info(f"Uptimes at {length} km done")
    table = pd.DataFrame(rows, columns=UPTIME_COLUMNS)
    switch = table[["length_km", "n_signals", "sampling_rate_hz", "fail_offset_h", "algorithm",
                    "uptime_h", "switch_to", "uptime_switch_h"]]
    return {
        "uptimes": table,
        "uptime_pivot": pivot(table, "uptime_h", extra=["fail_offset_h"]),
        "switch": switch.reset_index(drop=True),
    }


def pivot(table: pd.DataFrame, value: str, extra: Optional[List[str]] = None) -> pd.DataFrame:
    """Wide layout: one row per distance, one column per use case."""
    index = ["length_km"] + (extra or [])
    if table.empty:
        return pd.DataFrame(columns=index)
    labelled = table.assign(
        use_case=table["algorithm"] + " N=" + table["n_signals"].astype(str)
        + " " + table["sampling_rate_hz"].map(lambda r: f"{r:g}") + " Hz"
    )
    order = list(dict.fromkeys(labelled["use_case"]))
    wide = labelled.pivot(index=index, columns="use_case", values=value)
    return wide[order].reset_index().rename_axis(columns=None)


def pool_sweep(config: ScenarioConfig, seed: Optional[int] = None) -> PoolResult:
    """One pool timeline at ``pool.length_km`` for the configured use case."""
    seed = config.run.seed if seed is None else seed
    section = config.pool
    cfg = config.use_case
    duration = max(campaign_duration(config), section.horizon_s)
    trace = config.channel.trace_for(section.length_km, duration, seed)
    lead = section.lead_s
    if lead is None:
        found = _lead_cell(trace, cfg, config)
        if not isinstance(found, float):
            raise TraceCoverageError(
                f"no viable lead time at {section.length_km} km for N={cfg.n_signals}; set pool.lead_s"
            )
        lead = found
    fail_s = None if section.fail_after_lead_s is None else lead + section.fail_after_lead_s
    schedule = ConsumptionSchedule.from_use_case(cfg, lead, fail_s=fail_s).model_copy(
        update={"initial_bits": section.initial_bits}
    )
    horizon = steps_for(section.horizon_s, schedule.step_s)
    timeline = simulate_pool(trace, schedule, horizon)
    uptime = None
    if fail_s is not None:
        uptime = post_failure_uptime(trace, schedule, max(section.horizon_s - fail_s, 0.0))
    result = PoolResult(timeline, section.length_km, lead, fail_s, uptime)
    result.summary = {
        "length_km": section.length_km,
        "lead_s": lead,
        "fail_s": fail_s,
        "exhaust_s": None if timeline.exhaust_step is None else timeline.exhaust_step * schedule.step_s,
        "first_unavailable_s": (
            None if timeline.first_unavailable_step() is None
            else timeline.first_unavailable_step() * schedule.step_s
        ),
        "uptime_h": None if uptime is None else _hours(uptime),
        "final_bits": int(timeline.d_bits[-1]),
    }
    logger.info(f"Pool timeline at {section.length_km} km: lead {lead:.0f} s, summary {result.summary}")
    return result


def live_run(config: ScenarioConfig, seed: Optional[int] = None) -> RunReport:
    """Harness run against remote servers or an in-process pair.

    With ``run.role == "sender"`` only terminal A runs here and connects to a
    receiver terminal started with ``live_receive`` on ``run.link_host``.
    """
    seed = config.run.seed if seed is None else seed
    run = config.run
    cfg = config.use_case
    policy = ExhaustionPolicy(run.policy)
    if run.role == "receiver":
        raise ValueError("a receiver terminal is started with live_receive")
    if run.role == "sender":
        connection = connect(run.link_host, run.link_port)
        return run_sender(cfg, run.cycles, KmsClient(run.kms_url_a), connection, policy=policy, seed=seed)
    if run.kms_url_a is not None:
        return run_loop(cfg, run.cycles, KmsClient(run.kms_url_a), KmsClient(run.kms_url_b), policy=policy, seed=seed)
    trace = None
    if run.length_km is not None:
        duration = (run.cycles + 1) * effective_period(cfg)
        trace = config.channel.trace_for(run.length_km, duration, seed)
    elif run.initial_bits == 0:
        # no generation: provision exactly the run's demand
        run = run.model_copy(update={"initial_bits": run.cycles * key_demand_per_period(cfg)})
    return run_in_process(
        cfg,
        run.cycles,
        trace=trace,
        initial_bits=run.initial_bits,
        failure_at_cycle=run.failure_at_cycle,
        restore_at_cycle=run.restore_at_cycle,
        policy=policy,
        seed=seed,
    )


def live_receive(config: ScenarioConfig) -> int:
    """Receiver terminal of a two-host run; returns the number of frames handled."""
    run = config.run
    if run.role != "receiver":
        raise ValueError(f"live_receive needs run.role 'receiver', got {run.role!r}")
    connection = accept(run.link_host, run.link_port)
    return serve_receiver(config.use_case, KmsClient(run.kms_url_b), connection)
