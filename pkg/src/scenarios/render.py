"""
Output rendering: CSV tables and static plotly figures.
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd
import plotly.express as px
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from ..harness.loop import RunReport
from .sweeps import NONVIABLE_MARK, OUTLASTS_MARK, PoolResult

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.6f"


def prepare_output_dir(out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"Output directory {out_dir} is not writable: {e}")
    return out_dir


def write_tables(tables: Dict[str, pd.DataFrame], out_dir: Path, prefix: str = "") -> List[Path]:
    """One CSV per table; empty tables still get their header row."""
    out_dir = prepare_output_dir(out_dir)
    written = []
    for name, table in tables.items():
        path = out_dir / f"{prefix}{name}.csv"
        table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        written.append(path)
        logger.info(f"Wrote {path} ({len(table)} rows)")
    return written


def write_figure(fig: go.Figure, out_dir: Path, name: str) -> Path:
    """PNG through kaleido; HTML when static export is unavailable."""
    out_dir = prepare_output_dir(out_dir)
    png = out_dir / f"{name}.png"
    try:
        fig.write_image(str(png))
        logger.info(f"Wrote {png}")
        return png
    except Exception as e:
        html = out_dir / f"{name}.html"
        fig.write_html(str(html), include_plotlyjs="cdn")
        logger.warning(f"Static image export unavailable ({str(e)}); wrote {html} instead")
        return html


def channel_figure(channel: pd.DataFrame) -> Optional[go.Figure]:
    """Secret key rate and QBER against fiber length."""
    if channel.empty:
        return None
    fig = make_subplots(specs=[[{"secondary_y": True}]])
    fig.add_trace(go.Scatter(x=channel["length_km"], y=channel["skr_bps"], name="SKR (bps)", mode="lines+markers"))
    fig.add_trace(
        go.Scatter(x=channel["length_km"], y=channel["qber"], name="QBER", mode="lines+markers"),
        secondary_y=True,
    )
    fig.update_layout(title="Secret key rate and QBER vs distance", xaxis_title="Fiber length (km)", height=500)
    fig.update_yaxes(title_text="SKR (bps)", type="log", secondary_y=False)
    fig.update_yaxes(title_text="QBER", secondary_y=True)
    return fig


def lead_figure(lead_times: pd.DataFrame) -> Optional[go.Figure]:
    """Minimum lead time curves; non-viable cells are left out of the lines."""
    viable = lead_times[~lead_times["lead_min"].isin([NONVIABLE_MARK, "ERR"])]
    if viable.empty:
        return None
    data = viable.assign(
        lead_min=viable["lead_min"].astype(float),
        use_case="N=" + viable["n_signals"].astype(str) + ", "
        + viable["sampling_rate_hz"].map(lambda r: f"{r:g}") + " Hz, " + viable["algorithm"],
    )
    fig = px.line(data, x="length_km", y="lead_min", color="use_case", markers=True,
                  title="Minimum QKD lead time vs distance",
                  labels={"length_km": "Fiber length (km)", "lead_min": "Lead time (min)"})
    fig.update_layout(height=500)
    return fig


def uptime_figure(uptimes: pd.DataFrame) -> Optional[go.Figure]:
    """Post-failure uptime bars, with the switched cipher next to the original."""
    finite = uptimes[~uptimes["uptime_h"].isin([NONVIABLE_MARK, "ERR", OUTLASTS_MARK])]
    if finite.empty:
        return None
    label = ("N=" + finite["n_signals"].astype(str) + ", "
             + finite["sampling_rate_hz"].map(lambda r: f"{r:g}") + " Hz, +"
             + finite["fail_offset_h"].map(lambda h: f"{h:g}") + " h")
    bars = [finite.assign(case=label, uptime=finite["uptime_h"].astype(float), cipher=finite["algorithm"])]
    switched = finite[~finite["uptime_switch_h"].isin([NONVIABLE_MARK, "ERR", OUTLASTS_MARK])]
    if not switched.empty:
        bars.append(switched.assign(
            case=label.loc[switched.index],
            uptime=switched["uptime_switch_h"].astype(float),
            cipher=switched["algorithm"] + " -> " + switched["switch_to"],
        ))
    data = pd.concat(bars, ignore_index=True)
    fig = px.bar(data, x="length_km", y="uptime", color="cipher", barmode="group", facet_row="case",
                 title="Post-failure uptime", labels={"length_km": "Fiber length (km)", "uptime": "Uptime (h)"})
    fig.update_layout(height=300 + 200 * data["case"].nunique())
    return fig


def pool_figure(result: PoolResult) -> go.Figure:
    """Pool balance over time with lead, failure and exhaustion markers."""
    frame = result.timeline.to_frame()
    hours = frame["t_s"] / 3600.0
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=hours, y=frame["d_bits"], name="Pool (bits)", mode="lines"))
    markers = {"lead": result.lead_s, "failure": result.fail_s, "exhausted": result.summary.get("exhaust_s")}
    for label, seconds in markers.items():
        if seconds is not None:
            fig.add_vline(x=seconds / 3600.0, line_dash="dash", annotation_text=label)
    fig.update_layout(
        title=f"Key pool at {result.length_km:g} km",
        xaxis_title="Time (h)",
        yaxis_title="Available key (bits)",
        height=500,
    )
    return fig


def latency_figure(report: RunReport) -> Optional[go.Figure]:
    frame = report.to_frame()
    if frame.empty:
        return None
    stages = [c for c in frame.columns if c not in ("cycle", "total_ms")]
    fig = px.box(frame.melt(id_vars="cycle", value_vars=stages, var_name="stage", value_name="ms"),
                 x="stage", y="ms", title="Per-stage latency")
    fig.update_layout(height=500)
    return fig


def render_outputs(results: Dict[str, pd.DataFrame], out_dir: Path, figures: Dict[str, Optional[go.Figure]]) -> List[Path]:
    """Write every table, then every figure that has data."""
    written = write_tables(results, out_dir)
    for name, fig in figures.items():
        if fig is not None:
            written.append(write_figure(fig, out_dir, name))
    return written
