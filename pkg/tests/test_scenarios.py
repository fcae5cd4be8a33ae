"""
Tests for scenario sweeps, rendered outputs and the command-line runner.
"""
import pytest
import pandas as pd
import plotly.graph_objects as go
import yaml
from pathlib import Path
from pydantic import ValidationError

from src.core.config_loader import RunSection, ScenarioConfig, ScenarioLoader
from src.core.exceptions import TraceCoverageError
from src.comm.use_case import UseCaseConfig
from src.pool import Marker, min_lead_time
from src.qkd import KeyGenTrace, campaign_trace, write_trace
from src.scenarios import (
    ERROR_MARK,
    LEAD_COLUMNS,
    NONVIABLE_MARK,
    OUTLASTS_MARK,
    UPTIME_COLUMNS,
    fail_sweep,
    lead_sweep,
    live_receive,
    live_run,
    main,
    model_sweep,
    pivot,
    pool_sweep,
    write_figure,
    write_tables,
)
from src.scenarios import render

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "configs" / "scenarios"


def scenario(**sections) -> ScenarioConfig:
    return ScenarioConfig(**sections)


@pytest.fixture
def no_static_export(monkeypatch):
    """Force the HTML fallback so tests never start a browser process."""
    def refuse(self, *args, **kwargs):
        raise ValueError("static export disabled in tests")

    monkeypatch.setattr(go.Figure, "write_image", refuse)


class TestModelSweep:
    """Channel curves and demand tables."""

    def test_calibration_point(self):
        config = scenario(sweep={"distances_km": [54]})
        tables = model_sweep(config)
        channel = tables["channel"]
        assert list(channel["length_km"]) == [54.0]
        assert channel["skr_bps"].iloc[0] == pytest.approx(320_000.0, rel=1e-6)
        assert 0.0 < channel["qber"].iloc[0] < 0.11

    def test_reusability(self):
        config = scenario(sweep={
            "distances_km": [54],
            "n_signals": [68],
            "sampling_rates_hz": [1],
            "algorithms": ["OTP", "AES256"],
        })
        reuse = model_sweep(config)["reusability"].set_index("algorithm")
        assert reuse.loc["OTP", "key_bits"] == 2176
        assert reuse.loc["AES256", "key_bits"] == 384
        assert reuse.loc["AES256", "reusability"] == pytest.approx(384 / 2176)

    def test_feasibility_marks_infeasible_use_case(self):
        config = scenario(sweep={
            "distances_km": [50, 82],
            "n_signals": [2000],
            "sampling_rates_hz": [10],
        })
        feasibility = model_sweep(config)["feasibility"]
        assert list(feasibility["max_length_km"]) == [NONVIABLE_MARK]


class TestLeadSweep:
    """Lead-time tables over a grid."""

    def test_single_cell(self):
        config = scenario(sweep={"distances_km": [54], "n_signals": [68], "sampling_rates_hz": [1]})
        table = lead_sweep(config, seed=0)["lead_times"]
        assert list(table.columns) == LEAD_COLUMNS
        assert len(table) == 1
        assert abs(float(table["lead_min"].iloc[0]) - 2) <= 2

    def test_high_rate_large_set_is_nonviable(self):
        """2000 signals at 10 Hz outrun the key rate at every distance."""
        config = scenario(sweep={"distances_km": [82, 135], "n_signals": [2000], "sampling_rates_hz": [10]})
        result = lead_sweep(config, seed=0)
        assert list(result["lead_times"]["lead_min"]) == [NONVIABLE_MARK, NONVIABLE_MARK]
        column = "OTP N=2000 10 Hz"
        assert list(result["lead_pivot"][column]) == [NONVIABLE_MARK, NONVIABLE_MARK]

    def test_cells_agree_with_lead_time_search(self):
        config = scenario(sweep={"distances_km": [90, 140], "n_signals": [68, 2000], "sampling_rates_hz": [1]})
        table = lead_sweep(config, seed=0)["lead_times"]
        for row in table.itertuples():
            trace = campaign_trace(row.length_km, 54_000.0, seed=0)
            lead = min_lead_time(trace, UseCaseConfig(n_signals=row.n_signals))
            if lead is Marker.NONVIABLE:
                assert row.lead_min == NONVIABLE_MARK
            else:
                assert float(row.lead_min) == pytest.approx(lead / 60)

    def test_pivot_layout(self):
        config = scenario(sweep={"distances_km": [50, 54], "n_signals": [68, 2000], "sampling_rates_hz": [1]})
        wide = lead_sweep(config, seed=0)["lead_pivot"]
        assert list(wide.columns) == ["length_km", "OTP N=68 1 Hz", "OTP N=2000 1 Hz"]
        assert list(wide["length_km"]) == [50.0, 54.0]

    def test_bundled_tables_cover_aes(self):
        """The bundled lead study lists AES-256 next to OTP; AES never needs the longer lead."""
        bundled = ScenarioLoader().load_config(str(SCENARIO_DIR / "lead_tables.yml"))
        assert [a.value for a in bundled.sweep.algorithms] == ["OTP", "AES256"]
        config = scenario(sweep={"distances_km": [90], "n_signals": [68], "sampling_rates_hz": [1],
                                 "algorithms": ["OTP", "AES256"]})
        wide = lead_sweep(config, seed=0)["lead_pivot"]
        assert list(wide.columns) == ["length_km", "OTP N=68 1 Hz", "AES256 N=68 1 Hz"]
        otp, aes = wide["OTP N=68 1 Hz"].iloc[0], wide["AES256 N=68 1 Hz"].iloc[0]
        assert aes != NONVIABLE_MARK
        if otp != NONVIABLE_MARK:
            assert float(aes) <= float(otp)

    def test_short_trace_marks_error_and_continues(self, tmp_path):
        trace = KeyGenTrace.from_completions([100.0, 200.0], [320_000.0, 320_000.0])
        write_trace(trace, tmp_path / "short.csv")
        config = scenario(
            channel={"trace_files": {50: str(tmp_path / "short.csv")}},
            sweep={"distances_km": [50, 54], "n_signals": [68], "sampling_rates_hz": [1]},
        )
        table = lead_sweep(config, seed=0)["lead_times"]
        assert table["lead_min"].iloc[0] == ERROR_MARK
        assert table["lead_min"].iloc[1] not in (ERROR_MARK, NONVIABLE_MARK)

    def test_same_seed_same_csv(self, tmp_path):
        config = scenario(sweep={"distances_km": [54, 90], "n_signals": [68], "sampling_rates_hz": [1]})
        first = write_tables(lead_sweep(config, seed=7), tmp_path / "a")
        second = write_tables(lead_sweep(config, seed=7), tmp_path / "b")
        for a, b in zip(first, second):
            assert a.read_bytes() == b.read_bytes()


class TestFailSweep:
    """Post-failure uptime tables."""

    @pytest.fixture
    def short_link(self):
        return scenario(
            sweep={"distances_km": [50], "n_signals": [68], "sampling_rates_hz": [1]},
            failure={"fail_offsets_s": [3600], "switch_target": "AES256"},
        )

    def test_columns_and_uptime(self, short_link):
        result = fail_sweep(short_link, seed=0)
        table = result["uptimes"]
        assert list(table.columns) == UPTIME_COLUMNS
        row = table.iloc[0]
        assert row["fail_offset_h"] == 1.0
        assert float(row["uptime_h"]) == pytest.approx(149.1311, rel=0.2)
        assert row["switch_to"] == "AES256"
        assert float(row["uptime_switch_h"]) > float(row["uptime_h"])
        assert row["autonomy_ok"] == "True"

    def test_switch_table(self, short_link):
        switch = fail_sweep(short_link, seed=0)["switch"]
        assert list(switch["algorithm"]) == ["OTP"]
        assert list(switch["switch_to"]) == ["AES256"]

    def test_uptime_beyond_horizon_is_marked(self):
        config = scenario(
            sweep={"distances_km": [50], "n_signals": [68], "sampling_rates_hz": [1]},
            failure={"fail_offsets_s": [3600], "switch_target": "AES256", "horizon_s": 24 * 3600},
        )
        table = fail_sweep(config, seed=0)["uptimes"]
        assert table.iloc[0]["uptime_h"] == OUTLASTS_MARK
        assert table.iloc[0]["uptime_switch_h"] == OUTLASTS_MARK
        assert render.uptime_figure(table) is None

    def test_nonviable_rows_carry_markers(self):
        config = scenario(sweep={"distances_km": [140], "n_signals": [68], "sampling_rates_hz": [1]})
        row = fail_sweep(config, seed=0)["uptimes"].iloc[0]
        assert row["lead_min"] == NONVIABLE_MARK
        assert row["uptime_h"] == NONVIABLE_MARK
        assert row["uptime_switch_h"] == NONVIABLE_MARK

    def test_empty_pivot(self):
        empty = pd.DataFrame(columns=UPTIME_COLUMNS)
        assert list(pivot(empty, "uptime_h", extra=["fail_offset_h"]).columns) == ["length_km", "fail_offset_h"]


class TestPoolSweep:
    """Single pool timeline."""

    @pytest.fixture
    def result(self):
        config = ScenarioLoader().load_config(str(SCENARIO_DIR / "pool_timeline.yml"))
        return pool_sweep(config, seed=0)

    def test_summary(self, result):
        summary = result.summary
        assert summary["length_km"] == 82.0
        assert summary["fail_s"] == pytest.approx(result.lead_s + 3600)
        assert summary["exhaust_s"] is not None
        assert summary["exhaust_s"] > summary["fail_s"]
        assert summary["final_bits"] <= 0

    def test_figure_markers(self, result):
        fig = render.pool_figure(result)
        assert len(fig.layout.shapes) == 3
        assert {a.text for a in fig.layout.annotations} == {"lead", "failure", "exhausted"}

    def test_no_viable_lead(self):
        config = scenario(
            use_case={"n_signals": 2000, "sampling_rate_hz": 10, "reporting_rate_hz": 10},
            pool={"length_km": 82},
        )
        with pytest.raises(TraceCoverageError, match="no viable lead"):
            pool_sweep(config, seed=0)

    def test_fixed_lead(self):
        config = scenario(pool={"length_km": 54, "lead_s": 600, "fail_after_lead_s": None, "horizon_s": 3600})
        result = pool_sweep(config, seed=0)
        assert result.lead_s == 600
        assert result.fail_s is None
        assert result.uptime_s is None
        assert result.summary["exhaust_s"] is None


class TestLiveRun:
    """In-process harness runs from a scenario."""

    def test_provisioned_run(self):
        config = scenario(use_case={"n_signals": 68, "algorithm": "AES256"}, run={"cycles": 5})
        report = live_run(config)
        assert report.cycles_completed == 5
        assert report.violations == []

    def test_trace_fed_run(self):
        config = scenario(
            use_case={"algorithm": "AES256"},
            run={"cycles": 20, "length_km": 54, "initial_bits": 10_000},
        )
        report = live_run(config, seed=1)
        assert report.cycles_completed == 20
        assert len(set(report.key_ids)) == len(report.key_ids)

    def test_split_terminal_needs_endpoints(self):
        with pytest.raises(ValidationError, match="kms_url_a"):
            RunSection(role="sender", link_port=9000)
        with pytest.raises(ValidationError, match="kms_url_b"):
            RunSection(role="receiver", link_port=9000)
        with pytest.raises(ValidationError, match="link_port"):
            RunSection(role="receiver", kms_url_b="http://kms-b:8101")
        with pytest.raises(ValidationError, match="role"):
            RunSection(role="relay")

    def test_receiver_role_is_not_a_loop(self):
        config = scenario(run={"role": "receiver", "link_port": 9000, "kms_url_b": "http://kms-b:8101"})
        with pytest.raises(ValueError, match="live_receive"):
            live_run(config)
        with pytest.raises(ValueError, match="'receiver'"):
            live_receive(scenario())


class TestRender:
    """CSV and figure outputs."""

    def test_empty_table_writes_header(self, tmp_path):
        written = write_tables({"lead_times": pd.DataFrame(columns=LEAD_COLUMNS)}, tmp_path)
        assert written[0].read_text() == ",".join(LEAD_COLUMNS) + "\n"
        assert render.lead_figure(pd.DataFrame(columns=LEAD_COLUMNS)) is None

    def test_render_skips_empty_figures(self, tmp_path):
        written = render.render_outputs(
            {"lead_times": pd.DataFrame(columns=LEAD_COLUMNS)}, tmp_path, {"lead_times": None}
        )
        assert [p.name for p in written] == ["lead_times.csv"]

    def test_html_fallback(self, tmp_path, no_static_export):
        fig = go.Figure(go.Scatter(x=[0, 1], y=[1, 2]))
        path = write_figure(fig, tmp_path, "curve")
        assert path == tmp_path / "curve.html"
        assert path.exists()

    def test_float_format(self, tmp_path):
        written = write_tables({"t": pd.DataFrame({"x": [1 / 3]})}, tmp_path)
        assert written[0].read_text() == "x\n0.333333\n"


class TestCommandLine:
    """Subcommands end to end."""

    def write_config(self, tmp_path, **sections):
        path = tmp_path / "scenario.yml"
        path.write_text(yaml.dump(sections))
        return str(path)

    def test_lead(self, tmp_path, no_static_export):
        config = self.write_config(
            tmp_path, sweep={"distances_km": [54], "n_signals": [68], "sampling_rates_hz": [1]}
        )
        out = tmp_path / "out"
        assert main(["lead", "--config", config, "--out", str(out)]) == 0
        assert (out / "lead" / "lead_times.csv").exists()
        assert (out / "lead" / "lead_pivot.csv").exists()
        assert (out / "lead" / "lead_times.html").exists()

    def test_model_defaults(self, tmp_path, no_static_export):
        out = tmp_path / "out"
        assert main(["model", "--out", str(out)]) == 0
        channel = pd.read_csv(out / "model" / "channel.csv")
        assert list(channel["length_km"]) == [50, 54, 82, 90, 135, 140]

    def test_run(self, tmp_path, no_static_export):
        config = self.write_config(tmp_path, use_case={"algorithm": "ASCON128"})
        out = tmp_path / "out"
        assert main(["run", "--config", config, "--cycles", "4", "--out", str(out)]) == 0
        cycles = pd.read_csv(out / "run" / "run_cycles.csv")
        assert list(cycles["cycle"]) == [1, 2, 3, 4]

    def test_missing_config(self, tmp_path):
        assert main(["lead", "--config", str(tmp_path / "absent.yml"), "--out", str(tmp_path)]) == 1

    def test_invalid_config(self, tmp_path):
        config = self.write_config(tmp_path, sweep={"distances_km": [90, 50]})
        assert main(["fail", "--config", config, "--out", str(tmp_path)]) == 1
