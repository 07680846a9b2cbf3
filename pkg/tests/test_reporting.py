"""
Test Suite for reports, the engine commands and the command line
"""

import logging

import pytest
from pathlib import Path

# Adjust import paths for testing
import sys
sys.path.append(str(Path(__file__).parent.parent))

from backend.analytic_model import ControllerMode, GroupTreatment, Partition, PartitionRangeError
from backend.main import BandwidthSentinelEngine, catalog_sets, create_bandwidth_sentinel_engine
from backend.memory_controller import MemoryController, format_trace, parse_trace, run_trace
from backend.model_catalog import BUILTIN_NETWORKS, CatalogError, ConvLayerShape
from backend.reporting import (
    DiscrepancyCell, DominanceViolation, Report, ReportFormat, ReportRow, ReferenceTables,
    check_dominance, discrepancy_frame, parse_rows, relative_error, render_markdown,
    rows_to_frame, savings_frame, savings_range_violations, summarize_discrepancies,
    write_report,
)
from backend.tile_simulator import SimulationSizeError
from frontend.cli import main, parse_macs

REPO_ROOT = Path(__file__).parent.parent
CONFIG_PATH = str(REPO_ROOT / 'config' / 'config.yaml')


@pytest.fixture(scope="module")
def engine():
    return BandwidthSentinelEngine(CONFIG_PATH)


@pytest.fixture
def l1_file(tmp_path):
    path = tmp_path / "l1.csv"
    path.write_text("# single layer\nL1,8,8,3,1,1,8,8\n", encoding="utf-8")
    return str(path)


@pytest.fixture
def sample_rows():
    return [
        ReportRow("net", 512, "max_input", "passive", 4608),
        ReportRow("net", 512, "max_output", "passive", 8192),
        ReportRow("net", 512, "equal_macs", "passive", 5632),
        ReportRow("net", 512, "optimal", "passive", 3584),
    ]


class TestReportRows:

    def test_millions_rounding(self):
        assert ReportRow("n", 512, "optimal", "passive", 25_071_234).total_millions == 25.07
        assert ReportRow("n", 72, "optimal", "passive", 1024).total_millions == 0.0

    def test_csv_header_and_line_endings(self, sample_rows):
        text = Report("t", sample_rows).render(ReportFormat.CSV)
        assert text.splitlines()[0] == "network,macs,strategy,mode,total_activations,total_millions"
        assert "\r" not in text
        assert text.splitlines()[4] == "net,512,optimal,passive,3584,0.00"

    def test_csv_reparses_to_same_rows(self, sample_rows):
        assert parse_rows(Report("t", sample_rows).render(ReportFormat.CSV)) == sample_rows

    def test_side_table_does_not_disturb_reparse(self, sample_rows):
        passive = [ReportRow("net", 512, "optimal", "passive", 200)]
        active = [ReportRow("net", 512, "optimal", "active", 150)]
        report = Report("t", passive + active, savings=savings_frame(passive, active))
        assert parse_rows(report.render(ReportFormat.CSV)) == passive + active

    def test_markdown_table(self, sample_rows):
        text = render_markdown(rows_to_frame(sample_rows))
        lines = text.splitlines()
        assert lines[0].startswith("| network | macs |")
        assert lines[1].startswith("|---|---:|")
        assert "| 0.00 |" in lines[-1]

    def test_write_report(self, tmp_path, sample_rows):
        path = tmp_path / "out" / "report.csv"
        write_report(Report("t", sample_rows).render(), str(path))
        assert parse_rows(path.read_text(encoding="utf-8")) == sample_rows


class TestDominance:

    def test_no_violation(self, sample_rows):
        assert check_dominance(sample_rows) == []

    def test_baseline_below_optimal_is_flagged(self, sample_rows):
        rows = sample_rows[:3] + [ReportRow("net", 512, "optimal", "passive", 5000)]
        violations = check_dominance(rows)
        assert len(violations) == 1
        assert "max_input" in violations[0]
        with pytest.raises(DominanceViolation):
            Report("t", rows, violations=violations).raise_for_violations()


class TestSavings:

    def test_savings_percent(self):
        frame = savings_frame([ReportRow("v", 512, "optimal", "passive", 400)],
                              [ReportRow("v", 512, "optimal", "active", 300)])
        assert frame["savings_percent"].tolist() == [25.0]

    def test_range_violations(self):
        frame = savings_frame([ReportRow("v", 512, "optimal", "passive", 100)],
                              [ReportRow("v", 512, "optimal", "active", 95)])
        assert savings_range_violations(frame, {512: (9.0, 52.0)})
        assert not savings_range_violations(frame, {16384: (0.0, 48.0)})

    def test_relative_error(self):
        assert relative_error(125.0, 100.0) == pytest.approx(0.25)


class TestEngineCommands:

    def test_factory(self):
        assert create_bandwidth_sentinel_engine(CONFIG_PATH).initialized

    def test_missing_config_falls_back_to_defaults(self, tmp_path):
        fallback = BandwidthSentinelEngine(str(tmp_path / "absent.yaml"))
        assert fallback.default_macs() == [512, 1024, 2048, 4096, 8192, 16384]

    def test_min_bw_all_builtins(self, engine):
        report = engine.cmd_min_bw(engine.networks())
        assert [row.network for row in report.rows] == list(BUILTIN_NETWORKS)
        vgg = next(row for row in report.rows if row.network == "vgg16")
        assert vgg.total == 22_629_376

    def test_min_bw_custom_file(self, engine, l1_file):
        report = engine.cmd_min_bw(engine.networks(files=[l1_file]))
        assert report.rows[0].total == 1024
        assert report.rows[0].total_millions == 0.0

    def test_min_bw_requires_networks(self, engine):
        with pytest.raises(CatalogError, match="no networks"):
            engine.cmd_min_bw([])

    def test_compare_single_cell(self, engine):
        report = engine.cmd_compare(engine.networks(["alexnet"]), [512])
        assert [row.strategy for row in report.rows] == ["max_input", "max_output", "equal_macs", "optimal"]

    def test_compare_all_builtins(self, engine):
        report = engine.cmd_compare(engine.networks(), [16384, 512, 2048])
        assert len(report.rows) == 96
        assert report.violations == []
        assert [row.macs for row in report.rows[:12:4]] == [512, 2048, 16384]

    def test_compare_custom_layer(self, engine, l1_file):
        report = engine.cmd_compare(engine.networks(files=[l1_file]), [72])
        totals = {row.strategy: row.total for row in report.rows}
        assert totals == {"max_input": 4608, "max_output": 8192, "equal_macs": 5632, "optimal": 3584}

    def test_compare_infeasible_rows_are_noted(self, engine):
        report = engine.cmd_compare(engine.networks(["alexnet"]), [64])
        assert report.rows == []
        assert len(report.notes) == 4

    def test_sweep_savings(self, engine):
        report = engine.cmd_sweep(engine.networks(["vgg16"]), parse_macs("512..16384"))
        assert len(report.rows) == 12
        assert len(report.savings) == 6
        assert (report.savings["savings_percent"] >= 0).all()
        for passive, active in zip(report.rows[::2], report.rows[1::2]):
            assert (passive.mode, active.mode) == ("passive", "active")
            assert active.total <= passive.total

    def test_sweep_single_mode_has_no_savings(self, engine):
        report = engine.cmd_sweep(engine.networks(["resnet18"]), [512], [ControllerMode.ACTIVE])
        assert report.savings is None
        assert report.rows[0].mode == "active"

    def test_check_passive(self, engine):
        layer = ConvLayerShape("L1", 8, 8, 3, 1, 1, 8, 8)
        result = engine.cmd_check(layer, Partition(4, 2), ControllerMode.PASSIVE)
        assert result.passed
        assert result.analytic.total == result.simulated.to_breakdown().total == 3584
        assert "PASS" in result.render()

    def test_check_active(self, engine):
        tiny = ConvLayerShape("tiny", 2, 2, 1, 1, 0, 2, 2)
        result = engine.cmd_check(tiny, Partition(1, 1), ControllerMode.ACTIVE)
        assert result.passed
        assert result.controller.interconnect_reads == 0

    def test_check_range_error(self, engine):
        layer = ConvLayerShape("L1", 8, 8, 3, 1, 1, 8, 8)
        with pytest.raises(PartitionRangeError):
            engine.cmd_check(layer, Partition(9, 1))

    def test_check_oversize_layer(self, engine):
        layer = ConvLayerShape("big", 224, 224, 3, 1, 1, 64, 64)
        with pytest.raises(SimulationSizeError):
            engine.cmd_check(layer, Partition(1, 1))


class TestReproduction:

    def test_catalog_sets(self):
        sets = catalog_sets(["alexnet", "vgg16"])
        assert sets == [("primary", ["alexnet", "vgg16"]), ("alexnet224", ["alexnet224", "vgg16"])]

    def test_reference_lookup(self):
        reference = ReferenceTables.load(str(REPO_ROOT / 'config' / 'published_bandwidth.json'))
        assert reference.min_bandwidth("vgg16") == 20.095
        assert reference.strategy(512, "alexnet", "optimal") == 25.1
        assert reference.controller("active", "vgg16", 512) == 315.33
        assert reference.strategy_macs() == [512, 2048, 16384]

    def test_report_covers_variants_and_group_modes(self, engine):
        report = engine.cmd_reproduce()
        assert set(report.cells["catalog"]) == {"primary", "alexnet224"}
        assert set(report.cells["groups"]) == {g.value for g in GroupTreatment}
        assert len(report.summary) == 2 * 2 * 3
        assert report.ordering_violations == []
        assert "# Summary" in report.render()

    def test_single_group_mode(self, engine):
        report = engine.cmd_reproduce([GroupTreatment.DENSE], ["vgg16"])
        assert set(report.cells["groups"]) == {"dense"}
        assert set(report.cells["network"]) == {"vgg16"}

    def test_strategy_table_scored_on_optimal_column(self):
        def cell(network, column, computed, reference=10.0, table="strategies"):
            return DiscrepancyCell("primary", "grouped", table, network, column, 512,
                                   computed, reference)

        cells = [
            cell("a", "optimal", 10.5), cell("a", "max_input", 40.0),
            cell("b", "optimal", 20.0), cell("b", "equal_macs", 10.0),
            cell("a", "passive", 10.0, table="controller"), cell("a", "active", 30.0, table="controller"),
            cell("b", "passive", 10.0, table="controller"), cell("b", "active", 10.0, table="controller"),
        ]
        summary = summarize_discrepancies(discrepancy_frame(cells, 0.25), min_networks=1)
        by_table = summary.set_index("table")
        assert by_table.loc["strategies", "networks_within"] == 1
        assert by_table.loc["strategies", "networks"] == 2
        assert by_table.loc["controller", "networks_within"] == 1
        assert bool(by_table.loc["strategies", "passed"])

    def test_engine_summary_counts_optimal_cells_only(self, engine):
        report = engine.cmd_reproduce([GroupTreatment.GROUPED])
        cells = report.cells
        optimal = cells[(cells["table"] == "strategies") & (cells["column"] == "optimal")]
        for (catalog, groups), group in optimal.groupby(["catalog", "groups"]):
            expected = int(group.groupby("network")["within_tolerance"].all().sum())
            row = report.summary[(report.summary["catalog"] == catalog)
                                 & (report.summary["groups"] == groups)
                                 & (report.summary["table"] == "strategies")]
            assert int(row["networks_within"].iloc[0]) == expected
        primary = report.summary[(report.summary["catalog"] == "primary")
                                 & (report.summary["table"] == "strategies")]
        assert int(primary["networks_within"].iloc[0]) >= 4


class TestCommandLine:

    def test_parse_macs(self):
        assert parse_macs("512..16384") == [512, 1024, 2048, 4096, 8192, 16384]
        assert parse_macs("512,2048") == [512, 2048]

    @pytest.mark.parametrize("text", ["512..1000", "0,4", "abc", "1024..512"])
    def test_bad_macs(self, text):
        import argparse
        with pytest.raises(argparse.ArgumentTypeError):
            parse_macs(text)

    def test_min_bw(self, capsys):
        assert main(["min-bw", "--config", CONFIG_PATH, "--network", "vgg16"]) == 0
        rows = parse_rows(capsys.readouterr().out)
        assert rows == [ReportRow("vgg16", 0, "minimum", "none", 22_629_376)]

    def test_compare_to_file(self, tmp_path):
        output = tmp_path / "compare.csv"
        code = main(["compare", "--config", CONFIG_PATH, "--network", "alexnet",
                     "--macs", "512", "--output", str(output)])
        assert code == 0
        assert len(parse_rows(output.read_text(encoding="utf-8"))) == 4

    def test_markdown_format(self, capsys):
        main(["sweep", "--config", CONFIG_PATH, "--network", "resnet18", "--macs", "512",
              "--format", "md"])
        out = capsys.readouterr().out
        assert out.startswith("| network |")
        assert "savings_percent" in out

    def test_check_pass(self, capsys):
        code = main(["check", "--config", CONFIG_PATH, "--layer", "L1,8,8,3,1,1,8,8",
                     "--m", "4", "--n", "2"])
        assert code == 0
        assert capsys.readouterr().out.rstrip().endswith("PASS")

    def test_check_trace_file_replays(self, tmp_path, capsys):
        trace = tmp_path / "traces" / "l1.trace"
        code = main(["check", "--config", CONFIG_PATH, "--layer", "L1,8,8,3,1,1,8,8",
                     "--m", "4", "--n", "2", "--controller", "active", "--trace", str(trace)])
        assert code == 0
        text = trace.read_text(encoding="utf-8")
        assert text.splitlines()[-1].startswith("# reads=0 writes=")
        _, counters = run_trace(MemoryController(512, ControllerMode.ACTIVE), parse_trace(text))
        assert format_trace([], counters).strip() == text.splitlines()[-1]

    def test_check_without_trace_writes_nothing(self, tmp_path, capsys):
        main(["check", "--config", CONFIG_PATH, "--layer", "L1,8,8,3,1,1,8,8",
              "--m", "4", "--n", "2", "--output", str(tmp_path / "check.csv")])
        assert [p.name for p in tmp_path.iterdir()] == ["check.csv"]

    def test_configured_log_file_sees_engine_startup(self, tmp_path, capsys):
        log_file = tmp_path / "logs" / "sentinel.log"
        config = tmp_path / "config.yaml"
        config.write_text(f"logging:\n  level: INFO\n  file: {log_file}\n", encoding="utf-8")
        try:
            assert main(["min-bw", "--config", str(config), "--network", "vgg16"]) == 0
        finally:
            root = logging.getLogger()
            for handler in [h for h in root.handlers
                            if getattr(h, "baseFilename", None) == str(log_file)]:
                root.removeHandler(handler)
                handler.close()
        logged = log_file.read_text(encoding="utf-8")
        assert "engine initialized" in logged

    def test_missing_config_logged_before_defaults(self, tmp_path, capsys, caplog):
        code = main(["min-bw", "--config", str(tmp_path / "absent.yaml"), "--network", "vgg16"])
        assert code == 0
        assert "Failed to load configuration" in caplog.text
        assert parse_rows(capsys.readouterr().out)[0].total == 22_629_376

    def test_check_range_error_exit_code(self, capsys):
        code = main(["check", "--config", CONFIG_PATH, "--layer", "L1,8,8,3,1,1,8,8",
                     "--m", "9", "--n", "1"])
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_unknown_network_exit_code(self, capsys):
        assert main(["min-bw", "--config", CONFIG_PATH, "--network", "lenet"]) == 2
        assert "unknown network" in capsys.readouterr().err
