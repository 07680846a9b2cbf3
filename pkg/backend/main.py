"""
Bandwidth Sentinel - Main Backend Integration Module
Orchestrates the catalog, partitioner, simulators and reports behind the CLI

This module integrates:
- Network catalogs (built-in and user supplied)
- Analytic bandwidth model and partitioning strategies
- Tile simulator and memory controller model as exact oracles
- Report assembly and comparison against published figures
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd
import yaml

from .analytic_model import (
    BandwidthBreakdown, ControllerMode, GroupTreatment, Partition,
    layer_bandwidth, min_bandwidth,
)
from .memory_controller import (
    MemTransaction, TrafficCounters, activation_from_config, create_memory_controller,
    engine_trace, format_trace, run_trace,
)
from .model_catalog import (
    CatalogError, ConvLayerShape, NetworkModel, catalog_base_name, catalog_variants,
    create_catalog_manager,
)
from .partitioner import (
    COMPARED_STRATEGIES, AcceleratorConfig, InfeasiblePartitionError, Strategy,
    network_bandwidth,
)
from .reporting import (
    UNBOUNDED_MACS, DiscrepancyCell, ReferenceTables, Report, ReportFormat, ReportRow,
    ReproductionReport, check_dominance, discrepancy_frame, render_frame,
    savings_frame, savings_range_violations, summarize_discrepancies,
)
from .tile_simulator import AccessCounts, create_tile_simulator

logger = logging.getLogger(__name__)

REPO_ROOT = Path(__file__).parent.parent
DEFAULT_MACS = [512, 1024, 2048, 4096, 8192, 16384]


@dataclass
class CheckResult:
    """Analytic, simulated and controller-level traffic of one layer"""
    layer: ConvLayerShape
    partition: Partition
    mode: ControllerMode
    analytic: BandwidthBreakdown
    simulated: AccessCounts
    controller: TrafficCounters
    numeric_match: bool
    stream: List[MemTransaction] = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return (self.analytic == self.simulated.to_breakdown()
                and self.controller.interconnect_reads == self.simulated.psum_reads
                and self.controller.interconnect_writes == self.simulated.psum_writes
                and self.numeric_match)

    def to_frame(self) -> pd.DataFrame:
        sim, ctl = self.simulated, self.controller
        records = [
            ("input_reads", self.analytic.input_reads, sim.input_reads, "-"),
            ("psum_reads", self.analytic.psum_reads, sim.psum_reads, ctl.interconnect_reads),
            ("psum_writes", self.analytic.psum_writes, sim.psum_writes, ctl.interconnect_writes),
            ("total", self.analytic.total, sim.to_breakdown().total,
             sim.input_reads + ctl.interconnect_reads + ctl.interconnect_writes),
        ]
        return pd.DataFrame(records, columns=["quantity", "analytic", "simulator", "controller"])

    def render(self, report_format: ReportFormat = ReportFormat.CSV) -> str:
        header = (f"# {self.layer.name} m={self.partition.m} n={self.partition.n} "
                  f"mode={self.mode.value}\n")
        footer = (f"# controller internal read-update-writes: {self.controller.internal_reads}\n"
                  f"# numeric output matches direct convolution: {self.numeric_match}\n"
                  f"{'PASS' if self.passed else 'FAIL'}\n")
        return header + render_frame(self.to_frame(), report_format) + footer

    def trace_text(self) -> str:
        """Engine transaction stream with the controller counters, in trace file format"""
        return format_trace(self.stream, self.controller)


class BandwidthSentinelEngine:
    """
    Main engine orchestrating all Bandwidth Sentinel functionality
    """

    def __init__(self, config_path: str = "config/config.yaml", config: Optional[Dict] = None):
        """
        Initialize the engine with configuration

        Args:
            config_path: Path to configuration file
            config: Already loaded configuration (takes precedence over config_path)
        """
        self.config = config if config is not None else self._load_config(config_path)
        self.initialized = False

        self._initialize_components()

        logger.info("Bandwidth Sentinel engine initialized successfully")

    def _load_config(self, config_path: str) -> Dict:
        """Load configuration from YAML file"""
        return load_config(config_path) or self._get_default_config()

    def _get_default_config(self) -> Dict:
        """Return default configuration if config file is not available"""
        return default_config()

    def _initialize_components(self):
        """Initialize catalog manager, simulators and report settings"""
        try:
            self.catalog_manager = create_catalog_manager(self.config)
            self.tile_simulator = create_tile_simulator(self.config)
            self.activation = activation_from_config(self.config)

            report = self.config.get('report', {})
            self.report_format = ReportFormat(report.get('format', 'csv'))
            self.decimals = int(report.get('decimals', 2))

            self._totals: Dict[Tuple[NetworkModel, AcceleratorConfig], int] = {}
            self.initialized = True
            logger.info("All components initialized successfully")

        except Exception as e:
            logger.error(f"Failed to initialize components: {e}")
            raise

    def default_macs(self) -> List[int]:
        macs = self.config.get('accelerator', {}).get('macs', DEFAULT_MACS)
        return [int(p) for p in (macs if isinstance(macs, list) else [macs])]

    def accelerator(self, macs: int, mode: Optional[ControllerMode] = None,
                    strategy: Optional[Strategy] = None,
                    reoptimize_active: Optional[bool] = None,
                    groups: Optional[GroupTreatment] = None) -> AcceleratorConfig:
        """Accelerator config from the `accelerator` section with per-run overrides"""
        overrides = {
            'mode': mode, 'strategy': strategy,
            'reoptimize_active': reoptimize_active, 'groups': groups,
        }
        base = AcceleratorConfig.from_config(self.config, macs)
        return replace(base, **{k: v for k, v in overrides.items() if v is not None})

    def networks(self, names: Optional[List[str]] = None,
                 files: Optional[List[str]] = None) -> List[NetworkModel]:
        """Named and file catalogs; the configured default networks when neither is given"""
        if not names and not files:
            names = self.catalog_manager.default_networks
        return self.catalog_manager.resolve(names, files)

    def _total(self, network: NetworkModel, config: AcceleratorConfig) -> int:
        key = (network, config)
        if key not in self._totals:
            self._totals[key] = network_bandwidth(network, config).total
        return self._totals[key]

    def cmd_min_bw(self, networks: Sequence[NetworkModel]) -> Report:
        """Bandwidth floor of each network (every input read once, every output written once)"""
        if not networks:
            raise CatalogError("no networks")
        report = Report(title="Minimum bandwidth")
        for network in networks:
            report.rows.append(ReportRow(network.name, UNBOUNDED_MACS, "minimum", "none",
                                         min_bandwidth(network)))
        logger.info(f"min-bw: {len(report.rows)} networks")
        return report

    def cmd_compare(self, networks: Sequence[NetworkModel], macs_list: Sequence[int],
                    mode: Optional[ControllerMode] = None,
                    groups: Optional[GroupTreatment] = None,
                    reoptimize_active: Optional[bool] = None) -> Report:
        """
        Network totals for every compared strategy at every MAC budget

        Returns:
            Report ordered by network, ascending P, strategy; any row where a
            baseline beats the optimal strategy is listed in report.violations
        """
        if not networks:
            raise CatalogError("no networks")
        if not macs_list:
            raise ValueError("empty MAC list")
        report = Report(title="Partitioning strategies")
        for network in networks:
            for macs in sorted(macs_list):
                for strategy in COMPARED_STRATEGIES:
                    config = self.accelerator(macs, mode, strategy, reoptimize_active, groups)
                    try:
                        total = self._total(network, config)
                    except InfeasiblePartitionError as e:
                        report.notes.append(f"{network.name} P={macs} {strategy.value}: {e}")
                        logger.warning(f"Skipping row: {e}")
                        continue
                    report.rows.append(ReportRow(network.name, macs, strategy.value,
                                                 config.mode.value, total))
        report.violations = check_dominance(report.rows)
        logger.info(f"compare: {len(report.rows)} rows, {len(report.violations)} violations")
        return report

    def cmd_sweep(self, networks: Sequence[NetworkModel], macs_list: Sequence[int],
                  modes: Iterable[ControllerMode] = (ControllerMode.PASSIVE, ControllerMode.ACTIVE),
                  strategy: Optional[Strategy] = None,
                  groups: Optional[GroupTreatment] = None,
                  reoptimize_active: Optional[bool] = None) -> Report:
        """
        Network totals per controller mode across a MAC sweep

        When both modes are swept the report carries a savings table with
        savings% = 100*(passive - active)/passive per (network, P).
        """
        if not networks:
            raise CatalogError("no networks")
        if not macs_list:
            raise ValueError("empty MAC list")
        modes = list(modes)
        report = Report(title="Controller sweep")
        by_mode: Dict[ControllerMode, List[ReportRow]] = {mode: [] for mode in modes}
        for network in networks:
            for macs in sorted(macs_list):
                for mode in modes:
                    config = self.accelerator(macs, mode, strategy, reoptimize_active, groups)
                    try:
                        total = self._total(network, config)
                    except InfeasiblePartitionError as e:
                        report.notes.append(f"{network.name} P={macs} {mode.value}: {e}")
                        logger.warning(f"Skipping cell: {e}")
                        continue
                    row = ReportRow(network.name, macs, config.strategy.value, mode.value, total)
                    report.rows.append(row)
                    by_mode[mode].append(row)

        if ControllerMode.PASSIVE in by_mode and ControllerMode.ACTIVE in by_mode:
            report.savings = savings_frame(by_mode[ControllerMode.PASSIVE],
                                           by_mode[ControllerMode.ACTIVE])
        logger.info(f"sweep: {len(report.rows)} cells")
        return report

    def cmd_check(self, layer: ConvLayerShape, p: Partition,
                  mode: ControllerMode = ControllerMode.PASSIVE,
                  groups: Optional[GroupTreatment] = None) -> CheckResult:
        """
        Cross-check the analytic model against the tile simulator and the controller model
        """
        groups = groups or GroupTreatment(self.config.get('accelerator', {}).get('groups', 'grouped'))
        try:
            analytic = layer_bandwidth(layer, p, mode, groups)
            simulated = self.tile_simulator.simulate(layer, p, mode, groups)
            stream = engine_trace(layer, p, mode, self.activation, self.tile_simulator.seed,
                                  groups, self.tile_simulator.max_elements)
            controller = create_memory_controller(self.config, layer.cout * layer.ho * layer.wo, mode)
            _, counters = run_trace(controller, stream)
            numeric_match = self.tile_simulator.verify(layer, p, mode, groups)
        except ValueError as e:
            logger.error(f"check failed for {layer.name}: {e}")
            raise

        result = CheckResult(layer, p, mode, analytic, simulated, counters, numeric_match, stream)
        logger.info(f"check {layer.name} m={p.m} n={p.n} {mode.value}: "
                    f"{'PASS' if result.passed else 'FAIL'}")
        return result

    def cmd_reproduce(self, group_modes: Optional[Sequence[GroupTreatment]] = None,
                      names: Optional[List[str]] = None) -> ReproductionReport:
        """
        Compare computed totals with the published reference tables

        Every catalog variant set and group treatment is evaluated; the report
        holds per-cell relative errors, per-table pass counts, the savings-range
        check and the strategy/MAC ordering checks.
        """
        section = self.config.get('reproduction', {})
        reference = ReferenceTables.load(str(resolve_path(
            section.get('reference_file', 'config/published_bandwidth.json'))))
        tolerance = float(section.get('tolerance', 0.25))
        min_networks = int(section.get('min_networks_within_tolerance', 6))
        bounds = {int(p): (float(lo), float(hi))
                  for p, (lo, hi) in section.get('savings_bounds', {}).items()}
        group_modes = list(group_modes or GroupTreatment)
        names = names or self.catalog_manager.default_networks

        cells: List[DiscrepancyCell] = []
        savings_frames = []
        savings_violations: List[str] = []
        ordering_violations: List[str] = []

        for label, catalog_names in catalog_sets(names):
            networks = [self.catalog_manager.get(n) for n in catalog_names]
            for groups in group_modes:
                passive_rows, active_rows = [], []
                for network in networks:
                    ref_name = catalog_base_name(network.name)

                    def cell(table: str, column: str, macs: int, total: int, ref: Optional[float]):
                        cells.append(DiscrepancyCell(label, groups.value, table, ref_name, column,
                                                     macs, total / 1e6, ref))

                    cell("min_bandwidth", "minimum", UNBOUNDED_MACS, min_bandwidth(network),
                         reference.min_bandwidth(ref_name))

                    for macs in reference.strategy_macs():
                        totals = {}
                        for strategy in COMPARED_STRATEGIES:
                            config = self.accelerator(macs, ControllerMode.PASSIVE, strategy,
                                                      groups=groups)
                            totals[strategy] = self._total(network, config)
                            cell("strategies", strategy.value, macs, totals[strategy],
                                 reference.strategy(macs, ref_name, strategy.value))
                        best = totals.pop(Strategy.OPTIMAL)
                        for strategy, total in totals.items():
                            if total < best:
                                ordering_violations.append(
                                    f"{label}/{groups.value} {network.name} P={macs}: "
                                    f"{strategy.value} below optimal"
                                )

                    previous = None
                    for macs in reference.controller_macs():
                        for mode in ControllerMode:
                            config = self.accelerator(macs, mode, Strategy.OPTIMAL, groups=groups)
                            total = self._total(network, config)
                            cell("controller", mode.value, macs, total,
                                 reference.controller(mode.value, ref_name, macs))
                            row = ReportRow(ref_name, macs, Strategy.OPTIMAL.value, mode.value, total)
                            (passive_rows if mode is ControllerMode.PASSIVE else active_rows).append(row)
                            if mode is ControllerMode.PASSIVE:
                                if previous is not None and total > previous:
                                    ordering_violations.append(
                                        f"{label}/{groups.value} {network.name}: optimal total "
                                        f"rises at P={macs}"
                                    )
                                previous = total

                savings = savings_frame(passive_rows, active_rows)
                savings_violations.extend(
                    f"{label}/{groups.value} {v}" for v in savings_range_violations(savings, bounds)
                )
                savings.insert(0, "groups", groups.value)
                savings.insert(0, "catalog", label)
                savings_frames.append(savings)

        frame = discrepancy_frame(cells, tolerance)
        report = ReproductionReport(
            cells=frame,
            summary=summarize_discrepancies(frame, min_networks),
            savings=pd.concat(savings_frames, ignore_index=True),
            savings_violations=savings_violations,
            ordering_violations=ordering_violations,
        )
        within = int(frame["within_tolerance"].sum())
        logger.info(f"reproduce: {within}/{len(frame)} cells within {tolerance:.0%}")
        for violation in savings_violations:
            logger.warning(f"Savings outside range: {violation}")
        return report


def catalog_sets(names: Sequence[str]) -> List[Tuple[str, List[str]]]:
    """
    One catalog list per shipped variant, labelled by the variants it swaps in

    The first set uses the primary catalogs and is labelled "primary".
    """
    width = max(len(catalog_variants(n)) for n in names)
    sets = []
    for i in range(width):
        chosen = []
        for name in names:
            variants = catalog_variants(name)
            chosen.append(variants[min(i, len(variants) - 1)])
        swapped = [c for c, n in zip(chosen, names) if c != n]
        sets.append(("+".join(swapped) if swapped else "primary", chosen))
    return sets


def load_config(config_path: str) -> Optional[Dict]:
    """Read the YAML configuration; None when it is missing, unreadable or empty"""
    try:
        with open(resolve_path(config_path), 'r') as f:
            config = yaml.safe_load(f)
        logger.info(f"Configuration loaded from {config_path}")
        return config or None
    except Exception as e:
        logger.error(f"Failed to load configuration: {e}")
        return None


def default_config() -> Dict:
    """Built-in configuration used when no config file is available"""
    return {
        'system': {
            'logging_level': 'INFO',
            'app_name': 'Bandwidth Sentinel',
        },
        'catalogs': {
            'directory': str(REPO_ROOT / 'catalogs'),
        },
        'accelerator': {
            'macs': list(DEFAULT_MACS),
            'controller': 'passive',
            'strategy': 'optimal',
            'reoptimize_active': False,
            'groups': 'grouped',
        },
        'simulator': {
            'max_elements': 1_000_000,
            'seed': 42,
        },
        'report': {
            'format': 'csv',
            'decimals': 2,
        },
        'reproduction': {
            'reference_file': str(REPO_ROOT / 'config' / 'published_bandwidth.json'),
            'tolerance': 0.25,
            'min_networks_within_tolerance': 6,
            'savings_bounds': {'512': [9.0, 52.0], '16384': [0.0, 48.0]},
        },
    }


def resolve_path(path: str) -> Path:
    """Relative paths that do not exist from the working directory resolve against the repo root"""
    candidate = Path(path)
    if candidate.is_absolute() or candidate.exists():
        return candidate
    return REPO_ROOT / candidate


# Factory function for easy integration
def create_bandwidth_sentinel_engine(config_path: str = "config/config.yaml") -> BandwidthSentinelEngine:
    """Factory function to create the Bandwidth Sentinel engine"""
    return BandwidthSentinelEngine(config_path)
