"""
Bandwidth Sentinel - Command Line Interface

Usage:
    python sentinel_cli.py min-bw [--network NAME ...] [--file PATH ...]
    python sentinel_cli.py compare --macs 512,2048,16384 [--controller passive|active]
    python sentinel_cli.py sweep --macs 512..16384
    python sentinel_cli.py check --layer L1,8,8,3,1,1,8,8 --m 4 --n 2
    python sentinel_cli.py reproduce [--output reports/reproduction.md]
"""

import argparse
import logging
import logging.handlers
import sys
from pathlib import Path
from typing import Dict, List, Optional

# Add the parent directory to the path so we can import backend modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from backend.analytic_model import ControllerMode, GroupTreatment, Partition
from backend.main import BandwidthSentinelEngine, default_config, load_config
from backend.model_catalog import ConvLayerShape, parse_network
from backend.partitioner import Strategy
from backend.reporting import DominanceViolation, ReportFormat, write_report

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def parse_macs(text: str) -> List[int]:
    """
    MAC budgets as a comma list (512,2048) or a doubling range (512..16384)
    """
    try:
        if ".." in text:
            low_text, high_text = text.split("..", 1)
            low, high = int(low_text), int(high_text)
            if low < 1 or high < low:
                raise argparse.ArgumentTypeError(f"invalid MAC range '{text}'")
            ratio = high // low
            if high % low or ratio & (ratio - 1):
                raise argparse.ArgumentTypeError(
                    f"MAC range bounds must differ by a power of two: '{text}'"
                )
            macs = []
            p = low
            while p <= high:
                macs.append(p)
                p *= 2
            return macs
        macs = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid MAC list '{text}'")
    if not macs or min(macs) < 1:
        raise argparse.ArgumentTypeError(f"invalid MAC list '{text}'")
    return macs


def parse_layer(text: str) -> ConvLayerShape:
    """A single catalog record: name,wi,hi,k,stride,pad,cin,cout[,groups]"""
    try:
        return parse_network(text, "layer").layers[0]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def setup_logging(config: Dict, level: Optional[str] = None):
    """Configure the root logger once from the `logging` section"""
    section = config.get('logging', {})
    level_name = level or section.get('level') or config.get('system', {}).get('logging_level', 'INFO')
    root = logging.getLogger()
    logging.basicConfig(format=LOG_FORMAT, stream=sys.stderr)
    root.setLevel(getattr(logging, str(level_name).upper(), logging.INFO))

    log_file = section.get('file')
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=int(section.get('max_size', 10)) * 1024 * 1024,
            backupCount=int(section.get('backup_count', 5)),
        )
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(file_handler)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sentinel_cli.py",
        description="Partial-sum bandwidth of channel-tiled convolutions on MAC-constrained accelerators",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default='config/config.yaml', help='Path to configuration file')
    common.add_argument('--format', choices=[f.value for f in ReportFormat], help='Report format')
    common.add_argument('--output', help='Write the report to this file instead of stdout')
    common.add_argument('--groups', choices=[g.value for g in GroupTreatment],
                        help='Evaluate grouped layers per group or as dense convolutions')
    common.add_argument('--log-level', help='Override the configured logging level')

    networks = argparse.ArgumentParser(add_help=False)
    networks.add_argument('--network', action='append', default=[], help='Built-in network (repeatable)')
    networks.add_argument('--file', action='append', default=[], help='Catalog file (repeatable)')

    subparsers = parser.add_subparsers(dest='command', required=True)

    subparsers.add_parser('min-bw', parents=[common, networks], help='Minimum bandwidth per network')

    compare = subparsers.add_parser('compare', parents=[common, networks],
                                    help='Compare partitioning strategies')
    compare.add_argument('--macs', type=parse_macs, help='MAC budgets: list or doubling range')
    compare.add_argument('--controller', choices=[m.value for m in ControllerMode])
    compare.add_argument('--reoptimize-active', action='store_true', default=None,
                         help='Choose partitions with the active-controller objective')

    sweep = subparsers.add_parser('sweep', parents=[common, networks],
                                  help='Passive vs active controller across a MAC sweep')
    sweep.add_argument('--macs', type=parse_macs, help='MAC budgets: list or doubling range')
    sweep.add_argument('--controller', choices=[m.value for m in ControllerMode],
                       help='Sweep one controller mode only')
    sweep.add_argument('--strategy', choices=[s.value for s in Strategy])
    sweep.add_argument('--reoptimize-active', action='store_true', default=None,
                       help='Choose partitions with the active-controller objective')

    check = subparsers.add_parser('check', parents=[common],
                                  help='Cross-check analytic model, tile simulator and controller')
    check.add_argument('--layer', type=parse_layer, required=True,
                       help='Layer record: name,wi,hi,k,stride,pad,cin,cout[,groups]')
    check.add_argument('--m', type=int, required=True, help='Input channels per tile')
    check.add_argument('--n', type=int, required=True, help='Output channels per tile')
    check.add_argument('--controller', choices=[m.value for m in ControllerMode], default='passive')
    check.add_argument('--trace', help='Write the engine transaction trace to this file')

    subparsers.add_parser('reproduce', parents=[common],
                          help='Discrepancy report against the published tables')
    return parser


def _emit(text: str, output: Optional[str]):
    if output:
        write_report(text, output)
    else:
        sys.stdout.write(text)


def run(args: argparse.Namespace, engine: BandwidthSentinelEngine) -> int:
    report_format = ReportFormat(args.format) if args.format else engine.report_format
    groups = GroupTreatment(args.groups) if args.groups else None

    if args.command == 'check':
        result = engine.cmd_check(args.layer, Partition(args.m, args.n),
                                  ControllerMode(args.controller), groups)
        _emit(result.render(report_format), args.output)
        if args.trace:
            write_report(result.trace_text(), args.trace)
        return 0 if result.passed else 1

    if args.command == 'reproduce':
        group_modes = [groups] if groups else None
        report = engine.cmd_reproduce(group_modes)
        _emit(report.render(ReportFormat(args.format) if args.format else ReportFormat.MARKDOWN,
                            engine.decimals), args.output)
        return 1 if report.ordering_violations else 0

    networks = engine.networks(args.network, args.file)
    if args.command == 'min-bw':
        report = engine.cmd_min_bw(networks)
    elif args.command == 'compare':
        mode = ControllerMode(args.controller) if args.controller else None
        report = engine.cmd_compare(networks, args.macs or engine.default_macs(), mode, groups,
                                    args.reoptimize_active)
    else:
        modes = [ControllerMode(args.controller)] if args.controller else list(ControllerMode)
        strategy = Strategy(args.strategy) if args.strategy else None
        report = engine.cmd_sweep(networks, args.macs or engine.default_macs(), modes, strategy,
                                  groups, args.reoptimize_active)

    _emit(report.render(report_format, engine.decimals), args.output)
    for note in report.notes:
        print(f"warning: {note}", file=sys.stderr)
    report.raise_for_violations()
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    # stderr only until the logging section is loaded
    setup_logging({}, args.log_level)
    config = load_config(args.config) or default_config()
    setup_logging(config, args.log_level)
    engine = BandwidthSentinelEngine(args.config, config=config)

    try:
        return run(args, engine)
    except DominanceViolation as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
