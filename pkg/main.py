#!/usr/bin/env python3
"""
mfestimate - on-line modulating-function parameter and state estimation of
linear continuous-time systems, run on simulated or recorded scenarios.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Add the app directory to Python path
sys.path.insert(0, str(Path(__file__).parent))

from core.config import Config
from core.errors import ConfigError, SchemaError
from core.models import RunReport, ScenarioConfig
from core.scenario_manager import ScenarioManager

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_ESTIMATE = 3

logger = logging.getLogger('mfestimate')


def setup_logging(verbose: bool, quiet: bool) -> None:
    """Configure the root logger once; logs go to stderr."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s',
                        stream=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='mfestimate', description=__doc__.strip().splitlines()[0])
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    parser.add_argument('-q', '--quiet', action='store_true', help='warnings only')
    commands = parser.add_subparsers(dest='command', required=True)

    def scenario_command(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument('config', help='scenario file or bundled scenario name')
        sub.add_argument('--seed', type=int, help='override the scenario seed')
        sub.add_argument('--out-dir', type=Path, help='output directory (default: the scenario output.dir)')
        sub.add_argument('--format', choices=('csv', 'json'), help='report format')
        return sub

    scenario_command('run', 'run a scenario and write traces and a report')
    commands.add_parser('validate', help='check a scenario file').add_argument('config')
    commands.add_parser('list-scenarios', help='list the bundled scenarios')
    monte_carlo = scenario_command('monte-carlo', 'repeat a scenario over consecutive seeds')
    monte_carlo.add_argument('--runs', type=int, default=10, help='number of seeds (default: 10)')
    return parser


def _load(manager: ScenarioManager, args: argparse.Namespace) -> ScenarioConfig:
    data = manager.config.load_scenario_data(args.config)
    if args.seed is not None:
        data['seed'] = args.seed
    if args.format is not None:
        data.setdefault('output', {})['format'] = args.format
    scenario = ScenarioConfig.from_dict(data)
    manager.build_estimators(scenario, None, None)
    return scenario


def print_report(report: RunReport) -> None:
    print(f"scenario {report.scenario} (seed {report.seed})")
    for name, summary in report.estimators.items():
        first = summary.get('first_valid')
        status = 'no valid estimate' if first is None else f"valid from t={first:g}"
        print(f"  {name} [{summary['kind']}]: {status}")
        for key, value in summary.get('final', {}).items():
            line = f"    {key:>4} = {value: .6g}"
            error = summary.get('relative_errors', {}).get(key.lstrip('-'))
            if error is not None:
                line += f"  (error {100 * error:.3g}%)"
            print(line)
        if summary.get('fit_percent') is not None:
            print(f"    fit {summary['fit_percent']:.2f}%")
        if 'max_error' in summary:
            print(f"    max state error {summary['max_error']:.4g}, final {summary['final_error']:.4g}")
        if name in report.seconds_per_tick:
            print(f"    {1e6 * report.seconds_per_tick[name]:.1f} us per tick")
    for name, counts in report.warnings.items():
        print(f"  warnings {name}: " + ', '.join(f"{kind} x{count}" for kind, count in counts.items()))
    if report.files:
        print("  files: " + ', '.join(report.files))


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the application."""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose, args.quiet)
    config = Config(out_dir=getattr(args, 'out_dir', None))
    manager = ScenarioManager(config)

    try:
        if args.command == 'list-scenarios':
            for name, description in manager.list_scenarios().items():
                print(f"{name:<20} {description}")
            return EXIT_OK
        if args.command == 'validate':
            scenario = manager.validate(args.config)
            print(f"{scenario.name}: ok ({len(scenario.estimators)} estimators)")
            return EXIT_OK

        scenario = _load(manager, args)
        if args.command == 'monte-carlo':
            result = manager.run_monte_carlo(scenario, args.runs)
            print(f"scenario {scenario.name}: {args.runs} runs, median relative errors")
            for name, errors in result['median_relative_errors'].items():
                print(f"  {name}: " + ', '.join(f"{k}={100 * v:.3g}%" for k, v in errors.items()))
            return EXIT_OK

        report = manager.run_scenario(scenario)
        print_report(report)
        if report.failed:
            logger.error("no valid estimate from: %s", ', '.join(report.failed))
            return EXIT_NO_ESTIMATE
        return EXIT_OK
    except (ConfigError, SchemaError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
