"""
Command line interface: one subcommand per experiment
"""
# Standard library imports
import argparse
import logging
import sys
from typing import List, Optional

# Local imports
from ncvnwsim.cli_runner.config import load_config
from ncvnwsim.cli_runner.runner import ExperimentKind, run_experiment
from ncvnwsim.errors import IoError, NcfetSimError, ParseError, ValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED_POINTS = 1
EXIT_CONFIG = 2
EXIT_IO = 3

_HELP = {
    ExperimentKind.S_CURVE: "static P-E S-curve and dynamic P-V loop of the ferroelectric",
    ExperimentKind.ID_VG: "transfer characteristics for every area and work function",
    ExperimentKind.ID_VD: "output characteristics, NDR intervals and saturation check",
    ExperimentKind.ATTRACTOR: "crossover gate voltage of the area family",
    ExperimentKind.CRITICAL_AREA: "smallest hysteresis-free ferroelectric area",
    ExperimentKind.INVERTER_VTC: "conventional and NC inverter transfer curves and gain",
    ExperimentKind.RO_TRANSIENT: "ring oscillator transients at circuit.v_dd",
    ExperimentKind.ENERGY_DELAY: "ring oscillator energy-delay sweep and iso-delay saving",
    ExperimentKind.DEVICE_METRICS: "SS, threshold, DIBL, hysteresis and currents per device",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncfet-sim",
        description="Negative-capacitance vertical nanowire FET device and circuit simulator",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="TOML configuration file")
    common.add_argument("--out", "-o", help="Output directory (default: output.dir)")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config value by dotted key, e.g. ferro.a_fe_nm2=700",
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    sub = parser.add_subparsers(dest="experiment", metavar="EXPERIMENT", required=True)
    for kind in ExperimentKind:
        sub.add_parser(kind.value, parents=[common], help=_HELP[kind])
    return parser


def _configure_logging(verbose: bool, quiet: bool):
    level = logging.INFO
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point of ncfet-sim; returns 0 only when every point converged
    """
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose, args.quiet)
    try:
        cfg = load_config(args.config, args.overrides)
    except (ParseError, ValidationError) as err:
        logger.error("%s", err)
        return EXIT_CONFIG
    try:
        result = run_experiment(cfg, args.experiment, args.out)
    except IoError as err:
        logger.error("%s", err)
        return EXIT_IO
    except NcfetSimError as err:
        logger.error("%s", err)
        return EXIT_FAILED_POINTS
    for path in result.paths:
        logger.info("wrote %s", path)
    logger.info("manifest: %s", result.manifest)
    return EXIT_OK if result.ok else EXIT_FAILED_POINTS


if __name__ == "__main__":
    sys.exit(main())
