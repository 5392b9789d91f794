#!/usr/bin/env python3
# Main entry point for the up-converted HOM interference simulator

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from tqdm import tqdm

from core.errors import ScenarioError
from core.scenario import ScenarioFile, load_scenario, scenario_schema
from shared.hom_engine import EXIT_INPUT, EXIT_OK, HOMExperimentEngine

logger = logging.getLogger("homupconv")

SCENARIO_COMMANDS = ("run", "analytic", "simulate", "budget", "sweep")


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        logger.warning("ignoring %s=%r (not an integer)", name, value)
        return default


def _parse_values(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"values must be comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output prefix (overrides the scenario's output_prefix)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads; affects speed only (env HOMUPCONV_THREADS)")
    common.add_argument("--log-level", default=None,
                        help="DEBUG, INFO, WARNING or ERROR (env HOMUPCONV_LOG_LEVEL)")

    scenario_flags = argparse.ArgumentParser(add_help=False)
    scenario_flags.add_argument("scenario", help="scenario JSON file")
    scenario_flags.add_argument("--seed", type=int, default=None, help="random seed (overrides rng_seed)")
    scenario_flags.add_argument("--pulse-cap", type=int, default=None,
                                help="pulses per delay before giving up (env HOMUPCONV_PULSE_CAP)")

    parser = argparse.ArgumentParser(
        prog="homupconv",
        description="Simulate and analyse two-photon interference of frequency up-converted photons")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("run", parents=[common, scenario_flags], help="run the scenario's own mode")
    commands.add_parser("analytic", parents=[common, scenario_flags], help="analytic dip or beating curve")
    commands.add_parser("simulate", parents=[common, scenario_flags], help="Monte Carlo coincidence curve")
    commands.add_parser("budget", parents=[common, scenario_flags], help="visibility decomposition table")
    sweep = commands.add_parser("sweep", parents=[common, scenario_flags],
                                help="simulate, fit and budget over values of one setting")
    sweep.add_argument("--parameter", help="dotted setting path, e.g. source.mean_pairs_per_pulse")
    sweep.add_argument("--values", type=_parse_values, help="comma-separated values")

    fit = commands.add_parser("fit", parents=[common], help="fit the Gaussian dip to a curve CSV")
    fit.add_argument("curve", help="CSV with delay_ps,coincidences,starts or delay_ps,probability")
    fit.add_argument("--bootstrap", type=int, default=0, help="Poisson bootstrap replicas (0 = off)")
    fit.add_argument("--bandwidth", type=float, default=None,
                     help="photon FWHM in GHz for the transform-limit consistency check")
    fit.add_argument("--seed", type=int, default=0, help="bootstrap seed")

    commands.add_parser("schema", help="print the scenario JSON schema")
    return parser


def configure_logging(level_name: Optional[str]):
    level_name = (level_name or os.getenv("HOMUPCONV_LOG_LEVEL") or "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _apply_overrides(scenario: ScenarioFile, args: argparse.Namespace) -> ScenarioFile:
    update: Dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        update["rng_seed"] = args.seed
    if args.out:
        update["output_prefix"] = args.out
    pulse_cap = args.pulse_cap if args.pulse_cap is not None else _env_int("HOMUPCONV_PULSE_CAP", 0)
    if pulse_cap > 0:
        update["pulse_cap"] = pulse_cap
    return scenario.model_copy(update=update) if update else scenario


def _print_result(result: Dict[str, Any]):
    if result["status"] == "success":
        if "text" in result:
            print(result["text"])
        else:
            for key, value in result.get("summary", {}).items():
                print(f"{key} = {value}")
        for path in result.get("files", []):
            logger.info("wrote %s", path)
        return
    if "text" in result:
        print(result["text"])
    print(f"error: {result['error']}", file=sys.stderr)
    for line in result.get("suggestions", []):
        print(f"  {line}", file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(getattr(args, "log_level", None))

    if args.command == "schema":
        print(json.dumps(scenario_schema(), indent=2))
        return EXIT_OK

    threads = args.threads if args.threads is not None else _env_int("HOMUPCONV_THREADS", 1)
    engine = HOMExperimentEngine(threads=threads)
    with tqdm(total=100, unit="%", disable=None, file=sys.stderr) as bar:
        def progress_callback(step: str, message: str, percent: int):
            bar.set_description(step)
            bar.set_postfix_str(message)
            bar.update(max(0, percent - bar.n))

        engine.set_progress_callback(progress_callback)

        if args.command == "fit":
            prefix = args.out or os.path.splitext(args.curve)[0]
            result = engine.fit(args.curve, prefix, bootstrap=args.bootstrap,
                                bandwidth_ghz=args.bandwidth, seed=args.seed)
        else:
            try:
                scenario = _apply_overrides(load_scenario(args.scenario), args)
            except ScenarioError as e:
                print(f"error: {e}", file=sys.stderr)
                for line in e.diagnostics:
                    print(f"  {line}", file=sys.stderr)
                return EXIT_INPUT
            if args.command == "run":
                result = engine.run(scenario)
            elif args.command == "analytic":
                result = engine.analytic(scenario)
            elif args.command == "simulate":
                result = engine.simulate(scenario)
            elif args.command == "budget":
                result = engine.budget(scenario)
            else:
                result = engine.sweep(scenario, parameter=args.parameter, values=args.values)

    _print_result(result)
    return result["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
