"""
Command-line entry point: ``clockprobe simulate|balance|wigner|validate``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .autodiscover import autodiscover
from .cesium_model import BalanceError
from .detection import UnbalancedProbeError
from .registry import get_scenario, scenarios_for
from .scenario import Scenario, ScenarioValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_REFUSED = 3

MANIFEST_NAME = "manifest.json"


def _is_float(value: str) -> bool:
    try:
        float(value)
        return True
    except ValueError:
        return False


def coerce_value(value: str) -> Any:
    """
    Coerce one ``--set`` value.

    Handles:
        - True/False (booleans)
        - None
        - 42 (integers)
        - 3.14, 1e5 (floats)
        - a,b,c (lists of any of the above)
        - anything else as a string
    """
    if "," in value:
        return [coerce_value(item.strip()) for item in value.split(",") if item.strip()]
    if value == "True":
        return True
    if value == "False":
        return False
    if value == "None":
        return None
    if value.lstrip("-").isdigit():
        return int(value)
    if _is_float(value):
        return float(value)
    return value


def parse_overrides(bits: Sequence[str]) -> dict[str, Any]:
    """Parse repeated ``key=value`` overrides."""
    overrides: dict[str, Any] = {}
    for bit in bits:
        if "=" not in bit:
            raise ScenarioValidationError(
                f"Invalid override '{bit}'. Overrides must be in key=value format."
            )
        name, value = bit.split("=", 1)
        overrides[name.strip().replace("-", "_")] = coerce_value(value.strip())
    return overrides


def load_config(path: str | Path) -> tuple[str | None, dict[str, Any]]:
    """
    Read a TOML config or a JSON run manifest.

    Returns the scenario name it names (if any) and its parameters. Parameters
    sit either at the top level or under a ``config`` table, the layout of a
    run manifest.
    """
    path = Path(path)
    try:
        if path.suffix == ".json":
            data = json.loads(path.read_text(encoding="utf-8"))
        else:
            with path.open("rb") as handle:
                data = tomllib.load(handle)
    except (OSError, ValueError) as exc:
        raise ScenarioValidationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioValidationError(f"config {path} must hold a table of parameters")

    scenario = data.get("scenario")
    if "config" in data:
        params = dict(data["config"])
        if "seed" in data:
            params.setdefault("seed", data["seed"])
    else:
        params = {k: v for k, v in data.items() if k not in ("scenario", "version")}
    return scenario, params


def resolve_scenario(
    command: str, name: str | None, args: argparse.Namespace, extra: dict[str, Any] | None = None
) -> Scenario:
    """
    Build a scenario instance from defaults < ``--config`` < flags.
    """
    params: dict[str, Any] = {}
    if getattr(args, "config", None):
        config_name, config_params = load_config(args.config)
        if name and config_name and config_name != name:
            raise ScenarioValidationError(
                f"config {args.config} is for scenario '{config_name}', not '{name}'"
            )
        name = name or config_name
        params.update(config_params)
    if not name:
        raise ScenarioValidationError("no scenario given")

    scenario_cls = get_scenario(name)
    if scenario_cls is None or (command != "validate" and scenario_cls.command != command):
        known = ", ".join(scenarios_for(command)) if command != "validate" else ""
        raise ScenarioValidationError(f"unknown scenario '{name}'" + (f"; choose from {known}" if known else ""))

    if getattr(args, "seed", None) is not None:
        params["seed"] = args.seed
    if getattr(args, "reps", None) is not None:
        params["reps"] = args.reps
    params.update(extra or {})
    params.update(parse_overrides(getattr(args, "set", None) or []))
    logger.info(f"resolved scenario '{name}' with {len(params)} explicit parameter(s)")
    return scenario_cls(**params)


def write_manifest(scenario: Scenario, out: Path) -> Path:
    """Resolved config, package version and seed of one run."""
    params = scenario.params()
    manifest = {
        "scenario": scenario.get_scenario_name(),
        "version": __version__,
        "seed": params.get("seed"),
        "config": params,
    }
    out.mkdir(parents=True, exist_ok=True)
    path = out / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def run_scenario(scenario: Scenario, out: Path | None = None) -> int:
    """Run one resolved scenario, print its lines and write its manifest."""
    for warning in scenario.validate():
        logger.warning(warning)
    result = scenario.run(out)
    for line in result.lines:
        print(line)
    if out is not None:
        result.outputs.append(write_manifest(scenario, out))
    for path in result.outputs:
        logger.info(f"wrote {path}")
    return EXIT_OK


def validate_config(scenario: Scenario) -> list[str]:
    """Model-validity warnings for a resolved scenario; nothing is run."""
    return scenario.validate()


def _add_common(parser: argparse.ArgumentParser, *, simulation: bool) -> None:
    parser.add_argument("--config", help="TOML config or JSON run manifest")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one parameter; repeatable, commas make lists",
    )
    parser.add_argument("--out", type=Path, default=Path(".") if simulation else None, help="output directory")
    if simulation:
        parser.add_argument("--seed", type=int, help="master seed (required)")
        parser.add_argument("--reps", type=int, help="cycles or repetitions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clockprobe", description="Dispersive probing of a cesium clock transition."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="run a simulation scenario")
    simulate.add_argument("scenario", nargs="?", help=", ".join(scenarios_for("simulate")))
    _add_common(simulate, simulation=True)

    balance = commands.add_parser("balance", help="solve the two-color balance")
    balance.add_argument("--delta45", type=float, help="color A detuning from F=4 -> F'=5 in MHz")
    _add_common(balance, simulation=False)

    wigner = commands.add_parser(
        "wigner", help="exact 3j or 6j symbol; put '--' before negative arguments"
    )
    wigner.add_argument("kind", choices=("3j", "6j"))
    wigner.add_argument("values", nargs=6, metavar="J", help="integer or half-integer such as 3/2")

    validate = commands.add_parser("validate", help="print model-validity warnings without running")
    validate.add_argument("scenario", nargs="?")
    _add_common(validate, simulation=True)
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    autodiscover()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _configure_logging(args.verbose)

    try:
        if args.command == "wigner":
            scenario = resolve_scenario(
                "wigner", "wigner", args, {"kind": args.kind, "arguments": list(args.values)}
            )
            return run_scenario(scenario)
        if args.command == "balance":
            extra = {} if args.delta45 is None else {"delta45": args.delta45}
            return run_scenario(resolve_scenario("balance", "balance", args, extra), args.out)
        if args.command == "validate":
            warnings = validate_config(resolve_scenario("validate", args.scenario, args))
            for warning in warnings:
                print(warning)
            if not warnings:
                print("no warnings")
            return EXIT_OK
        return run_scenario(resolve_scenario("simulate", args.scenario, args), args.out)
    except (BalanceError, UnbalancedProbeError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (ScenarioValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
